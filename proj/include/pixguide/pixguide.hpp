// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pixguide/classifier/bank.hpp"
#include "pixguide/data/benchmark.hpp"
#include "pixguide/data/metrics.hpp"
#include "pixguide/edit/result.hpp"
#include "pixguide/edit/roi.hpp"
#include "pixguide/io/dataset.hpp"
#include "pixguide/io/hash.hpp"
#include "pixguide/io/png.hpp"
#include "pixguide/io/rle.hpp"
#include "pixguide/net/train.hpp"
