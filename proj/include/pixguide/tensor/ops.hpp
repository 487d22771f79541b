// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "pixguide/tensor/tensor.hpp"

// Forward ops with their reverse-mode rules. Shapes are checked strictly: the
// only implicit broadcast is a rank-0 operand in elementwise arithmetic.
// Image tensors use NCHW layout.

namespace pixguide {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using CMapMat = Eigen::Map<const RowMat<T>>;

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(ErrorCode::shape_mismatch, msg);
}

template <class T>
void require_rank(const Tensor<T>& t, std::size_t r, const char* op) {
    require(t.rank() == r, std::string(op) + ": expected rank " + std::to_string(r) + ", got shape " +
                               to_string(t.shape()));
}

inline bool is_scalar_shape(const Shape& s) { return s.empty(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    const bool sa = detail::is_scalar_shape(a.shape()), sb = detail::is_scalar_shape(b.shape());
    if (!sa && !sb) {
        detail::require(a.shape() == b.shape(),
                        "add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    const Tensor<T>& big = sb ? a : b;
    std::vector<T> out(big.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[sa ? 0 : i] + b[sb ? 0 : i];
    return detail::make_result<T>("add", big.shape(), std::move(out), {a, b},
                                  [sa, sb](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (int k = 0; k < 2; ++k) {
                                          if (gi[k].empty()) continue;
                                          const bool scalar = k == 0 ? sa : sb;
                                          if (scalar) {
                                              T acc = 0;
                                              for (T v : g) acc += v;
                                              gi[k][0] += acc;
                                          } else {
                                              for (std::size_t i = 0; i < g.size(); ++i) gi[k][i] += g[i];
                                          }
                                      }
                                  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.shape() == b.shape(),
                    "sub: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return detail::make_result<T>("sub", a.shape(), std::move(out), {a, b},
                                  [](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      if (!gi[0].empty())
                                          for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                                      if (!gi[1].empty())
                                          for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] -= g[i];
                                  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    const bool sa = detail::is_scalar_shape(a.shape()), sb = detail::is_scalar_shape(b.shape());
    if (!sa && !sb) {
        detail::require(a.shape() == b.shape(),
                        "mul: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    const Tensor<T>& big = sb ? a : b;
    std::vector<T> out(big.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[sa ? 0 : i] * b[sb ? 0 : i];
    return detail::make_result<T>(
        "mul", big.shape(), std::move(out), {a, b},
        [a, b, sa, sb](std::span<const T> g, std::vector<std::span<T>>& gi) {
            const Tensor<T>* self[2] = {&a, &b};
            const bool scalar[2] = {sa, sb};
            for (int k = 0; k < 2; ++k) {
                if (gi[k].empty()) continue;
                const Tensor<T>& other = *self[1 - k];
                const bool os = scalar[1 - k];
                if (scalar[k]) {
                    T acc = 0;
                    for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * other[os ? 0 : i];
                    gi[k][0] += acc;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) gi[k][i] += g[i] * other[os ? 0 : i];
                }
            }
        });
}

/// Multiplication by a constant that is not part of the graph.
template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
    return detail::make_result<T>("scale", a.shape(), std::move(out), {a},
                                  [factor](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * factor;
                                  });
}

// ---------------------------------------------------------------------------
// Nonlinearities

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / (T(1) + std::exp(-x[i]));
    return detail::make_result<T>("silu", x.shape(), std::move(out), {x},
                                  [x](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (std::size_t i = 0; i < g.size(); ++i) {
                                          const T s = T(1) / (T(1) + std::exp(-x[i]));
                                          gi[0][i] += g[i] * s * (T(1) + x[i] * (T(1) - s));
                                      }
                                  });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    return detail::make_result<T>("relu", x.shape(), std::move(out), {x},
                                  [x](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          if (x[i] > T(0)) gi[0][i] += g[i];
                                  });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
    auto y = std::make_shared<std::vector<T>>(out);
    return detail::make_result<T>("tanh", x.shape(), std::move(out), {x},
                                  [y](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          gi[0][i] += g[i] * (T(1) - (*y)[i] * (*y)[i]);
                                  });
}

// ---------------------------------------------------------------------------
// Reductions

/// Mean over all elements, accumulated in extended precision.
template <class T>
Tensor<T> mean(const Tensor<T>& x) {
    detail::require(x.size() > 0, "mean: empty tensor");
    long double acc = 0;
    for (T v : x.values()) acc += v;
    const T n = static_cast<T>(x.size());
    return detail::make_result<T>("mean", Shape{}, {static_cast<T>(acc / x.size())}, {x},
                                  [n](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      const T d = g[0] / n;
                                      for (auto& v : gi[0]) v += d;
                                  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
    long double acc = 0;
    for (T v : x.values()) acc += v;
    return detail::make_result<T>("sum", Shape{}, {static_cast<T>(acc)}, {x},
                                  [](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (auto& v : gi[0]) v += g[0];
                                  });
}

/// Mean of squared differences; the DDPM training objective.
template <class T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
    auto d = sub(a, b);
    return mean(mul(d, d));
}

// ---------------------------------------------------------------------------
// Linear algebra

/// [m,k] x [k,n] -> [m,n]
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_rank(a, 2, "matmul");
    detail::require_rank(b, 2, "matmul");
    const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
    detail::require(b.dim(0) == k, "matmul: inner dimensions differ " + to_string(a.shape()) + " x " +
                                       to_string(b.shape()));
    std::vector<T> out(m * n);
    detail::MapMat<T>(out.data(), m, n).noalias() =
        detail::CMapMat<T>(a.data(), m, k) * detail::CMapMat<T>(b.data(), k, n);
    return detail::make_result<T>(
        "matmul", Shape{m, n}, std::move(out), {a, b},
        [a, b, m, k, n](std::span<const T> g, std::vector<std::span<T>>& gi) {
            detail::CMapMat<T> G(g.data(), m, n);
            if (!gi[0].empty())
                detail::MapMat<T>(gi[0].data(), m, k).noalias() += G * detail::CMapMat<T>(b.data(), k, n).transpose();
            if (!gi[1].empty())
                detail::MapMat<T>(gi[1].data(), k, n).noalias() += detail::CMapMat<T>(a.data(), m, k).transpose() * G;
        });
}

/// Affine layer: x [n,in], weight [out,in], bias [out] -> [n,out].
/// Rows are computed independently so a row's result does not depend on how
/// many other rows share the call.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    detail::require_rank(x, 2, "linear");
    detail::require_rank(weight, 2, "linear");
    detail::require_rank(bias, 1, "linear");
    const auto n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
    detail::require(weight.dim(1) == in && bias.dim(0) == out_dim,
                    "linear: incompatible shapes x" + to_string(x.shape()) + " w" + to_string(weight.shape()) +
                        " b" + to_string(bias.shape()));
    std::vector<T> out(n * out_dim);
    detail::MapMat<T> Y(out.data(), n, out_dim);
    detail::CMapMat<T> X(x.data(), n, in), W(weight.data(), out_dim, in);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> B(bias.data(), out_dim);
    Y.noalias() = X * W.transpose();
    Y.rowwise() += B;
    return detail::make_result<T>(
        "linear", Shape{n, out_dim}, std::move(out), {x, weight, bias},
        [x, weight, n, in, out_dim](std::span<const T> g, std::vector<std::span<T>>& gi) {
            detail::CMapMat<T> G(g.data(), n, out_dim);
            if (!gi[0].empty())
                detail::MapMat<T>(gi[0].data(), n, in).noalias() += G * detail::CMapMat<T>(weight.data(), out_dim, in);
            if (!gi[1].empty())
                detail::MapMat<T>(gi[1].data(), out_dim, in).noalias() += G.transpose() * detail::CMapMat<T>(x.data(), n, in);
            if (!gi[2].empty()) {
                // Plain loops: Eigen reductions peel by address alignment, which
                // would make the summation order allocation-dependent.
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < out_dim; ++c) gi[2][c] += g[r * out_dim + c];
            }
        });
}

// ---------------------------------------------------------------------------
// Convolution

struct Conv2dOptions {
    std::size_t stride = 1;
    std::size_t padding = 0;
};

namespace detail {

struct ConvGeom {
    std::size_t c, h, w, kh, kw, stride, pad, ho, wo;
};

/// Valid output columns [lo, hi) whose input column ox*stride + kj - pad lies in [0, w).
inline std::pair<std::size_t, std::size_t> valid_cols(const ConvGeom& g, std::size_t kj) {
    const long off = static_cast<long>(kj) - static_cast<long>(g.pad);
    const long s = static_cast<long>(g.stride);
    long lo = off >= 0 ? 0 : (-off + s - 1) / s;
    long hi = (static_cast<long>(g.w) - 1 - off) >= 0 ? (static_cast<long>(g.w) - 1 - off) / s + 1 : 0;
    lo = std::min<long>(lo, static_cast<long>(g.wo));
    hi = std::clamp<long>(hi, lo, static_cast<long>(g.wo));
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

template <class T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
    const std::size_t plane = g.ho * g.wo;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ki = 0; ki < g.kh; ++ki)
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                T* row = cols + ((c * g.kh + ki) * g.kw + kj) * plane;
                const auto [lo, hi] = valid_cols(g, kj);
                const long off = static_cast<long>(kj) - static_cast<long>(g.pad);
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    T* dst = row + oy * g.wo;
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) {
                        std::fill(dst, dst + g.wo, T(0));
                        continue;
                    }
                    const T* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    std::fill(dst, dst + lo, T(0));
                    if (g.stride == 1) {
                        std::copy(src + (static_cast<long>(lo) + off), src + (static_cast<long>(hi) + off), dst + lo);
                    } else {
                        for (std::size_t ox = lo; ox < hi; ++ox)
                            dst[ox] = src[static_cast<long>(ox * g.stride) + off];
                    }
                    std::fill(dst + hi, dst + g.wo, T(0));
                }
            }
}

template <class T>
void col2im_add(const T* cols, const ConvGeom& g, T* x) {
    const std::size_t plane = g.ho * g.wo;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ki = 0; ki < g.kh; ++ki)
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const T* row = cols + ((c * g.kh + ki) * g.kw + kj) * plane;
                const auto [lo, hi] = valid_cols(g, kj);
                const long off = static_cast<long>(kj) - static_cast<long>(g.pad);
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    const T* src = row + oy * g.wo;
                    T* dst = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    if (g.stride == 1) {
                        T* d = dst + off;
                        for (std::size_t ox = lo; ox < hi; ++ox) d[ox] += src[ox];
                    } else {
                        for (std::size_t ox = lo; ox < hi; ++ox) dst[static_cast<long>(ox * g.stride) + off] += src[ox];
                    }
                }
            }
}

}  // namespace detail

/// x [N,C,H,W], weight [O,C,kh,kw], bias [O] -> [N,O,Ho,Wo].
/// Each sample is an independent im2col GEMM, so results are batch-invariant.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dOptions opt = {}) {
    detail::require_rank(x, 4, "conv2d");
    detail::require_rank(weight, 4, "conv2d");
    detail::require_rank(bias, 1, "conv2d");
    detail::require(opt.stride >= 1, "conv2d: stride must be >= 1");
    const auto n = x.dim(0), o = weight.dim(0);
    detail::ConvGeom geo{x.dim(1), x.dim(2), x.dim(3), weight.dim(2), weight.dim(3), opt.stride, opt.padding, 0, 0};
    detail::require(weight.dim(1) == geo.c && bias.dim(0) == o,
                    "conv2d: incompatible shapes x" + to_string(x.shape()) + " w" + to_string(weight.shape()) +
                        " b" + to_string(bias.shape()));
    detail::require(geo.h + 2 * geo.pad >= geo.kh && geo.w + 2 * geo.pad >= geo.kw, "conv2d: kernel larger than input");
    geo.ho = (geo.h + 2 * geo.pad - geo.kh) / geo.stride + 1;
    geo.wo = (geo.w + 2 * geo.pad - geo.kw) / geo.stride + 1;
    const std::size_t ckk = geo.c * geo.kh * geo.kw, plane = geo.ho * geo.wo, in_plane = geo.c * geo.h * geo.w;
    const bool direct = geo.kh == 1 && geo.kw == 1 && geo.stride == 1 && geo.pad == 0;

    std::vector<T> out(n * o * plane);
    std::vector<T> cols(direct ? 0 : ckk * plane);
    detail::CMapMat<T> W(weight.data(), o, ckk);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> B(bias.data(), o);
    for (std::size_t s = 0; s < n; ++s) {
        const T* src = x.data() + s * in_plane;
        if (!direct) detail::im2col(src, geo, cols.data());
        detail::MapMat<T> Y(out.data() + s * o * plane, o, plane);
        Y.noalias() = W * detail::CMapMat<T>(direct ? src : cols.data(), ckk, plane);
        Y.colwise() += B;
    }
    return detail::make_result<T>(
        "conv2d", Shape{n, o, geo.ho, geo.wo}, std::move(out), {x, weight, bias},
        [x, weight, geo, n, o, ckk, plane, in_plane, direct](std::span<const T> g, std::vector<std::span<T>>& gi) {
            detail::CMapMat<T> W(weight.data(), o, ckk);
            std::vector<T> cols(direct ? 0 : ckk * plane), dcols(direct ? 0 : ckk * plane);
            for (std::size_t s = 0; s < n; ++s) {
                detail::CMapMat<T> G(g.data() + s * o * plane, o, plane);
                const T* src = x.data() + s * in_plane;
                if (!gi[1].empty()) {
                    if (!direct) detail::im2col(src, geo, cols.data());
                    detail::MapMat<T>(gi[1].data(), o, ckk).noalias() +=
                        G * detail::CMapMat<T>(direct ? src : cols.data(), ckk, plane).transpose();
                }
                if (!gi[2].empty()) {
                    for (std::size_t r = 0; r < o; ++r) {
                        T acc = 0;
                        for (std::size_t p = 0; p < plane; ++p) acc += g[s * o * plane + r * plane + p];
                        gi[2][r] += acc;
                    }
                }
                if (!gi[0].empty()) {
                    if (direct) {
                        detail::MapMat<T>(gi[0].data() + s * in_plane, ckk, plane).noalias() += W.transpose() * G;
                    } else {
                        detail::MapMat<T>(dcols.data(), ckk, plane).noalias() = W.transpose() * G;
                        detail::col2im_add(dcols.data(), geo, gi[0].data() + s * in_plane);
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Normalization

/// GroupNorm over [N,C,H,W] with per-channel affine gamma/beta [C].
template <class T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
    detail::require_rank(x, 4, "group_norm");
    const auto n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    detail::require(groups >= 1 && c % groups == 0, "group_norm: channels not divisible by groups");
    detail::require(gamma.shape() == Shape{c} && beta.shape() == Shape{c}, "group_norm: affine shape mismatch");
    const std::size_t cg = c / groups, m = cg * hw;
    auto xhat = std::make_shared<std::vector<T>>(x.size());
    auto inv_std = std::make_shared<std::vector<T>>(n * groups);
    std::vector<T> out(x.size());
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t gidx = 0; gidx < groups; ++gidx) {
            const std::size_t base = (s * c + gidx * cg) * hw;
            double mu = 0, var = 0;
            for (std::size_t i = 0; i < m; ++i) mu += x[base + i];
            mu /= static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i) {
                const double d = x[base + i] - mu;
                var += d * d;
            }
            var /= static_cast<double>(m);
            const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            (*inv_std)[s * groups + gidx] = istd;
            for (std::size_t ch = 0; ch < cg; ++ch) {
                const std::size_t cc = gidx * cg + ch;
                for (std::size_t p = 0; p < hw; ++p) {
                    const std::size_t i = base + ch * hw + p;
                    const T xh = static_cast<T>(x[i] - mu) * istd;
                    (*xhat)[i] = xh;
                    out[i] = xh * gamma[cc] + beta[cc];
                }
            }
        }
    return detail::make_result<T>(
        "group_norm", x.shape(), std::move(out), {x, gamma, beta},
        [gamma, xhat, inv_std, n, c, hw, groups, cg, m](std::span<const T> g, std::vector<std::span<T>>& gi) {
            std::vector<T> dxhat(m);
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t gidx = 0; gidx < groups; ++gidx) {
                    const std::size_t base = (s * c + gidx * cg) * hw;
                    double sum_d = 0, sum_dx = 0;
                    for (std::size_t ch = 0; ch < cg; ++ch) {
                        const std::size_t cc = gidx * cg + ch;
                        for (std::size_t p = 0; p < hw; ++p) {
                            const std::size_t i = base + ch * hw + p;
                            const T gv = g[i];
                            if (!gi[1].empty()) gi[1][cc] += gv * (*xhat)[i];
                            if (!gi[2].empty()) gi[2][cc] += gv;
                            const T d = gv * gamma[cc];
                            dxhat[ch * hw + p] = d;
                            sum_d += d;
                            sum_dx += d * (*xhat)[i];
                        }
                    }
                    if (gi[0].empty()) continue;
                    const double istd = (*inv_std)[s * groups + gidx];
                    const double mm = static_cast<double>(m);
                    for (std::size_t j = 0; j < m; ++j) {
                        const std::size_t i = base + j;
                        gi[0][i] += static_cast<T>(istd / mm * (mm * dxhat[j] - sum_d - (*xhat)[i] * sum_dx));
                    }
                }
        });
}

// ---------------------------------------------------------------------------
// Shape manipulation

/// Concatenate along `axis`; all other extents must agree.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    detail::require(!parts.empty(), "concat: no inputs");
    const Shape& ref = parts[0].shape();
    detail::require(axis < ref.size(), "concat: axis out of range");
    Shape shape = ref;
    shape[axis] = 0;
    for (const auto& p : parts) {
        detail::require(p.rank() == ref.size(), "concat: rank mismatch");
        for (std::size_t d = 0; d < ref.size(); ++d)
            if (d != axis) detail::require(p.dim(d) == ref[d], "concat: extent mismatch on axis " + std::to_string(d));
        shape[axis] += p.dim(axis);
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= ref[d];
    for (std::size_t d = axis + 1; d < ref.size(); ++d) inner *= ref[d];
    std::vector<std::size_t> widths;
    for (const auto& p : parts) widths.push_back(p.dim(axis) * inner);
    const std::size_t row = shape[axis] * inner;
    std::vector<T> out(numel(shape));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(parts[k].data() + o * widths[k], widths[k], out.data() + o * row + offset);
        offset += widths[k];
    }
    return detail::make_result<T>("concat", shape, std::move(out), parts,
                                  [widths, outer, row](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      std::size_t off = 0;
                                      for (std::size_t k = 0; k < widths.size(); ++k) {
                                          if (!gi[k].empty())
                                              for (std::size_t o = 0; o < outer; ++o)
                                                  for (std::size_t i = 0; i < widths[k]; ++i)
                                                      gi[k][o * widths[k] + i] += g[o * row + off + i];
                                          off += widths[k];
                                      }
                                  });
}

/// Same values under a new shape with equal element count.
template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    detail::require(numel(shape) == x.size(), "reshape: element count differs");
    return detail::make_result<T>("reshape", std::move(shape), x.to_vector(), {x},
                                  [](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                                  });
}

/// [N,C,H,W] -> [N*H*W, C]: one row per pixel, samples then rows then columns.
template <class T>
Tensor<T> pixel_rows(const Tensor<T>& x) {
    detail::require_rank(x, 4, "pixel_rows");
    const auto n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<T> out(x.size());
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < hw; ++p) out[(s * hw + p) * c + ch] = x[(s * c + ch) * hw + p];
    return detail::make_result<T>("pixel_rows", Shape{n * hw, c}, std::move(out), {x},
                                  [n, c, hw](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (std::size_t s = 0; s < n; ++s)
                                          for (std::size_t ch = 0; ch < c; ++ch)
                                              for (std::size_t p = 0; p < hw; ++p)
                                                  gi[0][(s * c + ch) * hw + p] += g[(s * hw + p) * c + ch];
                                  });
}

/// Rows of a [P,D] tensor picked by index.
template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, std::vector<std::size_t> rows) {
    detail::require_rank(x, 2, "gather_rows");
    const auto p = x.dim(0), d = x.dim(1);
    std::vector<T> out(rows.size() * d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        detail::require(rows[r] < p, "gather_rows: index out of range");
        std::copy_n(x.data() + rows[r] * d, d, out.data() + r * d);
    }
    Shape shape{rows.size(), d};
    return detail::make_result<T>("gather_rows", std::move(shape), std::move(out), {x},
                                  [rows = std::move(rows), d](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (std::size_t r = 0; r < rows.size(); ++r)
                                          for (std::size_t k = 0; k < d; ++k) gi[0][rows[r] * d + k] += g[r * d + k];
                                  });
}

/// Adds a per-(sample, channel) value over the spatial extent:
/// x [N,C,H,W] + v [N,C]. An explicit op, not a broadcast.
template <class T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& v) {
    detail::require_rank(x, 4, "add_channel_bias");
    const auto n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    detail::require(v.shape() == Shape{n, c}, "add_channel_bias: bias shape " + to_string(v.shape()) +
                                                  " does not match " + to_string(x.shape()));
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < n * c; ++i)
        for (std::size_t p = 0; p < hw; ++p) out[i * hw + p] = x[i * hw + p] + v[i];
    return detail::make_result<T>("add_channel_bias", x.shape(), std::move(out), {x, v},
                                  [n, c, hw](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      for (std::size_t i = 0; i < n * c; ++i)
                                          for (std::size_t p = 0; p < hw; ++p) {
                                              if (!gi[0].empty()) gi[0][i * hw + p] += g[i * hw + p];
                                              if (!gi[1].empty()) gi[1][i] += g[i * hw + p];
                                          }
                                  });
}

// ---------------------------------------------------------------------------
// Resampling

namespace detail {

/// Corner-aligned source coordinate: output index 0 maps to input 0 and the
/// last output index maps to the last input index.
struct LerpTap {
    std::size_t lo, hi;
    double frac;
};

inline std::vector<LerpTap> corner_aligned_taps(std::size_t in, std::size_t out) {
    std::vector<LerpTap> taps(out);
    for (std::size_t i = 0; i < out; ++i) {
        const double src = out > 1 ? static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1) : 0.0;
        std::size_t lo = static_cast<std::size_t>(std::floor(src));
        if (lo >= in - 1) lo = in - 1;
        const std::size_t hi = std::min(lo + 1, in - 1);
        taps[i] = {lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
}

}  // namespace detail

/// Bilinear resize of [N,C,H,W] to [N,C,out_h,out_w] with corner-aligned
/// sampling (align_corners=true). Same-size resize returns the input itself.
template <class T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
    detail::require_rank(x, 4, "upsample_bilinear");
    detail::require(out_h >= 1 && out_w >= 1, "upsample_bilinear: empty output");
    const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h == out_h && w == out_w) return x;
    const auto ty = detail::corner_aligned_taps(h, out_h), tx = detail::corner_aligned_taps(w, out_w);
    std::vector<T> out(n * c * out_h * out_w);
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const T* src = x.data() + plane * h * w;
        T* dst = out.data() + plane * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const auto& a = ty[oy];
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const auto& b = tx[ox];
                const T fy = static_cast<T>(a.frac), fx = static_cast<T>(b.frac);
                const T top = src[a.lo * w + b.lo] * (T(1) - fx) + src[a.lo * w + b.hi] * fx;
                const T bot = src[a.hi * w + b.lo] * (T(1) - fx) + src[a.hi * w + b.hi] * fx;
                dst[oy * out_w + ox] = top * (T(1) - fy) + bot * fy;
            }
        }
    }
    return detail::make_result<T>(
        "upsample_bilinear", Shape{n, c, out_h, out_w}, std::move(out), {x},
        [ty, tx, n, c, h, w, out_h, out_w](std::span<const T> g, std::vector<std::span<T>>& gi) {
            for (std::size_t plane = 0; plane < n * c; ++plane) {
                const T* gd = g.data() + plane * out_h * out_w;
                T* dx = gi[0].data() + plane * h * w;
                for (std::size_t oy = 0; oy < out_h; ++oy) {
                    const auto& a = ty[oy];
                    const T fy = static_cast<T>(a.frac);
                    for (std::size_t ox = 0; ox < out_w; ++ox) {
                        const auto& b = tx[ox];
                        const T fx = static_cast<T>(b.frac);
                        const T v = gd[oy * out_w + ox];
                        dx[a.lo * w + b.lo] += v * (T(1) - fy) * (T(1) - fx);
                        dx[a.lo * w + b.hi] += v * (T(1) - fy) * fx;
                        dx[a.hi * w + b.lo] += v * fy * (T(1) - fx);
                        dx[a.hi * w + b.hi] += v * fy * fx;
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Losses

/// Softmax cross-entropy of logits [P,K] against integer labels.
///
/// Rows are split into `groups` equal contiguous chunks and the result is the
/// sum over chunks of the per-chunk mean. With groups == 1 this is the plain
/// mean. Accumulation runs in extended precision.
template <class T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels, std::size_t groups = 1) {
    detail::require_rank(logits, 2, "softmax_cross_entropy");
    const auto p = logits.dim(0), k = logits.dim(1);
    detail::require(labels.size() == p, "softmax_cross_entropy: label count differs from rows");
    detail::require(p > 0 && groups >= 1 && p % groups == 0, "softmax_cross_entropy: rows not divisible into groups");
    const std::size_t per = p / groups;
    auto probs = std::make_shared<std::vector<T>>(p * k);
    long double total = 0, chunk = 0;
    for (std::size_t r = 0; r < p; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw Error(ErrorCode::out_of_range, "softmax_cross_entropy: label out of range");
        const T* row = logits.data() + r * k;
        const long double mx = *std::max_element(row, row + k);
        long double z = 0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<long double>(row[j]) - mx);
        for (std::size_t j = 0; j < k; ++j)
            (*probs)[r * k + j] = static_cast<T>(std::exp(static_cast<long double>(row[j]) - mx) / z);
        chunk += mx + std::log(z) - static_cast<long double>(row[y]);
        if ((r + 1) % per == 0) {
            total += chunk / static_cast<long double>(per);
            chunk = 0;
        }
    }
    return detail::make_result<T>("softmax_cross_entropy", Shape{}, {static_cast<T>(total)}, {logits},
                                  [probs, labels, p, k, per](std::span<const T> g, std::vector<std::span<T>>& gi) {
                                      const T s = g[0] / static_cast<T>(per);
                                      for (std::size_t r = 0; r < p; ++r)
                                          for (std::size_t j = 0; j < k; ++j) {
                                              const T target = static_cast<int>(j) == labels[r] ? T(1) : T(0);
                                              gi[0][r * k + j] += s * ((*probs)[r * k + j] - target);
                                          }
                                  });
}

// ---------------------------------------------------------------------------
// Time embedding

/// Sinusoidal timestep embedding [len(ts), dim]: the first half holds
/// cos(t * f_i), the second half sin(t * f_i), with f_i = 10000^(-i/half).
/// A constant of the graph (timesteps are integers).
template <class T>
Tensor<T> embed_time(const std::vector<int>& ts, std::size_t dim) {
    if (dim == 0 || dim % 2 != 0) throw Error(ErrorCode::invalid_argument, "embed_time: dim must be even and positive");
    const std::size_t half = dim / 2;
    std::vector<T> out(ts.size() * dim);
    for (std::size_t r = 0; r < ts.size(); ++r)
        for (std::size_t i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
            const double arg = static_cast<double>(ts[r]) * freq;
            out[r * dim + i] = static_cast<T>(std::cos(arg));
            out[r * dim + half + i] = static_cast<T>(std::sin(arg));
        }
    return Tensor<T>(Shape{ts.size(), dim}, std::move(out));
}

}  // namespace pixguide
