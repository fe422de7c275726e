// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ccnn/parallel.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

namespace detail {

template <typename T>
inline T dot(const T* a, const T* b, int n) {
    T acc = 0;
#pragma omp simd reduction(+ : acc)
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

// y += a * x
template <typename T>
inline void axpy(T* y, const T* x, T a, int n) {
#pragma omp simd
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

// C[m x n] += A[m x k] * B[k x n], row-major. The j-inner loop keeps B and C
// accesses contiguous.
template <typename T>
inline void gemm_accum(const T* A, const T* B, T* C, int m, int k, int n) {
    parallel_for(m, [=](long i0, long i1) {
        for (long i = i0; i < i1; ++i) {
            const T* arow = A + static_cast<std::size_t>(i) * k;
            T* crow = C + static_cast<std::size_t>(i) * n;
            for (int l = 0; l < k; ++l) {
                const T a = arow[l];
                const T* brow = B + static_cast<std::size_t>(l) * n;
#pragma omp simd
                for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
            }
        }
    });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

/// Matrix product a[m x k] * b[k x n] -> [m x n]. A rank-1 b of length k is
/// treated as a column vector and yields a rank-1 result of length m.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, TapeOf<T>* tape) {
    if (a.rank() != 2)
        throw DimensionError("matmul: left operand must be rank-2, got " + shape_str(a.shape()));
    if (b.rank() != 1 && b.rank() != 2)
        throw DimensionError("matmul: right operand must be rank-1 or rank-2, got " +
                             shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1);
    const int bk = b.dim(0);
    const int n = b.rank() == 2 ? b.dim(1) : 1;
    if (k != bk)
        throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));

    const bool rec = detail::needs_grad(tape, {&a, &b});
    Tensor<T> out = Tensor<T>::zeros(b.rank() == 2 ? Shape{m, n} : Shape{m}, rec);
    const T* A = a.data();
    const T* B = b.data();
    T* C = out.data();
    if (n == 1) {
        parallel_for(m, [=](long i0, long i1) {
            for (long i = i0; i < i1; ++i)
                C[i] = detail::dot(A + static_cast<std::size_t>(i) * k, B, k);
        });
    } else {
        detail::gemm_accum(A, B, C, m, k, n);
    }
    debug_check_finite(out, "matmul");

    if (rec) {
        tape->watch(a);
        tape->watch(b);
        tape->track_interior(out);
        auto ad = a.storage(), bd = b.storage(), od = out.storage();
        tape->record([ad, bd, od, m, k, n] {
            const T* A = ad->v.data();
            const T* B = bd->v.data();
            const T* dC = od->g.data();
            if (ad->requires_grad) {
                T* dA = ad->g.data();
                if (n == 1) {
                    for (int i = 0; i < m; ++i)
                        detail::axpy(dA + static_cast<std::size_t>(i) * k, B, dC[i], k);
                } else {
                    parallel_for(m, [=](long i0, long i1) {
                        for (long i = i0; i < i1; ++i) {
                            const T* dcrow = dC + static_cast<std::size_t>(i) * n;
                            T* darow = dA + static_cast<std::size_t>(i) * k;
                            for (int l = 0; l < k; ++l)
                                darow[l] +=
                                    detail::dot(dcrow, B + static_cast<std::size_t>(l) * n, n);
                        }
                    });
                }
            }
            if (bd->requires_grad) {
                T* dB = bd->g.data();
                for (int i = 0; i < m; ++i) {
                    const T* arow = A + static_cast<std::size_t>(i) * k;
                    const T* dcrow = dC + static_cast<std::size_t>(i) * n;
                    if (n == 1) {
                        detail::axpy(dB, arow, dcrow[0], k);
                    } else {
                        for (int l = 0; l < k; ++l)
                            detail::axpy(dB + static_cast<std::size_t>(l) * n, dcrow, arow[l], n);
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, TapeOf<T>* tape) {
    if (a.shape() != b.shape())
        throw DimensionError("add: shapes disagree: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const bool rec = detail::needs_grad(tape, {&a, &b});
    Tensor<T> out = Tensor<T>::zeros(a.shape(), rec);
    const long n = a.size();
    const T* av = a.data();
    const T* bv = b.data();
    T* ov = out.data();
    for (long i = 0; i < n; ++i) ov[i] = av[i] + bv[i];
    debug_check_finite(out, "add");
    if (rec) {
        tape->watch(a);
        tape->watch(b);
        tape->track_interior(out);
        auto ad = a.storage(), bd = b.storage(), od = out.storage();
        tape->record([ad, bd, od, n] {
            const T* dout = od->g.data();
            if (ad->requires_grad)
                for (long i = 0; i < n; ++i) ad->g[i] += dout[i];
            if (bd->requires_grad)
                for (long i = 0; i < n; ++i) bd->g[i] += dout[i];
        });
    }
    return out;
}

/// Hadamard product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, TapeOf<T>* tape) {
    if (a.shape() != b.shape())
        throw DimensionError("mul: shapes disagree: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const bool rec = detail::needs_grad(tape, {&a, &b});
    Tensor<T> out = Tensor<T>::zeros(a.shape(), rec);
    const long n = a.size();
    const T* av = a.data();
    const T* bv = b.data();
    T* ov = out.data();
    for (long i = 0; i < n; ++i) ov[i] = av[i] * bv[i];
    debug_check_finite(out, "mul");
    if (rec) {
        tape->watch(a);
        tape->watch(b);
        tape->track_interior(out);
        auto ad = a.storage(), bd = b.storage(), od = out.storage();
        tape->record([ad, bd, od, n] {
            const T* dout = od->g.data();
            if (ad->requires_grad)
                for (long i = 0; i < n; ++i) ad->g[i] += dout[i] * bd->v[i];
            if (bd->requires_grad)
                for (long i = 0; i < n; ++i) bd->g[i] += dout[i] * ad->v[i];
        });
    }
    return out;
}

/// x + b with b broadcast over columns: x is [H] (plain add) or [H x B].
template <typename T>
Tensor<T> add_col_bias(const Tensor<T>& x, const Tensor<T>& b, TapeOf<T>* tape) {
    if (b.rank() != 1)
        throw DimensionError("add_col_bias: bias must be rank-1, got " + shape_str(b.shape()));
    if (x.rank() == 1) return add(x, b, tape);
    if (x.rank() != 2 || x.dim(0) != b.dim(0))
        throw DimensionError("add_col_bias: shapes disagree: " + shape_str(x.shape()) + " vs " +
                             shape_str(b.shape()));
    const int h = x.dim(0), cols = x.dim(1);
    const bool rec = detail::needs_grad(tape, {&x, &b});
    Tensor<T> out = Tensor<T>::zeros(x.shape(), rec);
    const T* xv = x.data();
    const T* bv = b.data();
    T* ov = out.data();
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < cols; ++j)
            ov[static_cast<std::size_t>(i) * cols + j] =
                xv[static_cast<std::size_t>(i) * cols + j] + bv[i];
    debug_check_finite(out, "add_col_bias");
    if (rec) {
        tape->watch(x);
        tape->watch(b);
        tape->track_interior(out);
        auto xd = x.storage(), bd = b.storage(), od = out.storage();
        tape->record([xd, bd, od, h, cols] {
            const T* dout = od->g.data();
            if (xd->requires_grad)
                for (long i = 0; i < static_cast<long>(h) * cols; ++i) xd->g[i] += dout[i];
            if (bd->requires_grad)
                for (int i = 0; i < h; ++i) {
                    T acc = 0;
                    const T* row = dout + static_cast<std::size_t>(i) * cols;
#pragma omp simd reduction(+ : acc)
                    for (int j = 0; j < cols; ++j) acc += row[j];
                    bd->g[i] += acc;
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

enum class Act { Sigmoid, Tanh, Relu };

/// Elementwise activation. Sigmoid maps into (0,1), tanh into (-1,1),
/// relu into [0, inf).
template <typename T>
Tensor<T> activate(const Tensor<T>& x, Act kind, TapeOf<T>* tape) {
    const bool rec = detail::needs_grad(tape, {&x});
    Tensor<T> out = Tensor<T>::zeros(x.shape(), rec);
    const long n = x.size();
    const T* xv = x.data();
    T* ov = out.data();
    switch (kind) {
        case Act::Sigmoid:
            for (long i = 0; i < n; ++i) ov[i] = T(1) / (T(1) + std::exp(-xv[i]));
            break;
        case Act::Tanh:
            for (long i = 0; i < n; ++i) ov[i] = std::tanh(xv[i]);
            break;
        case Act::Relu:
            for (long i = 0; i < n; ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
            break;
    }
    debug_check_finite(out, "activate");
    if (rec) {
        tape->watch(x);
        tape->track_interior(out);
        auto xd = x.storage(), od = out.storage();
        tape->record([xd, od, n, kind] {
            const T* y = od->v.data();
            const T* dout = od->g.data();
            T* dx = xd->g.data();
            switch (kind) {
                case Act::Sigmoid:
                    for (long i = 0; i < n; ++i) dx[i] += dout[i] * y[i] * (T(1) - y[i]);
                    break;
                case Act::Tanh:
                    for (long i = 0; i < n; ++i) dx[i] += dout[i] * (T(1) - y[i] * y[i]);
                    break;
                case Act::Relu:
                    for (long i = 0; i < n; ++i) dx[i] += y[i] > T(0) ? dout[i] : T(0);
                    break;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

inline int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

template <typename T>
void im2col(const T* input, int c_in, int h, int w, int k, int stride, int pad, int oh, int ow,
            T* cols) {
    const long n = static_cast<long>(oh) * ow;
    for (int ic = 0; ic < c_in; ++ic) {
        const T* chan = input + static_cast<std::size_t>(ic) * h * w;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + (static_cast<std::size_t>(ic) * k * k + ky * k + kx) * n;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    T* dst = row + static_cast<std::size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + ow, T(0));
                        continue;
                    }
                    const T* src = chan + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
    }
}

template <typename T>
void col2im_accum(const T* cols, int c_in, int h, int w, int k, int stride, int pad, int oh,
                  int ow, T* dinput) {
    const long n = static_cast<long>(oh) * ow;
    for (int ic = 0; ic < c_in; ++ic) {
        T* chan = dinput + static_cast<std::size_t>(ic) * h * w;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + (static_cast<std::size_t>(ic) * k * k + ky * k + kx) * n;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    const T* src = row + static_cast<std::size_t>(oy) * ow;
                    T* dst = chan + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
    }
}

}  // namespace detail

/// 2-D cross-correlation (no kernel flip) with zero padding.
/// input [C_in x H x W], kernels [C_out x C_in x k x k] -> [C_out x H' x W']
/// where H' = floor((H + 2*pad - k)/stride) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, int stride, int pad,
                 TapeOf<T>* tape) {
    if (input.rank() != 3)
        throw DimensionError("conv2d: input must be [C x H x W], got " + shape_str(input.shape()));
    if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3))
        throw DimensionError("conv2d: kernels must be [C_out x C_in x k x k], got " +
                             shape_str(kernels.shape()));
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = kernels.dim(0), k = kernels.dim(2);
    if (kernels.dim(1) != c_in)
        throw DimensionError("conv2d: channel mismatch: input " + shape_str(input.shape()) +
                             " vs kernels " + shape_str(kernels.shape()));
    if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
    if (pad < 0) throw ContractError("conv2d: pad must be >= 0");
    if (k > h + 2 * pad || k > w + 2 * pad)
        throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) +
                             " larger than padded input " + shape_str(input.shape()));
    const int oh = conv_out_extent(h, k, stride, pad);
    const int ow = conv_out_extent(w, k, stride, pad);
    const int kk = c_in * k * k;
    const long n = static_cast<long>(oh) * ow;

    std::vector<T> cols(static_cast<std::size_t>(kk) * n);
    detail::im2col(input.data(), c_in, h, w, k, stride, pad, oh, ow, cols.data());

    const bool rec = detail::needs_grad(tape, {&input, &kernels});
    Tensor<T> out = Tensor<T>::zeros({c_out, oh, ow}, rec);
    detail::gemm_accum(kernels.data(), cols.data(), out.data(), c_out, kk, static_cast<int>(n));
    debug_check_finite(out, "conv2d");

    if (rec) {
        tape->watch(input);
        tape->watch(kernels);
        tape->track_interior(out);
        auto id = input.storage(), kd = kernels.storage(), od = out.storage();
        auto saved_cols = std::make_shared<std::vector<T>>(std::move(cols));
        tape->record([id, kd, od, saved_cols, c_in, h, w, k, stride, pad, oh, ow, c_out, kk, n] {
            const T* dout = od->g.data();
            if (kd->requires_grad) {
                T* dk = kd->g.data();
                const T* C = saved_cols->data();
                parallel_for(c_out, [=](long i0, long i1) {
                    for (long i = i0; i < i1; ++i) {
                        const T* drow = dout + static_cast<std::size_t>(i) * n;
                        T* dkrow = dk + static_cast<std::size_t>(i) * kk;
                        for (int r = 0; r < kk; ++r)
                            dkrow[r] += detail::dot(drow, C + static_cast<std::size_t>(r) * n,
                                                    static_cast<int>(n));
                    }
                });
            }
            if (id->requires_grad) {
                std::vector<T> dcols(static_cast<std::size_t>(kk) * n, T(0));
                const T* K = kd->v.data();
                for (int i = 0; i < c_out; ++i) {
                    const T* krow = K + static_cast<std::size_t>(i) * kk;
                    const T* drow = dout + static_cast<std::size_t>(i) * n;
                    for (int r = 0; r < kk; ++r)
                        detail::axpy(dcols.data() + static_cast<std::size_t>(r) * n, drow, krow[r],
                                     static_cast<int>(n));
                }
                detail::col2im_accum(dcols.data(), c_in, h, w, k, stride, pad, oh, ow,
                                     id->g.data());
            }
        });
    }
    return out;
}

/// x[C x H x W] + per-channel bias[C].
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b, TapeOf<T>* tape) {
    if (x.rank() != 3 || b.rank() != 1 || b.dim(0) != x.dim(0))
        throw DimensionError("add_channel_bias: shapes disagree: " + shape_str(x.shape()) +
                             " vs " + shape_str(b.shape()));
    const int c = x.dim(0);
    const long hw = static_cast<long>(x.dim(1)) * x.dim(2);
    const bool rec = detail::needs_grad(tape, {&x, &b});
    Tensor<T> out = Tensor<T>::zeros(x.shape(), rec);
    const T* xv = x.data();
    const T* bv = b.data();
    T* ov = out.data();
    for (int ic = 0; ic < c; ++ic)
        for (long i = 0; i < hw; ++i) ov[ic * hw + i] = xv[ic * hw + i] + bv[ic];
    debug_check_finite(out, "add_channel_bias");
    if (rec) {
        tape->watch(x);
        tape->watch(b);
        tape->track_interior(out);
        auto xd = x.storage(), bd = b.storage(), od = out.storage();
        tape->record([xd, bd, od, c, hw] {
            const T* dout = od->g.data();
            if (xd->requires_grad)
                for (long i = 0; i < c * hw; ++i) xd->g[i] += dout[i];
            if (bd->requires_grad)
                for (int ic = 0; ic < c; ++ic) {
                    T acc = 0;
                    const T* row = dout + ic * hw;
#pragma omp simd reduction(+ : acc)
                    for (long i = 0; i < hw; ++i) acc += row[i];
                    bd->g[ic] += acc;
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions and reshapes
// ---------------------------------------------------------------------------

/// Sum of all elements -> scalar.
template <typename T>
Tensor<T> sum(const Tensor<T>& x, TapeOf<T>* tape) {
    const bool rec = detail::needs_grad(tape, {&x});
    Tensor<T> out = Tensor<T>::zeros({1}, rec);
    T acc = 0;
    const T* xv = x.data();
    const long n = x.size();
    for (long i = 0; i < n; ++i) acc += xv[i];
    out(0) = acc;
    debug_check_finite(out, "sum");
    if (rec) {
        tape->watch(x);
        tape->track_interior(out);
        auto xd = x.storage(), od = out.storage();
        tape->record([xd, od, n] {
            const T d = od->g[0];
            for (long i = 0; i < n; ++i) xd->g[i] += d;
        });
    }
    return out;
}

/// Copying reshape; gradient passes through one-to-one.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape, TapeOf<T>* tape) {
    if (shape_numel(shape) != x.size())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(shape));
    const bool rec = detail::needs_grad(tape, {&x});
    Tensor<T> out = Tensor<T>::from(std::move(shape), std::vector<T>(x.data(), x.data() + x.size()),
                                    rec);
    if (rec) {
        tape->watch(x);
        tape->track_interior(out);
        auto xd = x.storage(), od = out.storage();
        const long n = x.size();
        tape->record([xd, od, n] {
            for (long i = 0; i < n; ++i) xd->g[i] += od->g[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x, TapeOf<T>* tape) {
    return reshape(x, Shape{static_cast<int>(x.size())}, tape);
}

/// Mean over the spatial extent of each channel: [C x H x W] -> [C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x, TapeOf<T>* tape) {
    if (x.rank() != 3)
        throw DimensionError("global_avg_pool: input must be [C x H x W], got " +
                             shape_str(x.shape()));
    const int c = x.dim(0);
    const long hw = static_cast<long>(x.dim(1)) * x.dim(2);
    const bool rec = detail::needs_grad(tape, {&x});
    Tensor<T> out = Tensor<T>::zeros({c}, rec);
    const T* xv = x.data();
    for (int ic = 0; ic < c; ++ic) {
        T acc = 0;
        const T* row = xv + ic * hw;
#pragma omp simd reduction(+ : acc)
        for (long i = 0; i < hw; ++i) acc += row[i];
        out(ic) = acc / static_cast<T>(hw);
    }
    debug_check_finite(out, "global_avg_pool");
    if (rec) {
        tape->watch(x);
        tape->track_interior(out);
        auto xd = x.storage(), od = out.storage();
        tape->record([xd, od, c, hw] {
            for (int ic = 0; ic < c; ++ic) {
                const T d = od->g[ic] / static_cast<T>(hw);
                for (long i = 0; i < hw; ++i) xd->g[ic * hw + i] += d;
            }
        });
    }
    return out;
}

/// Concatenation along dimension 0. Inputs must agree on every other
/// dimension (rank-1 vectors, or rank-2 matrices with equal column counts).
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, TapeOf<T>* tape) {
    if (parts.empty()) throw ContractError("concat: empty input list");
    const int rank = parts[0].rank();
    const int cols = rank == 2 ? parts[0].dim(1) : 1;
    int total = 0;
    bool any_grad = false;
    for (const auto& p : parts) {
        if (p.rank() != rank || (rank == 2 && p.dim(1) != cols))
            throw DimensionError("concat: incompatible part shape " + shape_str(p.shape()));
        total += p.dim(0);
        any_grad |= p.requires_grad();
    }
    const bool rec = tape != nullptr && any_grad;
    Tensor<T> out =
        Tensor<T>::zeros(rank == 2 ? Shape{total, cols} : Shape{total}, rec);
    T* ov = out.data();
    long off = 0;
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.size(), ov + off);
        off += p.size();
    }
    if (rec) {
        for (const auto& p : parts) tape->watch(p);
        tape->track_interior(out);
        std::vector<std::shared_ptr<TensorData<T>>> srcs;
        srcs.reserve(parts.size());
        for (const auto& p : parts) srcs.push_back(p.storage());
        auto od = out.storage();
        tape->record([srcs, od] {
            long off = 0;
            for (auto& s : srcs) {
                const long n = static_cast<long>(s->v.size());
                if (s->requires_grad)
                    for (long i = 0; i < n; ++i) s->g[i] += od->g[off + i];
                off += n;
            }
        });
    }
    return out;
}

/// Stacks B rank-1 vectors of length D into a [D x B] matrix (vector s
/// becomes column s).
template <typename T>
Tensor<T> hstack(const std::vector<Tensor<T>>& columns, TapeOf<T>* tape) {
    if (columns.empty()) throw ContractError("hstack: empty input list");
    const int d = columns[0].dim(0);
    bool any_grad = false;
    for (const auto& c : columns) {
        if (c.rank() != 1 || c.dim(0) != d)
            throw DimensionError("hstack: incompatible column shape " + shape_str(c.shape()));
        any_grad |= c.requires_grad();
    }
    const int b = static_cast<int>(columns.size());
    const bool rec = tape != nullptr && any_grad;
    Tensor<T> out = Tensor<T>::zeros({d, b}, rec);
    T* ov = out.data();
    for (int s = 0; s < b; ++s) {
        const T* src = columns[s].data();
        for (int i = 0; i < d; ++i) ov[static_cast<std::size_t>(i) * b + s] = src[i];
    }
    if (rec) {
        for (const auto& c : columns) tape->watch(c);
        tape->track_interior(out);
        std::vector<std::shared_ptr<TensorData<T>>> srcs;
        srcs.reserve(columns.size());
        for (const auto& c : columns) srcs.push_back(c.storage());
        auto od = out.storage();
        tape->record([srcs, od, d, b] {
            for (int s = 0; s < b; ++s) {
                auto& sd = srcs[static_cast<std::size_t>(s)];
                if (!sd->requires_grad) continue;
                for (int i = 0; i < d; ++i)
                    sd->g[i] += od->g[static_cast<std::size_t>(i) * b + s];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax / cross-entropy
// ---------------------------------------------------------------------------

/// Numerically stable softmax of a logit vector (no tape participation).
template <typename T>
std::vector<T> softmax_values(const T* logits, int k) {
    T m = logits[0];
    for (int i = 1; i < k; ++i) m = std::max(m, logits[i]);
    std::vector<T> p(static_cast<std::size_t>(k));
    T z = 0;
    for (int i = 0; i < k; ++i) {
        p[static_cast<std::size_t>(i)] = std::exp(logits[i] - m);
        z += p[static_cast<std::size_t>(i)];
    }
    for (auto& x : p) x /= z;
    return p;
}

/// -log softmax(logits)[target] summed over batch columns and divided by the
/// column count (mean reduction). logits is [K] with a single target, or
/// [K x B] with one target per column. Max-subtraction keeps huge logits
/// from overflowing.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets,
                                TapeOf<T>* tape) {
    const int k = logits.dim(0);
    const int b = logits.rank() == 2 ? logits.dim(1) : 1;
    if (logits.rank() > 2)
        throw DimensionError("softmax_cross_entropy: logits must be [K] or [K x B], got " +
                             shape_str(logits.shape()));
    if (static_cast<int>(targets.size()) != b)
        throw ContractError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                            " targets for batch of " + std::to_string(b));
    for (int t : targets)
        if (t < 0 || t >= k)
            throw std::out_of_range("softmax_cross_entropy: target " + std::to_string(t) +
                                    " outside [0, " + std::to_string(k) + ")");

    const bool rec = detail::needs_grad(tape, {&logits});
    Tensor<T> out = Tensor<T>::zeros({1}, rec);
    // Softmax probabilities are kept for the backward pass.
    auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(k) * b);
    const T* lv = logits.data();
    T total = 0;
    for (int j = 0; j < b; ++j) {
        T m = lv[j];
        for (int i = 1; i < k; ++i) m = std::max(m, lv[static_cast<std::size_t>(i) * b + j]);
        T z = 0;
        for (int i = 0; i < k; ++i) {
            const T e = std::exp(lv[static_cast<std::size_t>(i) * b + j] - m);
            (*probs)[static_cast<std::size_t>(i) * b + j] = e;
            z += e;
        }
        for (int i = 0; i < k; ++i) (*probs)[static_cast<std::size_t>(i) * b + j] /= z;
        total += std::log(z) - (lv[static_cast<std::size_t>(targets[static_cast<std::size_t>(j)]) * b + j] - m);
    }
    out(0) = total / static_cast<T>(b);
    debug_check_finite(out, "softmax_cross_entropy");

    if (rec) {
        tape->watch(logits);
        tape->track_interior(out);
        auto ld = logits.storage(), od = out.storage();
        auto tg = targets;
        tape->record([ld, od, probs, tg, k, b] {
            const T d = od->g[0] / static_cast<T>(b);
            for (int j = 0; j < b; ++j)
                for (int i = 0; i < k; ++i) {
                    T p = (*probs)[static_cast<std::size_t>(i) * b + j];
                    if (i == tg[static_cast<std::size_t>(j)]) p -= T(1);
                    ld->g[static_cast<std::size_t>(i) * b + j] += d * p;
                }
        });
    }
    return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, int target, TapeOf<T>* tape) {
    if (logits.rank() != 1)
        throw DimensionError("softmax_cross_entropy: single-target form expects rank-1 logits, got " +
                             shape_str(logits.shape()));
    return softmax_cross_entropy(logits, std::vector<int>{target}, tape);
}

}  // namespace ccnn
