#pragma once

#include <cmath>
#include <limits>

#include "ctex/tensor.hpp"

// Differentiable primitives over tape variables. Forward values follow the
// standard definitions; every primitive registers an exact vector-Jacobian
// product. Reductions use fixed row-major sequential order.

namespace ctex {

template <typename S>
Eigen::Map<MatX<S>> as_mat(ArrX<S>& a, long rows, long cols) {
    return Eigen::Map<MatX<S>>(a.data(), rows, cols);
}
template <typename S>
Eigen::Map<const MatX<S>> as_mat(const ArrX<S>& a, long rows, long cols) {
    return Eigen::Map<const MatX<S>>(a.data(), rows, cols);
}

namespace detail {

template <typename S>
void check_rank(const std::string& op, Var<S> v, std::size_t rank) {
    if (v.shape().size() != rank) shape_fail(op, v.shape());
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
    check_same_tape("add", a, b);
    if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
    Tape<S>& t = *a.tape;
    return t.make(a.shape(), a.value() + b.value(), {a.id, b.id},
                  [](Tape<S>& t, const typename Tape<S>::Node& n) {
                      t.accum(n.parents[0], n.grad);
                      t.accum(n.parents[1], n.grad);
                  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
    check_same_tape("sub", a, b);
    if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
    Tape<S>& t = *a.tape;
    return t.make(a.shape(), a.value() - b.value(), {a.id, b.id},
                  [](Tape<S>& t, const typename Tape<S>::Node& n) {
                      t.accum(n.parents[0], n.grad);
                      t.accum(n.parents[1], ArrX<S>(-n.grad));
                  });
}

// Elementwise (Hadamard) product.
template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
    check_same_tape("mul", a, b);
    if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
    Tape<S>& t = *a.tape;
    return t.make(a.shape(), a.value() * b.value(), {a.id, b.id},
                  [](Tape<S>& t, const typename Tape<S>::Node& n) {
                      t.accum(n.parents[0], ArrX<S>(n.grad * t.node(n.parents[1]).value));
                      t.accum(n.parents[1], ArrX<S>(n.grad * t.node(n.parents[0]).value));
                  });
}

template <typename S>
Var<S> scale(Var<S> a, S c) {
    Tape<S>& t = *a.tape;
    return t.make(a.shape(), a.value() * c, {a.id},
                  [c](Tape<S>& t, const typename Tape<S>::Node& n) {
                      t.accum(n.parents[0], ArrX<S>(n.grad * c));
                  });
}

template <typename S>
Var<S> add_scalar(Var<S> a, S c) {
    Tape<S>& t = *a.tape;
    return t.make(a.shape(), a.value() + c, {a.id},
                  [](Tape<S>& t, const typename Tape<S>::Node& n) {
                      t.accum(n.parents[0], n.grad);
                  });
}

template <typename S>
Var<S> neg(Var<S> a) {
    return scale(a, S(-1));
}

template <typename S>
Var<S> relu(Var<S> a) {
    Tape<S>& t = *a.tape;
    return t.make(a.shape(), a.value().max(S(0)), {a.id},
                  [](Tape<S>& t, const typename Tape<S>::Node& n) {
                      const ArrX<S>& x = t.node(n.parents[0]).value;
                      t.accum(n.parents[0], ArrX<S>(n.grad * (x > S(0)).template cast<S>()));
                  });
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
    Tape<S>& t = *a.tape;
    ArrX<S> s(a.value().size());
    for (long i = 0; i < s.size(); ++i) {
        const S x = a.value()[i];
        if (x >= S(0)) {
            s[i] = S(1) / (S(1) + std::exp(-x));
        } else {
            const S e = std::exp(x);
            s[i] = e / (S(1) + e);
        }
    }
    return t.make(a.shape(), std::move(s), {a.id},
                  [](Tape<S>& t, const typename Tape<S>::Node& n) {
                      // d sigma = sigma (1 - sigma), reusing the forward value.
                      t.accum(n.parents[0], ArrX<S>(n.grad * n.value * (S(1) - n.value)));
                  });
}

// ---- linear algebra --------------------------------------------------------

// C = op(A) * op(B) on rank-2 operands, with optional transposes.
template <typename S>
Var<S> matmul(Var<S> a, Var<S> b, bool trans_a = false, bool trans_b = false) {
    check_same_tape("matmul", a, b);
    detail::check_rank("matmul", a, 2);
    detail::check_rank("matmul", b, 2);
    const long ar = a.shape()[0], ac = a.shape()[1];
    const long br = b.shape()[0], bc = b.shape()[1];
    const long n = trans_a ? ac : ar;
    const long k = trans_a ? ar : ac;
    const long kb = trans_b ? bc : br;
    const long m = trans_b ? br : bc;
    if (k != kb) shape_fail("matmul", a.shape(), b.shape());

    Tape<S>& t = *a.tape;
    ArrX<S> out(n * m);
    {
        auto A = as_mat(a.value(), ar, ac);
        auto B = as_mat(b.value(), br, bc);
        auto C = as_mat(out, n, m);
        if (!trans_a && !trans_b) C.noalias() = A * B;
        else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
        else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
        else C.noalias() = A.transpose() * B.transpose();
    }
    return t.make(Shape{n, m}, std::move(out), {a.id, b.id},
                  [trans_a, trans_b, ar, ac, br, bc, n, m](Tape<S>& t,
                                                           const typename Tape<S>::Node& nd) {
                      auto G = as_mat(nd.grad, n, m);
                      auto A = as_mat(t.node(nd.parents[0]).value, ar, ac);
                      auto B = as_mat(t.node(nd.parents[1]).value, br, bc);
                      if (t.node(nd.parents[0]).requires_grad) {
                          auto dA = as_mat(t.node(nd.parents[0]).grad, ar, ac);
                          if (!trans_a && !trans_b) dA.noalias() += G * B.transpose();
                          else if (!trans_a && trans_b) dA.noalias() += G * B;
                          else if (trans_a && !trans_b) dA.noalias() += B * G.transpose();
                          else dA.noalias() += B.transpose() * G.transpose();
                      }
                      if (t.node(nd.parents[1]).requires_grad) {
                          auto dB = as_mat(t.node(nd.parents[1]).grad, br, bc);
                          if (!trans_a && !trans_b) dB.noalias() += A.transpose() * G;
                          else if (trans_a && !trans_b) dB.noalias() += A * G;
                          else if (!trans_a && trans_b) dB.noalias() += G.transpose() * A;
                          else dB.noalias() += G.transpose() * A.transpose();
                      }
                  });
}

namespace detail {

// Gathers conv patches of sample `n` into a (Ci*Kh*Kw) x (Ho*Wo) matrix.
template <typename S>
void im2col(const ArrX<S>& x, long n, long C, long H, long W, long kh, long kw, long stride,
            long pad, long ho, long wo, Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& col) {
    col.setZero(C * kh * kw, ho * wo);
    const S* base = x.data() + n * C * H * W;
    for (long c = 0; c < C; ++c) {
        for (long i = 0; i < kh; ++i) {
            for (long j = 0; j < kw; ++j) {
                const long row = (c * kh + i) * kw + j;
                for (long oh = 0; oh < ho; ++oh) {
                    const long ih = oh * stride - pad + i;
                    if (ih < 0 || ih >= H) continue;
                    for (long ow = 0; ow < wo; ++ow) {
                        const long iw = ow * stride - pad + j;
                        if (iw < 0 || iw >= W) continue;
                        col(row, oh * wo + ow) = base[(c * H + ih) * W + iw];
                    }
                }
            }
        }
    }
}

// Scatter-adds a column matrix back onto the input gradient of sample `n`.
template <typename S>
void col2im_accum(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& col, long n, long C,
                  long H, long W, long kh, long kw, long stride, long pad, long ho, long wo,
                  ArrX<S>& dx) {
    S* base = dx.data() + n * C * H * W;
    for (long c = 0; c < C; ++c) {
        for (long i = 0; i < kh; ++i) {
            for (long j = 0; j < kw; ++j) {
                const long row = (c * kh + i) * kw + j;
                for (long oh = 0; oh < ho; ++oh) {
                    const long ih = oh * stride - pad + i;
                    if (ih < 0 || ih >= H) continue;
                    for (long ow = 0; ow < wo; ++ow) {
                        const long iw = ow * stride - pad + j;
                        if (iw < 0 || iw >= W) continue;
                        base[(c * H + ih) * W + iw] += col(row, oh * wo + ow);
                    }
                }
            }
        }
    }
}

}  // namespace detail

// 2-D convolution, x: N x Ci x H x W, w: Co x Ci x Kh x Kw, zero padding.
template <typename S>
Var<S> conv2d(Var<S> x, Var<S> w, long stride = 1, long pad = 0) {
    check_same_tape("conv2d", x, w);
    detail::check_rank("conv2d", x, 4);
    detail::check_rank("conv2d", w, 4);
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
    const long N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const long Co = w.shape()[0], Ci = w.shape()[1], Kh = w.shape()[2], Kw = w.shape()[3];
    if (Ci != C) shape_fail("conv2d", x.shape(), w.shape());
    const long Ho = (H + 2 * pad - Kh) / stride + 1;
    const long Wo = (W + 2 * pad - Kw) / stride + 1;
    if (Ho < 1 || Wo < 1) shape_fail("conv2d", x.shape(), w.shape());

    Tape<S>& t = *x.tape;
    ArrX<S> out = ArrX<S>::Zero(N * Co * Ho * Wo);
    {
        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> col;
        auto Wm = as_mat(w.value(), Co, Ci * Kh * Kw);
        for (long n = 0; n < N; ++n) {
            detail::im2col(x.value(), n, C, H, W, Kh, Kw, stride, pad, Ho, Wo, col);
            Eigen::Map<MatX<S>> On(out.data() + n * Co * Ho * Wo, Co, Ho * Wo);
            On.noalias() = Wm * col;
        }
    }
    return t.make(
        Shape{N, Co, Ho, Wo}, std::move(out), {x.id, w.id},
        [N, C, H, W, Co, Ci, Kh, Kw, stride, pad, Ho, Wo](Tape<S>& t,
                                                          const typename Tape<S>::Node& nd) {
            const bool want_dx = t.node(nd.parents[0]).requires_grad;
            const bool want_dw = t.node(nd.parents[1]).requires_grad;
            Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> col, dcol;
            auto Wm = as_mat(t.node(nd.parents[1]).value, Co, Ci * Kh * Kw);
            for (long n = 0; n < N; ++n) {
                Eigen::Map<const MatX<S>> Gn(nd.grad.data() + n * Co * Ho * Wo, Co, Ho * Wo);
                if (want_dw) {
                    detail::im2col(t.node(nd.parents[0]).value, n, C, H, W, Kh, Kw, stride, pad,
                                   Ho, Wo, col);
                    auto dW = as_mat(t.node(nd.parents[1]).grad, Co, Ci * Kh * Kw);
                    dW.noalias() += Gn * col.transpose();
                }
                if (want_dx) {
                    dcol.noalias() = Wm.transpose() * Gn;
                    detail::col2im_accum(dcol, n, C, H, W, Kh, Kw, stride, pad, Ho, Wo,
                                         t.node(nd.parents[0]).grad);
                }
            }
        });
}

// Adds a per-channel bias to an N x C x H x W activation.
template <typename S>
Var<S> add_channel_bias(Var<S> x, Var<S> b) {
    check_same_tape("add_channel_bias", x, b);
    detail::check_rank("add_channel_bias", x, 4);
    detail::check_rank("add_channel_bias", b, 1);
    const long N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
    if (b.shape()[0] != C) shape_fail("add_channel_bias", x.shape(), b.shape());
    Tape<S>& t = *x.tape;
    ArrX<S> out = x.value();
    for (long n = 0; n < N; ++n) {
        for (long c = 0; c < C; ++c) {
            out.segment((n * C + c) * HW, HW) += b.value()[c];
        }
    }
    return t.make(x.shape(), std::move(out), {x.id, b.id},
                  [N, C, HW](Tape<S>& t, const typename Tape<S>::Node& nd) {
                      t.accum(nd.parents[0], nd.grad);
                      if (!t.node(nd.parents[1]).requires_grad) return;
                      ArrX<S> db = ArrX<S>::Zero(C);
                      for (long n = 0; n < N; ++n) {
                          for (long c = 0; c < C; ++c) {
                              db[c] += nd.grad.segment((n * C + c) * HW, HW).sum();
                          }
                      }
                      t.accum(nd.parents[1], db);
                  });
}

// Adds a length-D vector to every row of an N x D matrix.
template <typename S>
Var<S> add_row_vector(Var<S> a, Var<S> v) {
    check_same_tape("add_row_vector", a, v);
    detail::check_rank("add_row_vector", a, 2);
    detail::check_rank("add_row_vector", v, 1);
    const long N = a.shape()[0], D = a.shape()[1];
    if (v.shape()[0] != D) shape_fail("add_row_vector", a.shape(), v.shape());
    Tape<S>& t = *a.tape;
    ArrX<S> out = a.value();
    for (long r = 0; r < N; ++r) out.segment(r * D, D) += v.value();
    return t.make(a.shape(), std::move(out), {a.id, v.id},
                  [N, D](Tape<S>& t, const typename Tape<S>::Node& nd) {
                      t.accum(nd.parents[0], nd.grad);
                      if (!t.node(nd.parents[1]).requires_grad) return;
                      ArrX<S> dv = ArrX<S>::Zero(D);
                      for (long r = 0; r < N; ++r) dv += nd.grad.segment(r * D, D);
                      t.accum(nd.parents[1], dv);
                  });
}

// ---- shape and reduction ---------------------------------------------------

// Global average pooling: N x C x H x W -> N x C.
template <typename S>
Var<S> mean_pool_spatial(Var<S> x) {
    detail::check_rank("mean_pool_spatial", x, 4);
    const long N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
    Tape<S>& t = *x.tape;
    ArrX<S> out(N * C);
    for (long i = 0; i < N * C; ++i) {
        out[i] = x.value().segment(i * HW, HW).sum() / static_cast<S>(HW);
    }
    return t.make(Shape{N, C}, std::move(out), {x.id},
                  [N, C, HW](Tape<S>& t, const typename Tape<S>::Node& nd) {
                      if (!t.node(nd.parents[0]).requires_grad) return;
                      ArrX<S> dx(N * C * HW);
                      for (long i = 0; i < N * C; ++i) {
                          dx.segment(i * HW, HW).setConstant(nd.grad[i] / static_cast<S>(HW));
                      }
                      t.accum(nd.parents[0], dx);
                  });
}

// Row-wise L2 normalization of an N x D matrix; eps keeps all-zero rows
// finite.
template <typename S>
Var<S> l2_normalize_rows(Var<S> a, double eps = 1e-12) {
    detail::check_rank("l2_normalize_rows", a, 2);
    const long N = a.shape()[0], D = a.shape()[1];
    Tape<S>& t = *a.tape;
    ArrX<S> out(N * D);
    for (long r = 0; r < N; ++r) {
        const auto row = a.value().segment(r * D, D);
        const S nu = std::sqrt(row.square().sum()) + static_cast<S>(eps);
        out.segment(r * D, D) = row / nu;
    }
    return t.make(a.shape(), std::move(out), {a.id},
                  [N, D, eps](Tape<S>& t, const typename Tape<S>::Node& nd) {
                      if (!t.node(nd.parents[0]).requires_grad) return;
                      const ArrX<S>& x = t.node(nd.parents[0]).value;
                      ArrX<S> dx(N * D);
                      for (long r = 0; r < N; ++r) {
                          const auto xr = x.segment(r * D, D);
                          const auto gr = nd.grad.segment(r * D, D);
                          const S norm = std::sqrt(xr.square().sum());
                          const S nu = norm + static_cast<S>(eps);
                          dx.segment(r * D, D) = gr / nu;
                          if (norm > S(0)) {
                              const S gdotx = (gr * xr).sum();
                              dx.segment(r * D, D) -= xr * (gdotx / (nu * nu * norm));
                          }
                      }
                      t.accum(nd.parents[0], dx);
                  });
}

// Concatenation along the last axis of two rank-2 operands.
template <typename S>
Var<S> concat_cols(Var<S> a, Var<S> b) {
    check_same_tape("concat_cols", a, b);
    detail::check_rank("concat_cols", a, 2);
    detail::check_rank("concat_cols", b, 2);
    const long N = a.shape()[0], Da = a.shape()[1], Db = b.shape()[1];
    if (b.shape()[0] != N) shape_fail("concat_cols", a.shape(), b.shape());
    Tape<S>& t = *a.tape;
    ArrX<S> out(N * (Da + Db));
    for (long r = 0; r < N; ++r) {
        out.segment(r * (Da + Db), Da) = a.value().segment(r * Da, Da);
        out.segment(r * (Da + Db) + Da, Db) = b.value().segment(r * Db, Db);
    }
    return t.make(Shape{N, Da + Db}, std::move(out), {a.id, b.id},
                  [N, Da, Db](Tape<S>& t, const typename Tape<S>::Node& nd) {
                      if (t.node(nd.parents[0]).requires_grad) {
                          ArrX<S> da(N * Da);
                          for (long r = 0; r < N; ++r) {
                              da.segment(r * Da, Da) = nd.grad.segment(r * (Da + Db), Da);
                          }
                          t.accum(nd.parents[0], da);
                      }
                      if (t.node(nd.parents[1]).requires_grad) {
                          ArrX<S> db(N * Db);
                          for (long r = 0; r < N; ++r) {
                              db.segment(r * Db, Db) = nd.grad.segment(r * (Da + Db) + Da, Db);
                          }
                          t.accum(nd.parents[1], db);
                      }
                  });
}

// Row-wise log(sum(exp(.))) of an N x M matrix, max-shifted for stability.
// -inf entries are legal (they contribute nothing); a row of only -inf is an
// error.
template <typename S>
Var<S> log_sum_exp_rows(Var<S> a) {
    detail::check_rank("log_sum_exp_rows", a, 2);
    const long N = a.shape()[0], M = a.shape()[1];
    Tape<S>& t = *a.tape;
    ArrX<S> out(N);
    for (long r = 0; r < N; ++r) {
        const auto row = a.value().segment(r * M, M);
        const S m = row.maxCoeff();
        if (!(m > -std::numeric_limits<S>::infinity())) {
            throw std::domain_error("log_sum_exp_rows: row " + std::to_string(r) +
                                    " has no finite entries");
        }
        S s = S(0);
        for (long j = 0; j < M; ++j) s += std::exp(row[j] - m);
        out[r] = m + std::log(s);
    }
    return t.make(Shape{N}, std::move(out), {a.id},
                  [N, M](Tape<S>& t, const typename Tape<S>::Node& nd) {
                      if (!t.node(nd.parents[0]).requires_grad) return;
                      const ArrX<S>& x = t.node(nd.parents[0]).value;
                      ArrX<S> dx(N * M);
                      for (long r = 0; r < N; ++r) {
                          for (long j = 0; j < M; ++j) {
                              const S w = std::exp(x[r * M + j] - nd.value[r]);
                              dx[r * M + j] = nd.grad[r] * w;
                          }
                      }
                      t.accum(nd.parents[0], dx);
                  });
}

// Row sums of an N x M matrix -> length-N vector.
template <typename S>
Var<S> row_sum(Var<S> a) {
    detail::check_rank("row_sum", a, 2);
    const long N = a.shape()[0], M = a.shape()[1];
    Tape<S>& t = *a.tape;
    ArrX<S> out(N);
    for (long r = 0; r < N; ++r) out[r] = a.value().segment(r * M, M).sum();
    return t.make(Shape{N}, std::move(out), {a.id},
                  [N, M](Tape<S>& t, const typename Tape<S>::Node& nd) {
                      if (!t.node(nd.parents[0]).requires_grad) return;
                      ArrX<S> dx(N * M);
                      for (long r = 0; r < N; ++r) dx.segment(r * M, M).setConstant(nd.grad[r]);
                      t.accum(nd.parents[0], dx);
                  });
}

// Full reduction to a scalar.
template <typename S>
Var<S> sum(Var<S> a) {
    Tape<S>& t = *a.tape;
    ArrX<S> out(1);
    out[0] = a.value().sum();
    return t.make(Shape{}, std::move(out), {a.id},
                  [](Tape<S>& t, const typename Tape<S>::Node& nd) {
                      const long n = t.node(nd.parents[0]).value.size();
                      t.accum(nd.parents[0], ArrX<S>(ArrX<S>::Constant(n, nd.grad[0])));
                  });
}

template <typename S>
Var<S> mean(Var<S> a) {
    return scale(sum(a), S(1) / static_cast<S>(a.value().size()));
}

}  // namespace ctex
