#pragma once

#include <limits>
#include <vector>

#include "ctex/ops.hpp"

namespace ctex {

// NT-Xent contrastive loss over a 2N x D embedding batch whose rows are
// ordered so that (2t, 2t+1) is the positive pair of sample t. Rows are
// L2-normalized internally, similarities are cosine, and the per-anchor
// denominator runs over all other rows. The result is the mean over all 2N
// anchors, computed with log-sum-exp stabilization.
template <typename S>
Var<S> nt_xent(Tape<S>& tape, Var<S> z, double temperature) {
    if (temperature <= 0.0) throw std::invalid_argument("nt_xent: temperature must be > 0");
    if (z.shape().size() != 2) shape_fail("nt_xent", z.shape());
    const long rows = z.shape()[0];
    if (rows < 2 || rows % 2 != 0) {
        throw std::invalid_argument("nt_xent: need an even number of rows >= 2, got " +
                                    std::to_string(rows));
    }

    Var<S> zn = l2_normalize_rows(z);
    Var<S> sim = scale(matmul(zn, zn, false, true), static_cast<S>(1.0 / temperature));

    // Mask the self-similarity diagonal out of the denominator.
    ArrX<S> diag = ArrX<S>::Zero(rows * rows);
    ArrX<S> pair = ArrX<S>::Zero(rows * rows);
    for (long i = 0; i < rows; ++i) {
        diag[i * rows + i] = -std::numeric_limits<S>::infinity();
        pair[i * rows + (i ^ 1)] = S(1);
    }
    Var<S> masked = add(sim, tape.constant(std::move(diag), Shape{rows, rows}));
    Var<S> denom = log_sum_exp_rows(masked);
    // Positive similarity of each anchor, selected by the pair mask.
    Var<S> pos = row_sum(mul(sim, tape.constant(std::move(pair), Shape{rows, rows})));
    return mean(sub(denom, pos));
}

// Mean softmax cross-entropy of logits (N x K) against integer labels.
template <typename S>
Var<S> softmax_cross_entropy(Tape<S>& tape, Var<S> logits, const std::vector<int>& labels) {
    if (logits.shape().size() != 2) shape_fail("softmax_cross_entropy", logits.shape());
    const long N = logits.shape()[0], K = logits.shape()[1];
    if (static_cast<long>(labels.size()) != N) {
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(N) + " rows");
    }
    ArrX<S> onehot = ArrX<S>::Zero(N * K);
    for (long i = 0; i < N; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= K) {
            throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) +
                                    " out of range [0," + std::to_string(K) + ")");
        }
        onehot[i * K + y] = S(1);
    }
    Var<S> lse = log_sum_exp_rows(logits);
    Var<S> picked = row_sum(mul(logits, tape.constant(std::move(onehot), Shape{N, K})));
    return mean(sub(lse, picked));
}

}  // namespace ctex
