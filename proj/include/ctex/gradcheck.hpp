#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ctex/ops.hpp"
#include "ctex/rng.hpp"

namespace ctex {

// A differentiable scalar function of several tensors: given a tape and the
// leaf variables (one per input, in order), build and return the scalar loss.
template <typename S>
using TensorFn = std::function<Var<S>(Tape<S>&, const std::vector<Var<S>>&)>;

template <typename S>
struct GradCheckInput {
    Shape shape;
    ArrX<S> value;
};

// Compares analytic gradients against central finite differences and returns
// the maximum over all coordinates of |analytic - fd| / max(1, |analytic|).
// Inputs should avoid relu kinks and other non-smooth points.
template <typename S>
double grad_check(const TensorFn<S>& f, const std::vector<GradCheckInput<S>>& inputs,
                  double eps = 1e-5) {
    auto eval = [&](const std::vector<ArrX<S>>& values) {
        Tape<S> tape;
        std::vector<Var<S>> leaves;
        leaves.reserve(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            leaves.push_back(tape.leaf(values[i], inputs[i].shape, false));
        }
        return static_cast<double>(f(tape, leaves).value()[0]);
    };

    // Analytic pass.
    Tape<S> tape;
    std::vector<Var<S>> leaves;
    std::vector<ArrX<S>> values;
    for (const auto& in : inputs) {
        values.push_back(in.value);
        leaves.push_back(tape.leaf(in.value, in.shape, true));
    }
    Var<S> loss = f(tape, leaves);
    tape.backward(loss);

    double max_err = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const ArrX<S>& analytic = tape.grad(leaves[i]);
        for (long j = 0; j < values[i].size(); ++j) {
            const S orig = values[i][j];
            values[i][j] = orig + static_cast<S>(eps);
            const double up = eval(values);
            values[i][j] = orig - static_cast<S>(eps);
            const double down = eval(values);
            values[i][j] = orig;
            const double fd = (up - down) / (2.0 * eps);
            const double a = static_cast<double>(analytic[j]);
            const double err = std::abs(a - fd) / std::max(1.0, std::abs(a));
            if (err > max_err) max_err = err;
        }
    }
    return max_err;
}

struct PrimitiveCheck {
    std::string name;
    double max_rel_err;
};

namespace detail {

template <typename S>
ArrX<S> randn(Rng& rng, long n, double scale = 1.0) {
    ArrX<S> v(n);
    for (long i = 0; i < n; ++i) v[i] = static_cast<S>(rng.normal() * scale);
    return v;
}

// Values bounded away from zero, for kinked or singular primitives.
template <typename S>
ArrX<S> rand_offset(Rng& rng, long n) {
    ArrX<S> v(n);
    for (long i = 0; i < n; ++i) {
        const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        v[i] = static_cast<S>(sign * rng.uniform(0.2, 1.5));
    }
    return v;
}

// Scalarizes an output with fixed random weights so every coordinate of the
// Jacobian is exercised.
template <typename S>
Var<S> pin(Tape<S>& tape, Var<S> v, std::uint64_t seed) {
    Rng rng(seed);
    ArrX<S> w = randn<S>(rng, numel(v.shape()));
    return sum(mul(v, tape.constant(std::move(w), v.shape())));
}

}  // namespace detail

// Finite-difference verification of every primitive's VJP on small random
// inputs. Run in 64-bit arithmetic; every entry must come back below 1e-5.
template <typename S>
std::vector<PrimitiveCheck> primitive_grad_check_battery(std::uint64_t seed = 12345,
                                                         double eps = 1e-5) {
    using detail::pin;
    std::vector<PrimitiveCheck> checks;
    Rng rng(seed);
    const std::uint64_t pin_seed = rng.next_u64();

    auto run = [&](const std::string& name, const TensorFn<S>& f,
                   std::vector<GradCheckInput<S>> inputs) {
        checks.push_back({name, grad_check<S>(f, inputs, eps)});
    };

    const Shape m34{3, 4};
    run("add",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, add(v[0], v[1]), pin_seed);
        },
        {{m34, detail::randn<S>(rng, 12)}, {m34, detail::randn<S>(rng, 12)}});
    run("sub",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, sub(v[0], v[1]), pin_seed);
        },
        {{m34, detail::randn<S>(rng, 12)}, {m34, detail::randn<S>(rng, 12)}});
    run("mul",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, mul(v[0], v[1]), pin_seed);
        },
        {{m34, detail::randn<S>(rng, 12)}, {m34, detail::randn<S>(rng, 12)}});
    run("scale",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, scale(v[0], S(-1.7)), pin_seed);
        },
        {{m34, detail::randn<S>(rng, 12)}});
    run("add_scalar",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, add_scalar(v[0], S(0.31)), pin_seed);
        },
        {{m34, detail::randn<S>(rng, 12)}});
    run("relu",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) { return pin(t, relu(v[0]), pin_seed); },
        {{m34, detail::rand_offset<S>(rng, 12)}});
    run("sigmoid",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, sigmoid(v[0]), pin_seed);
        },
        {{m34, detail::randn<S>(rng, 12)}});

    for (const bool ta : {false, true}) {
        for (const bool tb : {false, true}) {
            const Shape sa = ta ? Shape{4, 3} : Shape{3, 4};
            const Shape sb = tb ? Shape{5, 4} : Shape{4, 5};
            run("matmul(" + std::string(ta ? "T" : "N") + (tb ? "T" : "N") + ")",
                [&, ta, tb](Tape<S>& t, const std::vector<Var<S>>& v) {
                    return pin(t, matmul(v[0], v[1], ta, tb), pin_seed);
                },
                {{sa, detail::randn<S>(rng, 12)}, {sb, detail::randn<S>(rng, 20)}});
        }
    }

    run("conv2d(s1p0)",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, conv2d(v[0], v[1], 1, 0), pin_seed);
        },
        {{Shape{2, 2, 5, 5}, detail::randn<S>(rng, 100)},
         {Shape{3, 2, 3, 3}, detail::randn<S>(rng, 54)}});
    run("conv2d(s2p1)",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, conv2d(v[0], v[1], 2, 1), pin_seed);
        },
        {{Shape{2, 2, 5, 5}, detail::randn<S>(rng, 100)},
         {Shape{3, 2, 3, 3}, detail::randn<S>(rng, 54)}});
    run("add_channel_bias",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, add_channel_bias(v[0], v[1]), pin_seed);
        },
        {{Shape{2, 3, 2, 2}, detail::randn<S>(rng, 24)}, {Shape{3}, detail::randn<S>(rng, 3)}});
    run("add_row_vector",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, add_row_vector(v[0], v[1]), pin_seed);
        },
        {{m34, detail::randn<S>(rng, 12)}, {Shape{4}, detail::randn<S>(rng, 4)}});
    run("mean_pool_spatial",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, mean_pool_spatial(v[0]), pin_seed);
        },
        {{Shape{2, 3, 4, 4}, detail::randn<S>(rng, 96)}});
    run("l2_normalize_rows",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, l2_normalize_rows(v[0]), pin_seed);
        },
        {{m34, detail::rand_offset<S>(rng, 12)}});
    run("concat_cols",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, concat_cols(v[0], v[1]), pin_seed);
        },
        {{Shape{3, 2}, detail::randn<S>(rng, 6)}, {Shape{3, 4}, detail::randn<S>(rng, 12)}});
    run("log_sum_exp_rows",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, log_sum_exp_rows(v[0]), pin_seed);
        },
        {{m34, detail::randn<S>(rng, 12)}});
    run("row_sum",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            return pin(t, row_sum(v[0]), pin_seed);
        },
        {{m34, detail::randn<S>(rng, 12)}});
    run("sum",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            (void)t;
            return sum(v[0]);
        },
        {{m34, detail::randn<S>(rng, 12)}});
    run("mean",
        [&](Tape<S>& t, const std::vector<Var<S>>& v) {
            (void)t;
            return mean(mul(v[0], v[0]));
        },
        {{m34, detail::randn<S>(rng, 12)}});

    return checks;
}

}  // namespace ctex
