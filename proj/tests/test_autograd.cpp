#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctex/gradcheck.hpp"
#include "ctex/ops.hpp"

using namespace ctex;

namespace {

Var<double> leaf_of(Tape<double>& t, std::initializer_list<double> vals, Shape shape,
                    bool rg = true) {
    ArrX<double> v(static_cast<long>(vals.size()));
    long i = 0;
    for (double x : vals) v[i++] = x;
    return t.leaf(std::move(v), std::move(shape), rg);
}

}  // namespace

TEST_CASE("sigmoid value and derivative at zero") {
    Tape<double> t;
    Var<double> x = leaf_of(t, {0.0}, Shape{1});
    Var<double> s = sigmoid(x);
    CHECK(s.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
    t.backward(sum(s));
    CHECK(t.grad(x)[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("relu gates its gradient") {
    Tape<double> t;
    Var<double> x = leaf_of(t, {-1.0, 1.0}, Shape{2});
    t.backward(sum(relu(x)));
    CHECK(t.grad(x)[0] == 0.0);
    CHECK(t.grad(x)[1] == 1.0);
}

TEST_CASE("conv2d with a 1x1 ones kernel is the per-channel identity") {
    Tape<double> t;
    Rng rng(3);
    ArrX<double> x(2 * 1 * 3 * 3);
    for (long i = 0; i < x.size(); ++i) x[i] = rng.normal();
    Var<double> xin = t.leaf(x, Shape{2, 1, 3, 3}, false);
    Var<double> w = leaf_of(t, {1.0}, Shape{1, 1, 1, 1}, false);
    Var<double> y = conv2d(xin, w, 1, 0);
    CHECK(y.shape() == Shape{2, 1, 3, 3});
    CHECK((y.value() == x).all());
}

TEST_CASE("backward of sum gives ones; backward of half square gives x") {
    Tape<double> t;
    Var<double> x = leaf_of(t, {0.3, -1.2, 2.5, 0.0}, Shape{4});
    t.backward(sum(x));
    CHECK((t.grad(x) == 1.0).all());

    Tape<double> t2;
    Var<double> y = leaf_of(t2, {0.3, -1.2, 2.5, 0.7}, Shape{4});
    t2.backward(scale(sum(mul(y, y)), 0.5));
    CHECK((t2.grad(y) - y.value()).abs().maxCoeff() < 1e-15);
}

TEST_CASE("backward requires a scalar loss and zeroes disconnected leaves") {
    Tape<double> t;
    Var<double> x = leaf_of(t, {1.0, 2.0}, Shape{2});
    Var<double> unused = leaf_of(t, {5.0}, Shape{1});
    CHECK_THROWS_AS(t.backward(x), ShapeError);
    t.backward(sum(x));
    CHECK((t.grad(unused) == 0.0).all());
}

TEST_CASE("shape mismatches name the op and both shapes") {
    Tape<double> t;
    Var<double> a = leaf_of(t, {1, 2, 3, 4, 5, 6}, Shape{2, 3});
    Var<double> b = leaf_of(t, {1, 2, 3, 4}, Shape{2, 2});
    try {
        (void)add(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("add") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[2,2]") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    CHECK_THROWS_AS(mean_pool_spatial(a), ShapeError);
}

TEST_CASE("forward pass is bit-deterministic") {
    auto run = [] {
        Tape<double> t;
        Rng rng(99);
        ArrX<double> x(20), w(15);
        for (long i = 0; i < 20; ++i) x[i] = rng.normal();
        for (long i = 0; i < 15; ++i) w[i] = rng.normal();
        Var<double> xv = t.leaf(x, Shape{4, 5}, false);
        Var<double> wv = t.leaf(w, Shape{3, 5}, false);
        return sum(sigmoid(matmul(xv, wv, false, true))).value()[0];
    };
    CHECK(run() == run());
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(5);
    ArrX<double> x0(6);
    for (long i = 0; i < 6; ++i) x0[i] = rng.normal();
    auto grad_of = [&](double a, double b) {
        Tape<double> t;
        Var<double> x = t.leaf(x0, Shape{2, 3}, true);
        Var<double> f = sum(mul(x, x));
        Var<double> g = sum(sigmoid(x));
        t.backward(add(scale(f, a), scale(g, b)));
        return ArrX<double>(t.grad(x));
    };
    const ArrX<double> gf = grad_of(1.0, 0.0);
    const ArrX<double> gg = grad_of(0.0, 1.0);
    const ArrX<double> mix = grad_of(2.5, -1.25);
    CHECK((mix - (2.5 * gf - 1.25 * gg)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("grad_check on an exact quadratic is tight") {
    Rng rng(7);
    ArrX<double> x(8);
    for (long i = 0; i < 8; ++i) x[i] = rng.normal();
    const double err = grad_check<double>(
        [](Tape<double>&, const std::vector<Var<double>>& v) { return sum(mul(v[0], v[0])); },
        {{Shape{8}, x}}, 1e-5);
    CHECK(err < 1e-8);
}

TEST_CASE("every primitive passes grad_check below 1e-5") {
    for (const auto& check : primitive_grad_check_battery<double>()) {
        INFO(check.name);
        CHECK(check.max_rel_err < 1e-5);
    }
}

TEST_CASE("three-layer MLP matches central finite differences") {
    Rng rng(11);
    auto randn = [&](long n) {
        ArrX<double> v(n);
        for (long i = 0; i < n; ++i) v[i] = rng.normal();
        return v;
    };
    // x: 4x5, W1: 6x5, W2: 4x6, W3: 1x4
    const double err = grad_check<double>(
        [](Tape<double>&, const std::vector<Var<double>>& v) {
            Var<double> h1 = sigmoid(matmul(v[0], v[1], false, true));
            Var<double> h2 = relu(add_scalar(matmul(h1, v[2], false, true), 0.05));
            Var<double> out = matmul(h2, v[3], false, true);
            return mean(mul(out, out));
        },
        {{Shape{4, 5}, randn(20)},
         {Shape{6, 5}, randn(30)},
         {Shape{4, 6}, randn(24)},
         {Shape{1, 4}, randn(4)}},
        1e-5);
    CHECK(err < 1e-5);
}

TEST_CASE("log_sum_exp_rows tolerates -inf entries and rejects empty rows") {
    Tape<double> t;
    const double inf = std::numeric_limits<double>::infinity();
    Var<double> a = leaf_of(t, {-inf, 0.0, 0.0, -inf, -inf, 1.0}, Shape{2, 3}, false);
    Var<double> l = log_sum_exp_rows(a);
    CHECK(l.value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(l.value()[1] == doctest::Approx(1.0).epsilon(1e-12));
    Var<double> bad = leaf_of(t, {-inf, -inf}, Shape{1, 2}, false);
    CHECK_THROWS_AS(log_sum_exp_rows(bad), std::domain_error);
}
