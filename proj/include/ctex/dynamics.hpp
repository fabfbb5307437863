#pragma once

#include <Eigen/Core>
#include <string>

namespace ctex {

enum class MapKind { Logistic, Tent, Sine };

std::string to_string(MapKind kind);
MapKind map_kind_from_string(const std::string& name);

// One-dimensional map on [0,1] with its control parameter.
struct ChaoticMapSpec {
    MapKind kind = MapKind::Logistic;
    double param = 3.99;

    static ChaoticMapSpec logistic(double r = 3.99) { return {MapKind::Logistic, r}; }
    static ChaoticMapSpec tent(double mu = 2.0) { return {MapKind::Tent, mu}; }
    static ChaoticMapSpec sine(double r = 1.0) { return {MapKind::Sine, r}; }
    static ChaoticMapSpec defaults(MapKind kind);

    // Throws std::invalid_argument when the parameter leaves the range on
    // which the map sends [0,1] into itself.
    void validate() const;
};

// Single application of the map. The input must lie in [0,1] up to a 1e-12
// round-off tolerance; the output is clamped back into [0,1] only when
// floating-point round-off exits the interval by at most 1e-12.
double map_step(const ChaoticMapSpec& spec, double x);

// k-fold composition of map_step; k = 0 returns x0.
double iterate(const ChaoticMapSpec& spec, double x0, long k);

// Analytic derivative of the map at x. The tent map is non-differentiable at
// x = 0.5; callers that sample derivatives must skip that point.
double map_derivative(const ChaoticMapSpec& spec, double x);

// Orbit-average Lyapunov exponent estimate: mean of ln|f'(x_t)| over the
// post-burn-in orbit. Tent samples at exactly x = 0.5 are skipped. Throws
// std::runtime_error when the orbit degenerates (repeated zero-derivative
// samples or an exactly fixed point).
double lyapunov_estimate(const ChaoticMapSpec& spec, double x0, long n_iter,
                         long burn_in = 1000);

// Normalized occupancy histogram of the post-burn-in orbit over `bins`
// equal-width bins of [0,1].
//
// For the exact tent map at mu = 2 every double is a dyadic rational whose
// true orbit reaches the fixed point 0 within ~60 steps, so a naive double
// orbit cannot exhibit the map's uniform invariant density. In that one case
// the histogram is sampled from the exact orbit of an extended initial
// condition: x0's 53 bits followed by a pseudo-random tail derived from x0
// (x0 = 0 and x0 = 1 are exempt: their collapsing orbits are exact as is).
// The mu = 2 tent dynamics reduce to a shift-and-complement automaton on
// that bit string, which is evaluated exactly.
Eigen::ArrayXd invariant_density(const ChaoticMapSpec& spec, double x0, long n_iter,
                                 int bins, long burn_in = 1000);

struct OrbitStats {
    double lyapunov = 0.0;
    Eigen::ArrayXd density;
    long n_samples = 0;
    long burn_in = 0;
};

OrbitStats orbit_stats(const ChaoticMapSpec& spec, double x0, long n_iter, int bins,
                       long burn_in = 1000);

}  // namespace ctex
