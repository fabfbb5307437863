#include "ctex/dynamics.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ctex/rng.hpp"

namespace ctex {

namespace {

constexpr double kDomainTol = 1e-12;
constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void throw_domain(double x) {
    throw std::domain_error("map_step: input " + std::to_string(x) +
                            " outside [0,1] beyond tolerance 1e-12");
}

}  // namespace

std::string to_string(MapKind kind) {
    switch (kind) {
        case MapKind::Logistic: return "logistic";
        case MapKind::Tent: return "tent";
        case MapKind::Sine: return "sine";
    }
    return "?";
}

MapKind map_kind_from_string(const std::string& name) {
    if (name == "logistic") return MapKind::Logistic;
    if (name == "tent") return MapKind::Tent;
    if (name == "sine") return MapKind::Sine;
    throw std::invalid_argument("unknown chaotic map '" + name +
                                "' (expected logistic|tent|sine)");
}

ChaoticMapSpec ChaoticMapSpec::defaults(MapKind kind) {
    switch (kind) {
        case MapKind::Logistic: return logistic();
        case MapKind::Tent: return tent();
        case MapKind::Sine: return sine();
    }
    return logistic();
}

void ChaoticMapSpec::validate() const {
    const double hi = (kind == MapKind::Tent) ? 2.0 : (kind == MapKind::Sine ? 1.0 : 4.0);
    if (!(param > 0.0) || !(param <= hi)) {
        throw std::invalid_argument("ChaoticMapSpec: parameter " + std::to_string(param) +
                                    " out of range (0, " + std::to_string(hi) + "] for " +
                                    to_string(kind) + " map");
    }
}

double map_step(const ChaoticMapSpec& spec, double x) {
    spec.validate();
    if (x < -kDomainTol || x > 1.0 + kDomainTol) throw_domain(x);
    if (x < 0.0) x = 0.0;
    if (x > 1.0) x = 1.0;

    double y = 0.0;
    switch (spec.kind) {
        case MapKind::Logistic: y = spec.param * x * (1.0 - x); break;
        case MapKind::Tent: y = (x < 0.5) ? spec.param * x : spec.param * (1.0 - x); break;
        case MapKind::Sine: y = spec.param * std::sin(kPi * x); break;
    }
    if (y < 0.0 || y > 1.0) {
        if (y < -kDomainTol || y > 1.0 + kDomainTol) {
            throw std::logic_error("map_step: " + to_string(spec.kind) + " map left [0,1] by " +
                                   std::to_string(y < 0.0 ? -y : y - 1.0));
        }
        y = (y < 0.0) ? 0.0 : 1.0;
    }
    return y;
}

double iterate(const ChaoticMapSpec& spec, double x0, long k) {
    if (k < 0) throw std::invalid_argument("iterate: k must be >= 0");
    double x = x0;
    for (long i = 0; i < k; ++i) x = map_step(spec, x);
    return x;
}

double map_derivative(const ChaoticMapSpec& spec, double x) {
    switch (spec.kind) {
        case MapKind::Logistic: return spec.param * (1.0 - 2.0 * x);
        case MapKind::Tent: return (x < 0.5) ? spec.param : -spec.param;
        case MapKind::Sine: return spec.param * kPi * std::cos(kPi * x);
    }
    return 0.0;
}

double lyapunov_estimate(const ChaoticMapSpec& spec, double x0, long n_iter, long burn_in) {
    spec.validate();
    if (n_iter < 10000) throw std::invalid_argument("lyapunov_estimate: n_iter must be >= 10^4");
    if (burn_in < 0) throw std::invalid_argument("lyapunov_estimate: burn_in must be >= 0");
    if (!(x0 > 0.0) || !(x0 < 1.0)) {
        throw std::invalid_argument("lyapunov_estimate: x0 must lie in (0,1)");
    }

    double x = x0;
    for (long i = 0; i < burn_in; ++i) x = map_step(spec, x);

    double sum = 0.0;
    long count = 0;
    long zero_hits = 0;
    for (long i = 0; i < n_iter; ++i) {
        const bool tent_kink = (spec.kind == MapKind::Tent && x == 0.5);
        if (!tent_kink) {
            const double d = std::fabs(map_derivative(spec, x));
            // A collapsed orbit (superstable fixed point) pins |f'| at
            // round-off scale on every step; a chaotic orbit lands below
            // 1e-13 with probability ~1e-13 per step.
            if (d < 1e-13 && ++zero_hits > 16) {
                throw std::runtime_error(
                    "lyapunov_estimate: degenerate orbit (repeated zero-derivative samples)");
            }
            if (d > 0.0) {
                sum += std::log(d);
                ++count;
            }
        }
        x = map_step(spec, x);
    }
    if (count == 0) throw std::runtime_error("lyapunov_estimate: no usable samples");
    return sum / static_cast<double>(count);
}

namespace {

// Exact mu = 2 tent dynamics as a lazy automaton over the binary expansion
// 0.b1 b2 b3 ...:  b1 = 0 drops the leading bit, b1 = 1 drops it and
// complements the rest. Tracking a cursor plus a complement flag gives O(1)
// steps; a sample is the 53-bit window at the cursor.
class TentBitOrbit {
public:
    TentBitOrbit(double x0, long total_steps) {
        const long nbits = total_steps + 64;
        bits_.assign(static_cast<std::size_t>((nbits + 63) / 64), 0);
        // First 53 bits come from x0 itself; the pseudo-random tail extends
        // x0 to a high-entropy initial condition standing in for a generic
        // (non-dyadic) point of the interval.
        std::uint64_t frac = 0;
        double x = x0;
        for (int i = 0; i < 53; ++i) {
            x *= 2.0;
            const int b = (x >= 1.0) ? 1 : 0;
            if (b) x -= 1.0;
            frac = (frac << 1) | static_cast<std::uint64_t>(b);
        }
        for (int i = 0; i < 53; ++i) set_bit(i, (frac >> (52 - i)) & 1u);
        std::uint64_t s = mix64(0x7c743a1e29d4621bULL ^ frac);
        for (long i = 53; i < nbits; ++i) {
            s = mix64(s);
            set_bit(i, s & 1u);
        }
        cursor_ = 0;
        flipped_ = false;
    }

    double sample() const {
        std::uint64_t m = 0;
        for (int i = 0; i < 53; ++i) m = (m << 1) | bit(cursor_ + i);
        return static_cast<double>(m) * 0x1.0p-53;
    }

    void step() {
        if (bit(cursor_)) flipped_ = !flipped_;
        ++cursor_;
    }

private:
    unsigned bit(long i) const {
        const unsigned raw =
            (bits_[static_cast<std::size_t>(i >> 6)] >> (i & 63)) & 1u;
        return raw ^ static_cast<unsigned>(flipped_);
    }
    void set_bit(long i, unsigned v) {
        if (v) bits_[static_cast<std::size_t>(i >> 6)] |= (std::uint64_t{1} << (i & 63));
    }

    std::vector<std::uint64_t> bits_;
    long cursor_ = 0;
    bool flipped_ = false;
};

}  // namespace

Eigen::ArrayXd invariant_density(const ChaoticMapSpec& spec, double x0, long n_iter,
                                 int bins, long burn_in) {
    spec.validate();
    if (n_iter < 1) throw std::invalid_argument("invariant_density: n_iter must be >= 1");
    if (bins < 10) throw std::invalid_argument("invariant_density: bins must be >= 10");
    if (burn_in < 0) throw std::invalid_argument("invariant_density: burn_in must be >= 0");
    if (x0 < 0.0 || x0 > 1.0) throw std::domain_error("invariant_density: x0 outside [0,1]");

    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    auto record = [&](double v) {
        long b = static_cast<long>(v * bins);
        if (b >= bins) b = bins - 1;
        if (b < 0) b = 0;
        ++counts[static_cast<std::size_t>(b)];
    };

    // 0 is fixed and 1 falls onto it in one step; both orbits are exact in
    // doubles, so only generic starting points need the bit automaton.
    if (spec.kind == MapKind::Tent && spec.param == 2.0 && x0 != 0.0 && x0 != 1.0) {
        TentBitOrbit orbit(x0, burn_in + n_iter);
        for (long i = 0; i < burn_in; ++i) orbit.step();
        for (long i = 0; i < n_iter; ++i) {
            record(orbit.sample());
            orbit.step();
        }
    } else {
        double x = x0;
        for (long i = 0; i < burn_in; ++i) x = map_step(spec, x);
        for (long i = 0; i < n_iter; ++i) {
            record(x);
            x = map_step(spec, x);
        }
    }

    Eigen::ArrayXd density(bins);
    for (int b = 0; b < bins; ++b) {
        density[b] = static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                     static_cast<double>(n_iter);
    }
    return density;
}

OrbitStats orbit_stats(const ChaoticMapSpec& spec, double x0, long n_iter, int bins,
                       long burn_in) {
    OrbitStats stats;
    stats.lyapunov = lyapunov_estimate(spec, x0, n_iter, burn_in);
    stats.density = invariant_density(spec, x0, n_iter, bins, burn_in);
    stats.n_samples = n_iter;
    stats.burn_in = burn_in;
    return stats;
}

}  // namespace ctex
