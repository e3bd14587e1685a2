#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace l1zo {

/// Identifies one reproducible random stream. The pair (worker, round) is
/// the federated addressing scheme; Monte Carlo code reuses the two slots as
/// (domain tag, chunk index).
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t worker = 0;
    std::uint64_t round = 0;

    friend bool operator==(const RngStream&, const RngStream&) = default;
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: output i of a stream is mix64(key + (i+1)*golden),
/// where the key is a hash of (seed, worker, round). Draws depend only on the
/// stream identity and the draw index, never on scheduling.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(const RngStream& s)
        : state_(detail::mix64(detail::mix64(detail::mix64(s.seed ^ 0x5851F42D4C957F2DULL) ^
                                             (s.worker * detail::kGolden + 0x632BE59BD9B4E019ULL)) ^
                               (s.round * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

    /// Uniform on the open interval (0, 1); never returns 0 or 1.
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via the Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0, v = 0.0, s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double k = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * k;
        has_spare_ = true;
        return u * k;
    }

    /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = 0.0, v = 0.0;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Child stream k of a stream; used to give Monte Carlo chunks and
/// replications disjoint draws.
inline RngStream substream(const RngStream& parent, std::uint64_t k) {
    const std::uint64_t key = detail::mix64(parent.seed + detail::mix64(parent.worker + 1) +
                                            3 * detail::mix64(parent.round + 2));
    return RngStream{key, 0xC4A2ULL, k};
}

}  // namespace l1zo
