#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "l1zo/l1_geometry.hpp"
#include "l1zo/objectives.hpp"
#include "l1zo/rng.hpp"
#include "l1zo/vec.hpp"

namespace l1zo {

/// Two-point estimate of the gradient of the smoothed surrogate. For an
/// L-Lipschitz f_c, |g| <= L d^{3/2}.
struct GradEstimate {
    Vec vector;
};

/// What a worker sends: the scalar difference y - y' and one sign bit per
/// coordinate (bit i set iff zeta_i >= 0).
///
/// Binary layout: little-endian IEEE-754 binary64 delta, then ceil(d/8)
/// sign bytes, least significant bit first, coordinate 0 in bit 0 of byte 0.
struct WorkerMessage {
    double delta = 0.0;
    std::size_t dim = 0;
    std::vector<std::uint8_t> signs;

    bool sign_bit(std::size_t i) const { return (signs[i / 8] >> (i % 8)) & 1U; }

    friend bool operator==(const WorkerMessage&, const WorkerMessage&) = default;
};

/// Serialised size of a message for dimension d: 8 + ceil(d/8) bytes.
constexpr std::size_t message_bytes(std::size_t d) { return 8 + (d + 7) / 8; }

/// (x + h zeta, x - h zeta). Throws unless h > 0 and dimensions match.
std::pair<Vec, Vec> two_point_queries(std::span<const double> x, double h, const L1Direction& zeta);

/// (d / 2h) (y - y') sign(zeta).
GradEstimate grad_estimate(std::size_t d, double h, double y, double y_prime, const L1Direction& zeta);

WorkerMessage encode_message(double y, double y_prime, const L1Direction& zeta);

/// Reproduces grad_estimate bit for bit.
GradEstimate decode_message(const WorkerMessage& msg, std::size_t d, double h);

std::vector<std::uint8_t> serialize(const WorkerMessage& msg);
WorkerMessage deserialize(std::span<const std::uint8_t> bytes, std::size_t d);

/// Monte Carlo access to Sigma_h(x) = E f(x + hU), U uniform on the unit l1
/// ball. With contexts enabled every sample also draws a fresh c and uses
/// f_c, which has the same expectation.
struct SmoothedOracle {
    const Problem* problem = nullptr;
    double h = 0.0;
    std::size_t samples = 0;
    bool contexts = true;
    unsigned threads = 1;

    SmoothedOracle(const Problem& p, double h_, std::size_t n, bool use_contexts = true, unsigned thread_count = 1);
};

struct McValue {
    double estimate = 0.0;
    double std_error = 0.0;
};

struct McVector {
    Vec estimate;
    Vec std_error;
};

McValue smoothed_value_mc(const SmoothedOracle& oracle, std::span<const double> x, const RngStream& stream);

/// Mean of two-point estimates with fresh zeta (and c) per sample; estimates
/// grad Sigma_h(x).
McVector smoothed_grad_mc(const SmoothedOracle& oracle, std::span<const double> x, const RngStream& stream);

/// One worker's estimate at x drawing zeta then c from the generator.
GradEstimate sample_grad_estimate(const Problem& p, std::span<const double> x, double h, Rng& rng);

}  // namespace l1zo
