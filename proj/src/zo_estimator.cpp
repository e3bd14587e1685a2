#include "l1zo/zo_estimator.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "moments.hpp"

namespace l1zo {

std::pair<Vec, Vec> two_point_queries(std::span<const double> x, double h, const L1Direction& zeta) {
    if (!(h > 0.0)) throw std::invalid_argument("two_point_queries: h must be > 0");
    require_same_size(x, zeta.coords(), "two_point_queries");
    Vec plus(x.size()), minus(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        plus[i] = x[i] + h * zeta[i];
        minus[i] = x[i] - h * zeta[i];
    }
    return {std::move(plus), std::move(minus)};
}

namespace {

// Shared by grad_estimate and decode_message so both round identically.
Vec scaled_signs(std::size_t d, double h, double delta, auto&& positive) {
    const double scale = static_cast<double>(d) / (2.0 * h) * delta;
    Vec g(d);
    for (std::size_t i = 0; i < d; ++i) g[i] = positive(i) ? scale : -scale;
    return g;
}

}  // namespace

GradEstimate grad_estimate(std::size_t d, double h, double y, double y_prime, const L1Direction& zeta) {
    if (!(h > 0.0)) throw std::invalid_argument("grad_estimate: h must be > 0");
    if (zeta.dim() != d) throw std::invalid_argument("grad_estimate: zeta has the wrong dimension");
    return {scaled_signs(d, h, y - y_prime, [&](std::size_t i) { return zeta[i] >= 0.0; })};
}

WorkerMessage encode_message(double y, double y_prime, const L1Direction& zeta) {
    WorkerMessage msg;
    msg.delta = y - y_prime;
    msg.dim = zeta.dim();
    msg.signs.assign((msg.dim + 7) / 8, 0);
    for (std::size_t i = 0; i < msg.dim; ++i) {
        if (zeta[i] >= 0.0) msg.signs[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
    }
    return msg;
}

GradEstimate decode_message(const WorkerMessage& msg, std::size_t d, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("decode_message: h must be > 0");
    if (msg.dim != d || msg.signs.size() != (d + 7) / 8) {
        throw std::invalid_argument("decode_message: message carries " + std::to_string(msg.dim) +
                                    " sign bits, expected " + std::to_string(d));
    }
    return {scaled_signs(d, h, msg.delta, [&](std::size_t i) { return msg.sign_bit(i); })};
}

std::vector<std::uint8_t> serialize(const WorkerMessage& msg) {
    std::vector<std::uint8_t> out(message_bytes(msg.dim));
    const auto bits = std::bit_cast<std::uint64_t>(msg.delta);
    for (int b = 0; b < 8; ++b) out[b] = static_cast<std::uint8_t>(bits >> (8 * b));
    std::memcpy(out.data() + 8, msg.signs.data(), msg.signs.size());
    return out;
}

WorkerMessage deserialize(std::span<const std::uint8_t> bytes, std::size_t d) {
    if (bytes.size() != message_bytes(d)) {
        throw std::invalid_argument("deserialize: expected " + std::to_string(message_bytes(d)) + " bytes, got " +
                                    std::to_string(bytes.size()));
    }
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    WorkerMessage msg;
    msg.delta = std::bit_cast<double>(bits);
    msg.dim = d;
    msg.signs.assign(bytes.begin() + 8, bytes.end());
    return msg;
}

SmoothedOracle::SmoothedOracle(const Problem& p, double h_, std::size_t n, bool use_contexts, unsigned thread_count)
    : problem(&p), h(h_), samples(n), contexts(use_contexts), threads(thread_count) {
    if (!(h > 0.0)) throw std::invalid_argument("SmoothedOracle: h must be > 0");
    if (samples == 0) throw std::invalid_argument("SmoothedOracle: need at least one sample");
}


using detail::chunked_moments;
using detail::Moments;

McValue smoothed_value_mc(const SmoothedOracle& oracle, std::span<const double> x, const RngStream& stream) {
    const Problem& p = *oracle.problem;
    const std::size_t d = p.dim();
    if (x.size() != d) throw std::invalid_argument("smoothed_value_mc: dimension mismatch");
    const Vec zero(d, 0.0);
    Moments m = chunked_moments(oracle.samples, 1, oracle.threads, stream, [&](Rng& rng, Vec& out) {
        Vec u = sample_l1_ball(d, rng);
        for (std::size_t i = 0; i < d; ++i) u[i] = x[i] + oracle.h * u[i];
        if (oracle.contexts) {
            const Vec c = p.sample_context(rng);
            out[0] = p.eval_context(c, u);
        } else {
            out[0] = p.population_value(u);
        }
    });
    return {m.mean[0], m.std_error()[0]};
}

GradEstimate sample_grad_estimate(const Problem& p, std::span<const double> x, double h, Rng& rng) {
    const L1Direction zeta = sample_l1_sphere(p.dim(), rng);
    const Vec c = p.sample_context(rng);
    const auto [plus, minus] = two_point_queries(x, h, zeta);
    return grad_estimate(p.dim(), h, p.eval_context(c, plus), p.eval_context(c, minus), zeta);
}

McVector smoothed_grad_mc(const SmoothedOracle& oracle, std::span<const double> x, const RngStream& stream) {
    const Problem& p = *oracle.problem;
    const std::size_t d = p.dim();
    if (x.size() != d) throw std::invalid_argument("smoothed_grad_mc: dimension mismatch");
    Moments m = chunked_moments(oracle.samples, d, oracle.threads, stream, [&](Rng& rng, Vec& out) {
        if (oracle.contexts) {
            out = sample_grad_estimate(p, x, oracle.h, rng).vector;
            return;
        }
        const L1Direction zeta = sample_l1_sphere(d, rng);
        const auto [plus, minus] = two_point_queries(x, oracle.h, zeta);
        out = grad_estimate(d, oracle.h, p.population_value(plus), p.population_value(minus), zeta).vector;
    });
    return {m.mean, m.std_error()};
}

}  // namespace l1zo
