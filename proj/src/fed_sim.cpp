#include "l1zo/fed_sim.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "l1zo/parallel.hpp"

namespace l1zo {

namespace {

Vec broadcast(const Vec& v, std::size_t d, const char* field) {
    if (v.size() == d) return v;
    if (v.size() == 1) return Vec(d, v[0]);
    throw std::invalid_argument(std::string(field) + ": expected 1 or " + std::to_string(d) + " values, got " +
                                std::to_string(v.size()));
}

}  // namespace

FeasibleSet make_set(const SetSpec& spec, std::size_t d) {
    switch (spec.kind) {
        case SetKind::Box: return FeasibleSet::box(broadcast(spec.lower, d, "set.lower"), broadcast(spec.upper, d, "set.upper"));
        case SetKind::EuclideanBall:
            return FeasibleSet::euclidean_ball(spec.center.empty() ? Vec(d, 0.0) : broadcast(spec.center, d, "set.center"),
                                               spec.radius);
        case SetKind::L1Ball:
            return FeasibleSet::l1_ball(spec.center.empty() ? Vec(d, 0.0) : broadcast(spec.center, d, "set.center"),
                                        spec.radius);
    }
    throw std::invalid_argument("set.kind: unsupported");
}

void validate(const RunConfig& cfg) {
    if (cfg.n < 1) throw std::invalid_argument("n: must be >= 1");
    if (cfg.m < 1) throw std::invalid_argument("m: must be >= 1");
    if (cfg.d < 1) throw std::invalid_argument("d: must be >= 1");
    if (!(cfg.h > 0.0) || !std::isfinite(cfg.h)) throw std::invalid_argument("h: must be > 0");
    // eta == 0 is accepted as the degenerate no-movement run.
    if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta)) throw std::invalid_argument("eta: must be >= 0 and finite (got " + std::to_string(cfg.eta) + ")");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw std::invalid_argument("delta: must lie in (0, 1)");
    if (cfg.problem.d != cfg.d) throw std::invalid_argument("problem.d: must equal d");
    const FeasibleSet set = make_set(cfg.set, cfg.d);
    if (!cfg.x1.empty()) {
        if (cfg.x1.size() != cfg.d) throw std::invalid_argument("x1: must have length d");
        if (!set.contains(cfg.x1)) throw std::invalid_argument("x1: initial point is outside the feasible set");
    }
}

void summarize(RunTrace& trace) {
    const std::size_t d = trace.config.d;
    trace.cumulative_regret = 0.0;
    trace.total_bytes = 0;
    trace.average_iterate.assign(d, 0.0);
    for (const auto& r : trace.rounds) {
        trace.cumulative_regret += r.regret;
        trace.total_bytes += r.bytes_per_worker * trace.config.m;
        for (std::size_t i = 0; i < d; ++i) trace.average_iterate[i] += r.x[i];
    }
    const double n = static_cast<double>(trace.rounds.size());
    trace.average_regret = n > 0 ? trace.cumulative_regret / n : 0.0;
    if (n > 0) {
        for (auto& v : trace.average_iterate) v /= n;
        trace.last_iterate_regret = trace.rounds.back().regret;
    }
}

RunTrace run_federated(const RunConfig& cfg) {
    validate(cfg);
    const Problem problem(cfg.problem);
    const FeasibleSet set = make_set(cfg.set, cfg.d);
    const Minimum best = minimizer(problem, set);
    const std::size_t d = cfg.d;

    RunTrace trace;
    trace.config = cfg;
    trace.x_star = best.x;
    trace.f_star = best.value;
    trace.lipschitz = problem.lipschitz();
    trace.diameter = set.diameter();
    trace.rounds.reserve(cfg.n);

    Vec x = cfg.x1.empty() ? set.center() : cfg.x1;
    std::vector<WorkerMessage> inbox(cfg.m);
    for (std::size_t t = 1; t <= cfg.n; ++t) {
        parallel_for(cfg.m, cfg.threads, [&](std::size_t j) {
            Rng rng(RngStream{cfg.seed, j, t});
            const L1Direction zeta = sample_l1_sphere(d, rng);
            const Vec c = problem.sample_context(rng);
            const auto [plus, minus] = two_point_queries(x, cfg.h, zeta);
            const double y = problem.eval_context(c, plus);
            const double y_prime = problem.eval_context(c, minus);
            if (!std::isfinite(y) || !std::isfinite(y_prime)) {
                std::ostringstream os;
                os << "non-finite function value at round " << t << ", worker " << j << " (y = " << y
                   << ", y' = " << y_prime << ")";
                throw std::runtime_error(os.str());
            }
            inbox[j] = encode_message(y, y_prime, zeta);
        });

        Vec g(d, 0.0);
        for (const auto& msg : inbox) {
            const GradEstimate gj = decode_message(msg, d, cfg.h);
            for (std::size_t i = 0; i < d; ++i) g[i] += gj.vector[i];
        }
        for (auto& v : g) v /= static_cast<double>(cfg.m);

        RoundRecord rec;
        rec.t = t;
        rec.x = x;
        rec.bytes_per_worker = message_bytes(d);
        rec.f_x = problem.population_value(x);
        rec.regret = rec.f_x - trace.f_star;
        rec.g_norm_sq = norm2_sq(g);

        Vec step(d);
        for (std::size_t i = 0; i < d; ++i) step[i] = x[i] - cfg.eta * g[i];
        x = project(set, step);
        rec.g = std::move(g);
        trace.rounds.push_back(std::move(rec));
    }
    summarize(trace);
    trace.average_iterate_regret = problem.population_value(trace.average_iterate) - trace.f_star;
    return trace;
}

Hyperparams default_hyperparams(double L, double D, std::size_t d, std::size_t n, std::size_t m) {
    if (!(L > 0.0) || !(D > 0.0) || d == 0 || n == 0 || m == 0) {
        throw std::invalid_argument("default_hyperparams: all inputs must be positive");
    }
    const double dd = static_cast<double>(d), nn = static_cast<double>(n), mm = static_cast<double>(m);
    return {std::sqrt((dd + 1.0) / nn) / L, std::sqrt(mm / (nn * dd)) / L};
}

double deviation_log_factor(std::size_t n, std::size_t m) {
    return 2.0 * std::log(1.0 + 211.0 * static_cast<double>(n) * static_cast<double>(m));
}

RegretBound regret_bound_terms(const RunConfig& cfg, double L, double D) {
    const double n = static_cast<double>(cfg.n), m = static_cast<double>(cfg.m), d = static_cast<double>(cfg.d);
    const double eta = cfg.eta, h = cfg.h, delta = cfg.delta;
    const double log4n = std::log(4.0 * n / delta);
    const double log2l1 = std::log(2.0 * deviation_log_factor(cfg.n, cfg.m) / delta);

    RegretBound b;
    b.stability = eta > 0.0 ? D * D / (2.0 * eta) : std::numeric_limits<double>::infinity();
    b.bias_step = (2.0 * L * h / std::sqrt(d + 1.0) + L * L * eta) * n;
    b.variance = eta * n * kVarianceC1 * L * L * d * ((log4n / m) * (log4n / m) + kVarianceC2 / m * log4n);
    b.deviation = 4.0 * D * L * std::sqrt(d) * (std::sqrt(211.0 / (n * m) * log2l1) + 19811.0 / m * log2l1);
    b.total = b.stability + b.bias_step + b.variance + b.deviation;
    return b;
}

double theoretical_regret_bound(const RunConfig& cfg, double L, double D) { return regret_bound_terms(cfg, L, D).total; }

Budgets deviation_and_variance_budgets(const RunConfig& cfg, double L, double D) {
    const double n = static_cast<double>(cfg.n), m = static_cast<double>(cfg.m), d = static_cast<double>(cfg.d);
    const double delta = cfg.delta;
    const double log2n = std::log(2.0 * n / delta);
    const double logl1 = std::log(deviation_log_factor(cfg.n, cfg.m) / delta);
    Budgets b;
    b.psi_n = n * kVarianceC1 * L * L * d * (log2n * log2n / (m * m) + kVarianceC2 / m * log2n);
    b.psi_n_prime = 4.0 * D * L * std::sqrt(d) * (std::sqrt(211.0 / (n * m) * logl1) + 19811.0 / (n * m) * logl1);
    return b;
}

Measured measure_deviation(const RunTrace& trace, const SmoothedOracle& oracle, std::span<const double> x_ref,
                           const RngStream& stream) {
    double sum = 0.0, var = 0.0;
    for (const auto& r : trace.rounds) {
        const McVector grad = smoothed_grad_mc(oracle, r.x, substream(stream, r.t));
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            const double lever = r.x[i] - x_ref[i];
            sum += (r.g[i] - grad.estimate[i]) * lever;
            var += lever * lever * grad.std_error[i] * grad.std_error[i];
        }
    }
    return {std::abs(sum), std::sqrt(var)};
}

Measured measure_deviation(const RunTrace& trace, const GradientOracle& grad, std::span<const double> x_ref) {
    double sum = 0.0;
    for (const auto& r : trace.rounds) {
        const Vec gs = grad(r.x);
        for (std::size_t i = 0; i < r.x.size(); ++i) sum += (r.g[i] - gs[i]) * (r.x[i] - x_ref[i]);
    }
    return {std::abs(sum), 0.0};
}

double measure_variance_sum(const RunTrace& trace, const GradientOracle& grad) {
    double sum = 0.0;
    for (const auto& r : trace.rounds) {
        const Vec gs = grad(r.x);
        for (std::size_t i = 0; i < r.x.size(); ++i) sum += (r.g[i] - gs[i]) * (r.g[i] - gs[i]);
    }
    return sum;
}

}  // namespace l1zo
