#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "l1zo/l1_geometry.hpp"
#include "l1zo/objectives.hpp"
#include "l1zo/rng.hpp"
#include "l1zo/vec.hpp"
#include "l1zo/zo_estimator.hpp"

namespace l1zo {

/// Feasible-set parameters as they appear in a config. Length-1 bounds and an
/// empty center are broadcast to the run dimension.
struct SetSpec {
    SetKind kind = SetKind::EuclideanBall;
    Vec lower{-1.0};
    Vec upper{1.0};
    Vec center;
    double radius = 1.0;
};

FeasibleSet make_set(const SetSpec& spec, std::size_t d);

struct RunConfig {
    std::size_t n = 1;      ///< rounds
    std::size_t m = 1;      ///< workers
    std::size_t d = 1;
    double h = 0.1;
    double eta = 0.1;
    Vec x1;                 ///< empty: the set's center
    double delta = 0.1;
    std::uint64_t seed = 0;
    ProblemSpec problem;
    SetSpec set;
    unsigned threads = 1;   ///< worker-level parallelism; never changes the trace
};

/// Throws std::invalid_argument naming the offending field.
void validate(const RunConfig& cfg);

struct RoundRecord {
    std::size_t t = 0;
    Vec x;                      ///< iterate x_t
    Vec g;                      ///< aggregated estimate g_t
    std::size_t bytes_per_worker = 0;
    double f_x = 0.0;           ///< population value f(x_t)
    double regret = 0.0;        ///< f(x_t) - f*
    double g_norm_sq = 0.0;
};

struct RunTrace {
    RunConfig config;
    std::vector<RoundRecord> rounds;
    Vec x_star;
    double f_star = 0.0;
    double lipschitz = 0.0;
    double diameter = 0.0;
    double cumulative_regret = 0.0;
    double average_regret = 0.0;
    std::size_t total_bytes = 0;
    Vec average_iterate;
    double average_iterate_regret = 0.0;
    double last_iterate_regret = 0.0;
};

/// Runs the federated zero-order loop. Per round t (1-based) and worker j
/// (0-based) the worker draws zeta then c from stream (seed, j, t), queries
/// f_c at x_t +- h zeta and sends a WorkerMessage; the server decodes, averages
/// in worker order, steps and projects. The trace depends on cfg only.
RunTrace run_federated(const RunConfig& cfg);

/// Recomputes the summary fields of a trace from its rounds.
void summarize(RunTrace& trace);

struct Hyperparams {
    double h = 0.0;
    double eta = 0.0;
};

/// h = sqrt((d+1)/n) / L and eta = sqrt(m/(n d)) / L.
Hyperparams default_hyperparams(double L, double D, std::size_t d, std::size_t n, std::size_t m);

inline constexpr double kVarianceC1 = (2.0 / 0.003) * (2.0 / 0.003);
inline constexpr double kVarianceC2 = 1448.0;

/// L_1 = 2 log(1 + 211 n m).
double deviation_log_factor(std::size_t n, std::size_t m);

/// The high-probability regret bound, term by term, as printed.
struct RegretBound {
    double stability = 0.0;   ///< D^2 / (2 eta)
    double bias_step = 0.0;   ///< (2 L h / sqrt(d+1) + L^2 eta) n
    double variance = 0.0;    ///< eta n C1 L^2 d ((log(4n/delta)/m)^2 + C2/m log(4n/delta))
    double deviation = 0.0;   ///< 4 D L sqrt(d) (sqrt(211/(nm) log(2 L1/delta)) + 19811/m log(2 L1/delta))
    double total = 0.0;
};

RegretBound regret_bound_terms(const RunConfig& cfg, double L, double D);
double theoretical_regret_bound(const RunConfig& cfg, double L, double D);

struct Budgets {
    double psi_n = 0.0;        ///< variance-event budget
    double psi_n_prime = 0.0;  ///< deviation-event budget (per-round average)
};

Budgets deviation_and_variance_budgets(const RunConfig& cfg, double L, double D);

using GradientOracle = std::function<Vec(std::span<const double>)>;

struct Measured {
    double value = 0.0;
    double std_error = 0.0;
};

/// |sum_t <g_t - grad Sigma_h(x_t), x_t - x_ref>| with grad Sigma_h estimated
/// by smoothed_grad_mc (substream t of `stream`), and the propagated error.
Measured measure_deviation(const RunTrace& trace, const SmoothedOracle& oracle, std::span<const double> x_ref,
                           const RngStream& stream);

/// Same quantity with an exact gradient oracle; std_error is 0.
Measured measure_deviation(const RunTrace& trace, const GradientOracle& grad, std::span<const double> x_ref);

/// sum_t |g_t - grad Sigma_h(x_t)|^2.
double measure_variance_sum(const RunTrace& trace, const GradientOracle& grad);

}  // namespace l1zo
