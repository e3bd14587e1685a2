#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l1zo/objectives.hpp"
#include "l1zo/rng.hpp"
#include "l1zo/vec.hpp"

namespace l1zo {

// ---------------------------------------------------------------------------
// Tail envelopes for a standard Laplace vector x with S = |x|_1.
//
//   ratio        P(|x|_2 / S > r)              <= 17.1 exp(-0.011 r d),  r >= 16/sqrt(d), d >= 2
//   avg          P(|S/d - 1| > r)              <= 2 exp(-d min(r, r^2) / 16)
//   avg-sqrt     P(|S/d - 1| > r)              <= 2 exp(-sqrt(d) r / 16)
//   lipschitz    P(|f(x/S) - E f(x/S)| > r)    <= 361 exp(-0.003 r d)
//   norm-to-avg  P(|f(x/S) - f(x/d)| > r)      <= 88 exp(-0.018 r d),   0 < r <= 2
// ---------------------------------------------------------------------------

enum class EnvelopeKind { Ratio, Avg, AvgSqrt, Lipschitz, NormToAvg };

std::string_view to_string(EnvelopeKind kind);
EnvelopeKind envelope_kind_from_string(std::string_view name);
bool needs_test_function(EnvelopeKind kind);

/// Unclamped envelope. Throws std::domain_error outside the kind's validity range.
double envelope_raw(EnvelopeKind kind, double r, std::size_t d);

/// Envelope clamped at 1.
double envelope(EnvelopeKind kind, double r, std::size_t d);

/// 1-Lipschitz (in the Euclidean norm) test functions.
enum class TestFunction { Norm2, FirstCoord, MaxCoord };

std::string_view to_string(TestFunction f);
TestFunction test_function_from_string(std::string_view name);
double evaluate(TestFunction f, std::span<const double> z);

struct TailPoint {
    double r = 0.0;
    double fraction = 0.0;
    double std_error = 0.0;
};

/// Fraction of samples strictly above each r, with binomial standard error
/// sqrt(p(1-p)/N). The grid must be sorted ascending.
std::vector<TailPoint> empirical_tail(std::span<const double> samples, std::span<const double> r_grid);

struct TailGridRow {
    double r = 0.0;
    double empirical = 0.0;
    double std_error = 0.0;
    double envelope = 0.0;      ///< clamped at 1
    double envelope_raw = 0.0;
    bool counted = false;       ///< envelope_raw < 1, i.e. the bound is not vacuous
    bool violated = false;
};

struct TailReport {
    EnvelopeKind kind = EnvelopeKind::Avg;
    std::size_t d = 0;
    std::size_t samples = 0;
    std::optional<TestFunction> function;
    RngStream stream;
    /// Standard error of the independent-batch estimate of E f(x/S); the
    /// violation test evaluates the empirical tail at r + 3 * mean_std_error.
    double mean_std_error = 0.0;
    std::vector<TailGridRow> grid;
    std::size_t violations = 0;
};

inline constexpr std::size_t kTailGridPoints = 50;
inline constexpr std::size_t kMinTailSamples = 10000;

/// Log-spaced grid used by tail_experiment for the kind and dimension.
std::vector<double> tail_grid(EnvelopeKind kind, std::size_t d);

/// Draws N Laplace vectors, computes the kind's statistic and compares its
/// empirical tail with the envelope. A grid point is a violation when
/// empirical - 3 SE exceeds a non-vacuous envelope.
TailReport tail_experiment(EnvelopeKind kind, std::size_t d, std::size_t samples, std::optional<TestFunction> f,
                           const RngStream& stream, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Time-uniform sub-gamma boundary.
// ---------------------------------------------------------------------------

struct SubGammaBoundary {
    double c = 0.0;      ///< sub-gamma scale
    double rho = 1.0;
    double delta = 0.05;

    SubGammaBoundary(double c_, double rho_, double delta_);

    /// 4 sqrt(V log(H/delta)) + 11 (c + rho) log(H/delta), H = log(1 + V/rho^2) + 2.
    double operator()(double V) const;
};

double subgamma_boundary(const SubGammaBoundary& b, double V);

enum class IncrementLaw { BoundedSymmetric, CenteredGamma };

std::string_view to_string(IncrementLaw law);
IncrementLaw increment_law_from_string(std::string_view name);

struct MartingaleSpec {
    IncrementLaw law = IncrementLaw::BoundedSymmetric;
    double variance = 1.0;   ///< per-step conditional variance v
    double scale = 1.0;      ///< declared sub-gamma scale c
    std::size_t steps = 1000;
    std::size_t replications = 2000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Smallest scale for which the law is certified sub-gamma.
double certified_scale(const MartingaleSpec& spec);

struct CoverageResult {
    std::size_t crossings = 0;
    double fraction = 0.0;
    double std_error = 0.0;
};

/// Fraction of R simulated paths with |S_t| > boundary(V_t) for some t <= T.
CoverageResult boundary_coverage_experiment(const MartingaleSpec& spec, const SubGammaBoundary& b);

// ---------------------------------------------------------------------------
// Moments of the two-point estimator.
// ---------------------------------------------------------------------------

/// (2L)^p / 2 * (361 p! (sqrt(d)/0.003)^p + 1).
double p_moment_bound(int p, std::size_t d, double L);

/// 18 (1 + sqrt 2)^2 L^2 d.
double second_moment_bound(std::size_t d, double L);

/// 211 L^2 d.
double centered_second_moment_bound(std::size_t d, double L);

struct MomentPoint {
    Vec x;
    Vec smoothed_gradient;
    double centered_p_moment = 0.0;     ///< mean |g - grad Sigma_h|^p
    double centered_p_std_error = 0.0;
    double second_moment = 0.0;         ///< mean |g|^2
    double second_std_error = 0.0;
    double centered_second = 0.0;       ///< mean |g - grad Sigma_h|^2
};

struct MomentReport {
    int p = 2;
    std::size_t d = 0;
    double h = 0.0;
    double L = 0.0;
    std::size_t samples = 0;
    double p_bound = 0.0;
    double second_bound = 0.0;
    double centered_second_bound = 0.0;
    std::vector<MomentPoint> points;
    bool passed = false;
};

inline constexpr std::size_t kMinMomentSamples = 100000;

/// Empirical moments of the estimator at three random points in [-1, 1]^d.
MomentReport moment_check(int p, std::size_t d, double h, double L, std::size_t samples, const Problem& problem,
                          const RngStream& stream, unsigned threads = 1);

}  // namespace l1zo
