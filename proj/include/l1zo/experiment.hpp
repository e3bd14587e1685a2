#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "l1zo/concentration.hpp"
#include "l1zo/fed_sim.hpp"

namespace l1zo {

/// Raised for malformed or invalid configuration documents. The CLI maps it
/// (and every other std::invalid_argument) to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Mode { Run, Sweep, Tails, Martingale };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view name);

enum class RateScale { NM, N };

std::string_view to_string(RateScale scale);
RateScale rate_scale_from_string(std::string_view name);

struct SweepAxes {
    std::vector<std::size_t> n;
    std::vector<std::size_t> m;
    std::vector<std::size_t> d;
    std::vector<std::uint64_t> seeds;

    std::size_t cells() const { return n.size() * m.size() * d.size() * seeds.size(); }
};

struct TailsSpec {
    std::vector<EnvelopeKind> kinds;
    std::vector<std::size_t> d;
    std::size_t samples = 100000;
    std::vector<TestFunction> functions{TestFunction::Norm2, TestFunction::FirstCoord, TestFunction::MaxCoord};
    std::uint64_t seed = 0;
};

struct MartingaleLab {
    std::vector<IncrementLaw> laws{IncrementLaw::BoundedSymmetric, IncrementLaw::CenteredGamma};
    std::vector<double> deltas{0.05, 0.1};
    double variance = 1.0;
    std::optional<double> scale;   ///< defaults to the certified scale of each law
    std::optional<double> c;       ///< boundary scale; defaults to the increments' scale
    double rho = 1.0;
    std::size_t steps = 1000;
    std::size_t replications = 2000;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    Mode mode = Mode::Run;
    RunConfig run;                  ///< base run; n, m, d and seed are replaced per sweep cell
    std::optional<double> h;        ///< empty: default_hyperparams
    std::optional<double> eta;
    SweepAxes sweep;
    TailsSpec tails;
    MartingaleLab martingale;
    std::filesystem::path output{"results"};
    bool plot = false;
    unsigned threads = 1;
    RateScale fit_scale = RateScale::NM;
};

/// Environment variable naming the directory that relative output paths are
/// resolved against.
inline constexpr const char* kOutputRootEnv = "L1ZO_OUTPUT_ROOT";

/// Parses a configuration document: one `key = value` per line with dotted
/// sections (problem.family, set.kind, sweep.n, ...), '#' comments, and
/// values that are JSON literals or bare words. A document whose first
/// non-blank character is '{' is read as JSON, nested objects standing for
/// dotted keys. Unknown keys, missing required keys and invariant violations
/// throw ConfigError naming the key.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies a --seed override: the base seed, and the sweep, tails and
/// martingale seeds.
void override_seed(ExperimentConfig& cfg, std::uint64_t seed);

/// Output directory after resolving against $L1ZO_OUTPUT_ROOT.
std::filesystem::path resolve_output(const ExperimentConfig& cfg);

/// The run for one sweep cell, with h and eta filled from default_hyperparams
/// when the config leaves them unset. Validated.
RunConfig resolve_run(const ExperimentConfig& cfg, std::size_t n, std::size_t m, std::size_t d, std::uint64_t seed);

/// Canonical JSON of a run configuration (sorted keys, round-trip doubles).
std::string canonical_json(const RunConfig& cfg);

/// 64-bit FNV-1a of canonical_json, as 16 lowercase hex digits.
std::string config_hash(const RunConfig& cfg);

struct SweepRow {
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t d = 0;
    std::uint64_t seed = 0;
    std::string hash;
    bool ok = false;
    std::string error;
    double h = 0.0;
    double eta = 0.0;
    double cumulative_regret = 0.0;
    double average_regret = 0.0;
    double last_iterate_regret = 0.0;
    double average_iterate_regret = 0.0;
    double bound = 0.0;
    std::size_t total_bytes = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;   ///< cartesian order: n, m, d, seed (seed fastest)
    std::size_t computed = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
};

/// Runs every (n, m, d, seed) cell, writing per-cell trace CSV and summary
/// JSON under <output>/cells and the aggregated <output>/sweep.csv. Cells
/// whose summary already exists with a matching config hash are loaded
/// instead of recomputed. A failing cell is recorded in its row and does not
/// stop the sweep.
SweepResult run_sweep(const ExperimentConfig& cfg);

struct RateFit {
    std::vector<std::pair<double, double>> points;   ///< (log scale, log mean average regret)
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    std::vector<std::string> warnings;
};

/// OLS of log(average regret) on log(n m) or log(n). Seeds are averaged per
/// (n, m, d) cell before taking logs; rows with non-positive regret are
/// dropped with a warning. Needs at least 3 distinct scale values.
RateFit fit_rate_slope(const std::vector<SweepRow>& rows, RateScale scale);

/// Every (kind, d) of the tails spec, and every test function for the kinds
/// that take one. Reports are in config order.
std::vector<TailReport> run_tails(const ExperimentConfig& cfg);

struct MartingaleRow {
    IncrementLaw law = IncrementLaw::BoundedSymmetric;
    double delta = 0.0;
    double variance = 0.0;
    double scale = 0.0;
    double c = 0.0;
    double rho = 0.0;
    std::size_t steps = 0;
    std::size_t replications = 0;
    CoverageResult coverage;

    /// 2 delta + 3 sqrt(p (1 - p) / R) with p = min(2 delta, 1): the binomial
    /// SE at the guaranteed rate, not the observed one (which is 0 at 0 crossings).
    double limit() const {
        const double p = std::min(2.0 * delta, 1.0);
        return 2.0 * delta + 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(replications));
    }
    bool within_guarantee() const { return coverage.fraction <= limit(); }
};

/// One coverage experiment per (law, delta).
std::vector<MartingaleRow> run_martingale(const ExperimentConfig& cfg);

}  // namespace l1zo
