// Command-line front end: run, sweep, tails, martingale and report.
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 1 any other
// failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "l1zo/experiment.hpp"
#include "l1zo/report.hpp"

namespace fs = std::filesystem;
using namespace l1zo;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::optional<unsigned> threads;
    bool plot = false;
};

ExperimentConfig load(const std::string& path, Mode expected, const Overrides& o) {
    ExperimentConfig cfg = load_config(path);
    if (cfg.mode != expected) {
        throw ConfigError("mode: config declares '" + std::string(to_string(cfg.mode)) + "' but the subcommand is '" +
                          std::string(to_string(expected)) + "'");
    }
    if (o.seed) override_seed(cfg, *o.seed);
    if (o.output) cfg.output = *o.output;
    if (o.threads) {
        if (*o.threads < 1) throw ConfigError("--threads: must be >= 1");
        cfg.threads = *o.threads;
        if (cfg.mode == Mode::Run) cfg.run.threads = *o.threads;
    }
    if (o.plot) cfg.plot = true;
    return cfg;
}

void print_paths(const std::vector<fs::path>& paths) {
    for (const auto& p : paths) std::cout << "  wrote " << p.string() << '\n';
}

int do_run(const ExperimentConfig& cfg) {
    const fs::path out = resolve_output(cfg);
    ensure_writable_dir(out);
    const RunConfig rc = resolve_run(cfg, cfg.run.n, cfg.run.m, cfg.run.d, cfg.run.seed);
    const RunTrace trace = run_federated(rc);
    const double bound = theoretical_regret_bound(rc, trace.lipschitz, trace.diameter);
    std::printf("run %s: n=%zu m=%zu d=%zu h=%.6g eta=%.6g\n", config_hash(rc).c_str(), rc.n, rc.m, rc.d, rc.h,
                rc.eta);
    std::printf("  cumulative regret %.6g (bound %.6g), average regret %.6g, bytes %zu\n", trace.cumulative_regret,
                bound, trace.average_regret, trace.total_bytes);
    std::fflush(stdout);
    print_paths(emit_run_report(trace, out, cfg.plot));
    return 0;
}

int do_sweep(const ExperimentConfig& cfg) {
    const SweepResult res = run_sweep(cfg);
    std::printf("sweep: %zu cells, %zu computed, %zu skipped, %zu failed\n", res.rows.size(), res.computed,
                res.skipped, res.failed);
    for (const auto& r : res.rows) {
        if (!r.ok) std::fprintf(stderr, "  cell n=%zu m=%zu d=%zu seed=%llu failed: %s\n", r.n, r.m, r.d,
                                static_cast<unsigned long long>(r.seed), r.error.c_str());
    }
    std::fflush(stdout);
    const fs::path out = resolve_output(cfg);
    print_paths(emit_sweep_summary(res, out, cfg.plot));
    std::cout << "  wrote " << (out / "sweep.csv").string() << '\n';
    try {
        const RateFit fit = fit_rate_slope(res.rows, cfg.fit_scale);
        for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
        std::printf("  slope of log average regret vs log(%s): %.4f\n", std::string(to_string(cfg.fit_scale)).c_str(),
                    fit.slope);
    } catch (const std::invalid_argument& e) {
        std::cerr << "note: " << e.what() << '\n';
    }
    return res.failed == 0 ? 0 : 1;
}

int do_tails(const ExperimentConfig& cfg) {
    const auto reports = run_tails(cfg);
    std::size_t violations = 0;
    for (const auto& r : reports) {
        violations += r.violations;
        std::printf("%-12s d=%-4zu %-6s violations %zu\n", std::string(to_string(r.kind)).c_str(), r.d,
                    r.function ? std::string(to_string(*r.function)).c_str() : "", r.violations);
    }
    std::printf("total violations: %zu\n", violations);
    std::fflush(stdout);
    print_paths(emit_tails_report(reports, resolve_output(cfg), cfg.plot));
    return 0;
}

int do_martingale(const ExperimentConfig& cfg) {
    const auto rows = run_martingale(cfg);
    for (const auto& r : rows) {
        std::printf("%-18s delta=%-6g crossing fraction %.4f (limit %.4f)%s\n",
                    std::string(to_string(r.law)).c_str(), r.delta, r.coverage.fraction, r.limit(), r.within_guarantee() ? "" : "  EXCEEDED");
    }
    std::fflush(stdout);
    print_paths(emit_martingale_report(rows, resolve_output(cfg), cfg.plot));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated zero-order optimisation with l1-sphere randomisation: simulator and concentration lab"};
    app.require_subcommand(1);

    Overrides o;
    std::string config_path;
    std::string report_dir;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "Configuration file")->required();
        sub->add_option("--seed", o.seed, "Override the seed(s) in the config");
        sub->add_option("--output", o.output, "Output directory (relative paths resolve against $L1ZO_OUTPUT_ROOT)");
        sub->add_option("--threads", o.threads, "Worker threads");
        sub->add_flag("--plot", o.plot, "Also write SVG figures");
    };
    CLI::App* run = app.add_subcommand("run", "Run one federated optimisation");
    CLI::App* sweep = app.add_subcommand("sweep", "Sweep runs over n, m, d and seeds");
    CLI::App* tails = app.add_subcommand("tails", "Empirical tails against the concentration envelopes");
    CLI::App* mart = app.add_subcommand("martingale", "Sub-gamma boundary coverage");
    for (auto* s : {run, sweep, tails, mart}) add_common(s);
    CLI::App* report = app.add_subcommand("report", "Summarise the reports in a directory");
    report->add_option("dir", report_dir, "Output directory of an earlier command")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*run) return do_run(load(config_path, Mode::Run, o));
        if (*sweep) return do_sweep(load(config_path, Mode::Sweep, o));
        if (*tails) return do_tails(load(config_path, Mode::Tails, o));
        if (*mart) return do_martingale(load(config_path, Mode::Martingale, o));
        if (*report) {
            describe_directory(report_dir, std::cout);
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
