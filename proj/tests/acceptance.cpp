// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here and printed with each result.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "l1zo/concentration.hpp"
#include "l1zo/experiment.hpp"
#include "l1zo/fed_sim.hpp"
#include "l1zo/report.hpp"
#include "l1zo/zo_estimator.hpp"
#include "support/direct_loop.hpp"

using namespace l1zo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

unsigned threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Criterion 6 and 7 share this problem: D = 2, L = 1.
RunConfig shifted_norm_run() {
    RunConfig cfg;
    cfg.d = 5;
    cfg.problem.family = Family::ShiftedNorm;
    cfg.problem.d = 5;
    cfg.problem.sigma = 0.1;
    cfg.problem.theta = {0.5, -0.3, 0.2, 0.1, -0.4};
    cfg.set.kind = SetKind::EuclideanBall;
    cfg.set.radius = 1.0;
    cfg.delta = 0.1;
    return cfg;
}

Outcome unbiasedness() {
    ProblemSpec s;
    s.family = Family::LinearNoise;
    s.d = 3;
    s.a = {1, 2, 3};
    const Problem p(s);
    const auto g = smoothed_grad_mc(SmoothedOracle(p, 0.5, 1000000, true, threads()), Vec{0.3, -0.2, 0.1},
                                    {101, 0, 0});
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < 3; ++i) {
        const double z = (g.estimate[i] - s.a[i]) / g.std_error[i];
        ok = ok && std::abs(z) <= 4.0;
        detail += fmt("%sg%zu=%.5f (z=%+.2f)", i ? ", " : "", i + 1, g.estimate[i], z);
    }
    return {ok, detail + "; tolerance |z| <= 4"};
}

Outcome bias_bound() {
    bool ok = true;
    double worst_low = 1e300, worst_high = -1e300;
    int checked = 0;
    for (std::size_t d : {3u, 5u, 10u}) {
        ProblemSpec s;
        s.family = Family::ShiftedNorm;
        s.d = d;
        s.sigma = 0.1;
        s.theta = Vec(d, 0.0);
        const Problem p(s);
        for (double h : {0.01, 0.1, 1.0}) {
            Rng point_rng({102, d, bits(h)});
            for (int k = 0; k < 5; ++k) {
                Vec x(d);
                for (auto& v : x) v = point_rng.uniform(-1, 1);
                // Paired samples: f_c(x + hU) - f_c(x) with c drawn jointly
                // with U has mean Sigma_h(x) - f(x).
                const std::size_t N = 1000000;
                Rng rng({103, d * 100 + k, bits(h)});
                double sum = 0.0, sq = 0.0;
                Vec y(d);
                for (std::size_t i = 0; i < N; ++i) {
                    const Vec u = sample_l1_ball(d, rng);
                    const Vec c = p.sample_context(rng);
                    for (std::size_t j = 0; j < d; ++j) y[j] = x[j] + h * u[j];
                    const double diff = p.eval_context(c, y) - p.eval_context(c, x);
                    sum += diff;
                    sq += diff * diff;
                }
                const double mean = sum / N;
                const double se = std::sqrt(std::max(sq / N - mean * mean, 0.0) / N);
                const double cap = 2.0 * h / std::sqrt(double(d) + 1.0);
                const bool here = mean >= -4 * se && mean <= cap + 4 * se;
                ok = ok && here;
                worst_low = std::min(worst_low, (mean + 4 * se));
                worst_high = std::max(worst_high, (mean - 4 * se) / cap);
                ++checked;
            }
        }
    }
    return {ok, fmt("%d points; min(gap + 4SE) = %.3g (must be >= 0), max((gap - 4SE) / cap) = %.3f (must be <= 1)",
                    checked, worst_low, worst_high)};
}

Outcome variance_bound() {
    bool ok = true;
    double worst = 0.0;
    std::string where;
    for (std::size_t d : {3u, 10u, 50u}) {
        for (Family fam : {Family::LinearNoise, Family::ShiftedNorm, Family::MaxAffineNoise}) {
            ProblemSpec s;
            s.family = fam;
            s.d = d;
            s.sigma = 0.1;
            s.seed = d;
            const Problem p(s);
            const double L = p.lipschitz();
            Rng rng({104, d, static_cast<std::uint64_t>(fam)});
            Vec x(d);
            for (auto& v : x) v = rng.uniform(-1, 1);
            double sum = 0.0;
            const std::size_t N = 100000;
            for (std::size_t i = 0; i < N; ++i) sum += norm2_sq(sample_grad_estimate(p, x, 0.1, rng).vector);
            const double ratio = (sum / N) / (104.9 * L * L * double(d));
            ok = ok && ratio <= 1.0;
            if (ratio > worst) {
                worst = ratio;
                where = fmt("%s d=%zu", std::string(to_string(fam)).c_str(), d);
            }
        }
    }
    return {ok, fmt("max E|g|^2 / (104.9 L^2 d) = %.4f at %s (must be <= 1)", worst, where.c_str())};
}

Outcome tail_domination() {
    std::size_t violations = 0, experiments = 0, counted = 0;
    for (auto kind : {EnvelopeKind::Ratio, EnvelopeKind::Avg, EnvelopeKind::AvgSqrt, EnvelopeKind::Lipschitz,
                      EnvelopeKind::NormToAvg}) {
        for (std::size_t d : {8u, 16u, 32u, 64u}) {
            std::vector<std::optional<TestFunction>> fns{std::nullopt};
            if (needs_test_function(kind)) fns = {TestFunction::Norm2, TestFunction::FirstCoord, TestFunction::MaxCoord};
            for (const auto& f : fns) {
                const std::uint64_t fi = f ? static_cast<std::uint64_t>(*f) : 9;
                const auto rep = tail_experiment(kind, d, 100000, f,
                                                 {105, (static_cast<std::uint64_t>(kind) << 8) + fi, d}, threads());
                violations += rep.violations;
                for (const auto& row : rep.grid) counted += row.counted;
                ++experiments;
                if (rep.violations > 0) {
                    std::printf("    violation: %s d=%zu %s (%zu points)\n", std::string(to_string(kind)).c_str(), d,
                                f ? std::string(to_string(*f)).c_str() : "", rep.violations);
                }
            }
        }
    }
    return {violations == 0, fmt("%zu experiments, %zu non-vacuous grid points, %zu violations (must be 0)",
                                 experiments, counted, violations)};
}

Outcome boundary_coverage() {
    ExperimentConfig cfg;
    cfg.mode = Mode::Martingale;
    cfg.martingale.deltas = {0.05, 0.1};
    cfg.martingale.steps = 1000;
    cfg.martingale.replications = 2000;
    cfg.martingale.seed = 106;
    cfg.threads = threads();
    bool ok = true;
    std::string detail;
    for (const auto& row : run_martingale(cfg)) {
        const double limit = row.limit();
        ok = ok && row.within_guarantee();
        detail += fmt("%s%s delta=%.2f: %.4f <= %.4f", detail.empty() ? "" : "; ", std::string(to_string(row.law)).c_str(),
                      row.delta, row.coverage.fraction, limit);
    }
    return {ok, detail};
}

Outcome high_probability_regret() {
    const std::size_t R = 200;
    std::size_t violating = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < R; ++seed) {
        RunConfig cfg = shifted_norm_run();
        cfg.n = 512;
        cfg.m = 4;
        cfg.seed = seed;
        const auto hp = default_hyperparams(1.0, 2.0, 5, 512, 4);
        cfg.h = hp.h;
        cfg.eta = hp.eta;
        const RunTrace tr = run_federated(cfg);
        const double bound = theoretical_regret_bound(cfg, 1.0, 2.0);
        violating += tr.cumulative_regret > bound;
        worst = std::max(worst, tr.cumulative_regret / bound);
    }
    const double frac = double(violating) / double(R);
    const double limit = 0.1 + 3.0 * std::sqrt(0.1 * 0.9 / double(R));
    return {frac <= limit, fmt("%zu/%zu runs above the bound (fraction %.4f <= %.4f); max regret/bound = %.3g",
                               violating, R, frac, limit, worst)};
}

Outcome rate_scaling(const fs::path& out) {
    fs::remove_all(out);
    ExperimentConfig cfg;
    cfg.mode = Mode::Sweep;
    cfg.run = shifted_norm_run();
    cfg.sweep.n = {64, 128, 256, 512, 1024, 2048, 4096};
    cfg.sweep.m = {1, 4, 16};
    cfg.sweep.d = {5};
    for (std::uint64_t s = 0; s < 20; ++s) cfg.sweep.seeds.push_back(s);
    cfg.output = out;
    cfg.threads = threads();
    const SweepResult res = run_sweep(cfg);
    if (res.failed > 0) return {false, fmt("%zu of %zu cells failed", res.failed, res.rows.size())};
    const RateFit nm = fit_rate_slope(res.rows, RateScale::NM);
    std::vector<SweepRow> single;
    for (const auto& r : res.rows)
        if (r.m == 1) single.push_back(r);
    const RateFit n = fit_rate_slope(single, RateScale::N);
    auto inside = [](double s) { return s >= -0.6 && s <= -0.4; };
    return {inside(nm.slope) && inside(n.slope),
            fmt("%zu cells; slope vs log(nm) = %.4f (rms %.3f), m=1 slope vs log(n) = %.4f (rms %.3f); band [-0.6, -0.4]",
                res.rows.size(), nm.slope, nm.residual_rms, n.slope, n.residual_rms)};
}

Outcome exactness() {
    std::vector<std::string> failures;

    Rng rng({107, 0, 0});
    for (int i = 0; i < 10000; ++i) {
        const std::size_t d = 1 + rng() % 256;
        const L1Direction z = sample_l1_sphere(d, rng);
        const double y = rng.uniform(-100, 100), yp = rng.uniform(-100, 100), h = rng.uniform(1e-3, 1);
        const WorkerMessage msg = encode_message(y, yp, z);
        const auto bytes = serialize(msg);
        const WorkerMessage back = deserialize(bytes, d);
        const Vec a = grad_estimate(d, h, y, yp, z).vector, b = decode_message(back, d, h).vector;
        bool same = back == msg && bytes.size() == message_bytes(d) && serialize(back) == bytes;
        for (std::size_t k = 0; k < d && same; ++k) same = bits(a[k]) == bits(b[k]);
        if (!same) {
            failures.push_back(fmt("codec mismatch at message %d", i));
            break;
        }
    }

    RunConfig single = shifted_norm_run();
    single.n = 400;
    single.m = 1;
    single.h = 0.05;
    single.eta = 0.05;
    single.seed = 7;
    const RunTrace fed = run_federated(single);
    const auto direct = reference::direct_single_worker(single);
    RunTrace rebuilt = fed;
    const Problem problem(single.problem);
    for (std::size_t t = 0; t < direct.size(); ++t) {
        RoundRecord& r = rebuilt.rounds[t];
        r.x = direct[t].x;
        r.g = direct[t].g;
        r.f_x = problem.population_value(r.x);
        r.regret = r.f_x - fed.f_star;
        r.g_norm_sq = norm2_sq(r.g);
        r.bytes_per_worker = 8 + (single.d + 7) / 8;
    }
    if (trace_csv(rebuilt) != trace_csv(fed)) failures.push_back("m=1 trace differs from the direct loop");

    for (std::size_t d : {1u, 5u, 8u, 9u, 64u, 100u}) {
        RunConfig cfg = shifted_norm_run();
        cfg.d = d;
        cfg.problem.d = d;
        cfg.problem.theta = Vec(d, 0.05);  // |theta| <= 0.5: inside the ball
        cfg.n = 37;
        cfg.m = 3;
        cfg.h = 0.05;
        cfg.eta = 0.05;
        const std::size_t expected = 37 * 3 * (8 + (d + 7) / 8);
        if (run_federated(cfg).total_bytes != expected) failures.push_back(fmt("byte count wrong at d=%zu", d));
    }

    RunConfig par = shifted_norm_run();
    par.n = 300;
    par.m = 16;
    par.h = 0.05;
    par.eta = 0.02;
    par.seed = 8;
    const std::string seq_csv = trace_csv(run_federated(par));
    par.threads = 8;
    if (trace_csv(run_federated(par)) != seq_csv) failures.push_back("parallel trace differs from sequential");

    std::string detail = "codec 10^4 messages, m=1 direct loop, byte counts, parallel vs sequential";
    for (const auto& f : failures) detail += "; " + f;
    return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    // Optional arguments select criteria by number, e.g. `acceptance 1 8`.
    std::vector<bool> selected(8, argc == 1);
    for (int i = 1; i < argc; ++i) {
        const int k = std::atoi(argv[i]);
        if (k >= 1 && k <= 8) selected[k - 1] = true;
    }
    const char* root = std::getenv(kOutputRootEnv);
    const fs::path out = fs::path(root ? root : fs::temp_directory_path().string()) / "acceptance-sweep";

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"unbiasedness", unbiasedness},
        {"bias bound", bias_bound},
        {"variance bound", variance_bound},
        {"tail domination", tail_domination},
        {"sub-gamma boundary coverage", boundary_coverage},
        {"high-probability regret", high_probability_regret},
        {"rate scaling", [&] { return rate_scaling(out); }},
        {"exactness", exactness},
    };
    int failed = 0, ran = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected[i]) continue;
        ++ran;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %zu %s  %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
