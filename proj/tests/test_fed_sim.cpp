#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>

#include "l1zo/fed_sim.hpp"
#include "support/direct_loop.hpp"

using namespace l1zo;

namespace {

RunConfig linear_run(Vec a, double sigma = 0.0) {
    RunConfig cfg;
    cfg.d = a.size();
    cfg.problem.family = Family::LinearNoise;
    cfg.problem.d = cfg.d;
    cfg.problem.a = std::move(a);
    cfg.problem.sigma = sigma;
    return cfg;
}

RunConfig shifted_run(std::size_t d, std::size_t n, std::size_t m, std::uint64_t seed) {
    RunConfig cfg;
    cfg.n = n;
    cfg.m = m;
    cfg.d = d;
    cfg.seed = seed;
    cfg.problem.family = Family::ShiftedNorm;
    cfg.problem.d = d;
    cfg.problem.sigma = 0.1;
    cfg.problem.theta = Vec(d, 0.0);
    cfg.problem.theta[0] = 0.5;
    cfg.set.kind = SetKind::EuclideanBall;
    cfg.set.radius = 1.0;
    cfg.h = 0.05;
    cfg.eta = 0.02;
    return cfg;
}

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

// Printed regret bound evaluated in long double, written out term by term.
long double bound_oracle(long double n, long double m, long double d, long double L, long double D, long double delta,
                         long double h, long double eta) {
    const long double C1 = (2.0L / 0.003L) * (2.0L / 0.003L);
    const long double C2 = 1448.0L;
    const long double L1 = 2.0L * std::log(1.0L + 211.0L * n * m);
    const long double lg = std::log(4.0L * n / delta);
    const long double ld = std::log(2.0L * L1 / delta);
    return D * D / (2.0L * eta) + (2.0L * L * h / std::sqrt(d + 1.0L) + L * L * eta) * n +
           eta * n * C1 * L * L * d * (lg * lg / (m * m) + C2 * lg / m) +
           4.0L * D * L * std::sqrt(d) * (std::sqrt(211.0L * ld / (n * m)) + 19811.0L * ld / m);
}

}  // namespace

TEST(RunFederated, ZeroStepNeverMoves) {
    RunConfig cfg = shifted_run(3, 50, 2, 1);
    cfg.eta = 0.0;
    cfg.x1 = {0.1, 0.2, -0.3};
    const RunTrace tr = run_federated(cfg);
    ASSERT_EQ(tr.rounds.size(), 50u);
    for (const auto& r : tr.rounds) EXPECT_EQ(r.x, cfg.x1);
}

TEST(RunFederated, LinearDriftsToTheBoundary) {
    RunConfig cfg = linear_run({1.0});
    cfg.set.kind = SetKind::Box;
    cfg.set.lower = {-1};
    cfg.set.upper = {1};
    cfg.h = 0.1;
    cfg.eta = 0.05;
    cfg.n = 500;
    const RunTrace tr = run_federated(cfg);
    EXPECT_NEAR(tr.rounds.back().x[0], -1.0, 0.1);
    EXPECT_EQ(tr.rounds.front().x, (Vec{0.0}));
    EXPECT_DOUBLE_EQ(tr.f_star, -1.0);
}

TEST(RunFederated, DeterministicAcrossRunsAndThreads) {
    RunConfig cfg = shifted_run(6, 200, 8, 17);
    const RunTrace a = run_federated(cfg);
    const RunTrace b = run_federated(cfg);
    cfg.threads = 4;
    const RunTrace c = run_federated(cfg);
    for (std::size_t t = 0; t < a.rounds.size(); ++t) {
        for (std::size_t i = 0; i < 6; ++i) {
            ASSERT_EQ(bits(a.rounds[t].x[i]), bits(b.rounds[t].x[i]));
            ASSERT_EQ(bits(a.rounds[t].x[i]), bits(c.rounds[t].x[i]));
            ASSERT_EQ(bits(a.rounds[t].g[i]), bits(c.rounds[t].g[i]));
        }
    }
    EXPECT_EQ(bits(a.cumulative_regret), bits(c.cumulative_regret));
    cfg.seed = 18;
    EXPECT_NE(run_federated(cfg).rounds.back().x, a.rounds.back().x);
}

TEST(RunFederated, BytesFeasibilityAndRegretSum) {
    for (std::size_t d : {1u, 8u, 9u, 20u}) {
        RunConfig cfg = shifted_run(d, 64, 3, d);
        cfg.eta = 0.5;  // large steps so projection is exercised
        const RunTrace tr = run_federated(cfg);
        EXPECT_EQ(tr.total_bytes, 64u * 3u * (8u + (d + 7) / 8));
        const FeasibleSet set = make_set(cfg.set, d);
        double sum = 0.0;
        for (const auto& r : tr.rounds) {
            ASSERT_TRUE(set.contains(r.x, 1e-9));
            EXPECT_EQ(r.bytes_per_worker, 8u + (d + 7) / 8);
            EXPECT_DOUBLE_EQ(r.g_norm_sq, norm2_sq(r.g));
            sum += r.regret;
        }
        EXPECT_NEAR(tr.cumulative_regret, sum, 1e-9 * std::abs(sum));
        EXPECT_DOUBLE_EQ(tr.average_regret, tr.cumulative_regret / 64.0);
    }
}

TEST(RunFederated, AggregateIsMeanOfWorkerEstimates) {
    RunConfig cfg = shifted_run(4, 3, 5, 2);
    const RunTrace tr = run_federated(cfg);
    const Problem p(cfg.problem);
    for (const auto& r : tr.rounds) {
        Vec sum(4, 0.0);
        for (std::size_t j = 0; j < 5; ++j) {
            Rng rng(RngStream{cfg.seed, j, r.t});
            const Vec g = sample_grad_estimate(p, r.x, cfg.h, rng).vector;
            for (std::size_t i = 0; i < 4; ++i) sum[i] += g[i];
        }
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(bits(r.g[i]), bits(sum[i] / 5.0));
    }
}

TEST(RunFederated, SingleWorkerMatchesDirectLoop) {
    for (std::uint64_t seed : {0u, 1u, 99u}) {
        RunConfig cfg = shifted_run(7, 300, 1, seed);
        cfg.eta = 0.1;
        const RunTrace tr = run_federated(cfg);
        const auto direct = reference::direct_single_worker(cfg);
        ASSERT_EQ(direct.size(), tr.rounds.size());
        for (std::size_t t = 0; t < direct.size(); ++t) {
            for (std::size_t i = 0; i < 7; ++i) {
                ASSERT_EQ(bits(direct[t].x[i]), bits(tr.rounds[t].x[i])) << "t=" << t;
                ASSERT_EQ(bits(direct[t].g[i]), bits(tr.rounds[t].g[i])) << "t=" << t;
            }
        }
    }
}

TEST(RunFederated, ValidationNamesTheField) {
    auto message = [](const RunConfig& cfg) {
        try {
            validate(cfg);
        } catch (const std::invalid_argument& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    RunConfig cfg = shifted_run(2, 10, 1, 0);
    EXPECT_EQ(message(cfg), "");
    RunConfig bad = cfg;
    bad.h = 0.0;
    EXPECT_EQ(message(bad).rfind("h:", 0), 0u);
    bad = cfg;
    bad.eta = -1.0;
    EXPECT_EQ(message(bad).rfind("eta:", 0), 0u);
    bad = cfg;
    bad.delta = 1.0;
    EXPECT_EQ(message(bad).rfind("delta:", 0), 0u);
    bad = cfg;
    bad.m = 0;
    EXPECT_EQ(message(bad).rfind("m:", 0), 0u);
    bad = cfg;
    bad.x1 = {3.0, 0.0};
    EXPECT_EQ(message(bad).rfind("x1:", 0), 0u);
    EXPECT_THROW(run_federated(bad), std::invalid_argument);
}

TEST(RunFederated, NonFiniteValuesAbort) {
    RunConfig cfg = linear_run({1e308, 1e308});
    cfg.set.kind = SetKind::Box;
    cfg.set.lower = {-1e10};
    cfg.set.upper = {1e10};
    cfg.x1 = {1e10, 1e10};
    cfg.n = 2;
    EXPECT_THROW(run_federated(cfg), std::runtime_error);
}

TEST(Hyperparams, Examples) {
    const auto hp = default_hyperparams(1, 2, 3, 4, 1);
    EXPECT_DOUBLE_EQ(hp.h, 1.0);
    EXPECT_NEAR(hp.eta, 0.28868, 1e-5);
    EXPECT_DOUBLE_EQ(hp.eta, 1.0 / std::sqrt(12.0));
    const auto two = default_hyperparams(2, 2, 3, 4, 1);
    EXPECT_DOUBLE_EQ(two.h, hp.h / 2);
    EXPECT_DOUBLE_EQ(two.eta, hp.eta / 2);
    EXPECT_DOUBLE_EQ(default_hyperparams(1, 2, 3, 4, 4).eta, 2 * hp.eta);
    EXPECT_THROW(default_hyperparams(0, 2, 3, 4, 1), std::invalid_argument);
}

TEST(Bound, MatchesIndependentEvaluation) {
    RunConfig cfg = shifted_run(5, 100, 10, 0);
    const auto hp = default_hyperparams(1, 2, 5, 100, 10);
    cfg.h = hp.h;
    cfg.eta = hp.eta;
    cfg.delta = 0.1;
    const long double oracle = bound_oracle(100, 10, 5, 1, 2, 0.1L, hp.h, hp.eta);
    EXPECT_NEAR(theoretical_regret_bound(cfg, 1, 2), static_cast<double>(oracle), 1e-9 * static_cast<double>(oracle));
    const RegretBound terms = regret_bound_terms(cfg, 1, 2);
    EXPECT_DOUBLE_EQ(terms.total, terms.stability + terms.bias_step + terms.variance + terms.deviation);
    EXPECT_DOUBLE_EQ(terms.stability, 4.0 / (2.0 * hp.eta));
}

TEST(Bound, Limits) {
    RunConfig cfg = shifted_run(5, 100, 10, 0);
    cfg.eta = 1e-300;
    EXPECT_GT(theoretical_regret_bound(cfg, 1, 2), 1e299);
    cfg.eta = 0.0;
    EXPECT_EQ(theoretical_regret_bound(cfg, 1, 2), std::numeric_limits<double>::infinity());

    cfg.eta = 0.01;
    cfg.h = 0.3;
    const RegretBound with_h = regret_bound_terms(cfg, 1, 2);
    cfg.h = 0.0;
    const RegretBound no_h = regret_bound_terms(cfg, 1, 2);
    EXPECT_DOUBLE_EQ(no_h.bias_step, 1.0 * 0.01 * 100);
    EXPECT_DOUBLE_EQ(no_h.stability, with_h.stability);
    EXPECT_DOUBLE_EQ(no_h.variance, with_h.variance);
    EXPECT_DOUBLE_EQ(no_h.deviation, with_h.deviation);
}

TEST(Budgets, MatchIndependentEvaluation) {
    RunConfig cfg = shifted_run(3, 50, 5, 0);
    cfg.delta = 0.1;
    const Budgets b = deviation_and_variance_budgets(cfg, 1, 1);
    const long double n = 50, m = 5, d = 3, delta = 0.1L;
    const long double C1 = (2.0L / 0.003L) * (2.0L / 0.003L);
    const long double l2n = std::log(2.0L * n / delta);
    const long double L1 = 2.0L * std::log(1.0L + 211.0L * n * m);
    const long double ll = std::log(L1 / delta);
    const long double psi = n * C1 * d * (l2n * l2n / (m * m) + 1448.0L * l2n / m);
    const long double psi_p = 4.0L * std::sqrt(d) * (std::sqrt(211.0L * ll / (n * m)) + 19811.0L * ll / (n * m));
    EXPECT_NEAR(b.psi_n, static_cast<double>(psi), 1e-9 * static_cast<double>(psi));
    EXPECT_NEAR(b.psi_n_prime, static_cast<double>(psi_p), 1e-9 * static_cast<double>(psi_p));
}

TEST(Budgets, Scaling) {
    RunConfig cfg = shifted_run(3, 50, 5, 0);
    cfg.delta = 0.1;
    const double psi = deviation_and_variance_budgets(cfg, 1, 1).psi_n;
    cfg.n = 100;
    cfg.delta = 0.2;  // keeps log(2n/delta) fixed
    EXPECT_NEAR(deviation_and_variance_budgets(cfg, 1, 1).psi_n / psi, 2.0, 1e-12);

    cfg.delta = 0.1;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n : {10u, 1000u, 100000u, 10000000u}) {
        cfg.n = n;
        const double p = deviation_and_variance_budgets(cfg, 1, 1).psi_n_prime;
        EXPECT_LT(p, prev);
        prev = p;
    }
    cfg.n = 1000000000;
    cfg.m = 1000;
    EXPECT_LT(deviation_and_variance_budgets(cfg, 1, 1).psi_n_prime, 1e-3);
}

TEST(Deviation, ConstructedZero) {
    RunConfig cfg = linear_run({1, -1, 0.5}, 0.2);
    cfg.n = 1;
    const RunTrace base = run_federated(cfg);
    const Problem p(cfg.problem);
    const SmoothedOracle o(p, cfg.h, 1000);
    const RngStream stream{5, 0, 0};
    RunTrace tr = base;
    tr.rounds[0].g = smoothed_grad_mc(o, tr.rounds[0].x, substream(stream, 1)).estimate;
    EXPECT_EQ(measure_deviation(tr, o, Vec{0.3, 0.3, 0.3}, stream).value, 0.0);
    tr.rounds[0].g = p.a();
    EXPECT_EQ(measure_deviation(tr, [&](std::span<const double>) { return p.a(); }, Vec{0.3, 0.3, 0.3}).value, 0.0);
}

TEST(Deviation, ReferenceAtTheIterateGivesZero) {
    RunConfig cfg = shifted_run(2, 20, 2, 3);
    cfg.eta = 0.0;
    cfg.x1 = {0.2, -0.1};
    const RunTrace tr = run_federated(cfg);
    const Problem p(cfg.problem);
    const auto dev = measure_deviation(tr, SmoothedOracle(p, cfg.h, 1000), cfg.x1, {6, 0, 0});
    EXPECT_EQ(dev.value, 0.0);
    EXPECT_EQ(dev.std_error, 0.0);
}

TEST(Deviation, MonteCarloAgreesWithExactGradient) {
    RunConfig cfg = linear_run({0.5, -0.2, 0.1}, 0.3);
    cfg.n = 10;
    cfg.m = 2;
    const RunTrace tr = run_federated(cfg);
    const Problem p(cfg.problem);
    const Vec ref{0.4, 0.1, -0.2};
    const auto mc = measure_deviation(tr, SmoothedOracle(p, cfg.h, 100000), ref, {7, 0, 0});
    const auto exact = measure_deviation(tr, [&](std::span<const double>) { return p.a(); }, ref);
    EXPECT_NEAR(mc.value, exact.value, 4 * mc.std_error + 1e-12);
    EXPECT_GT(mc.std_error, 0.0);
}

TEST(Deviation, WithinBudgetInMostReplications) {
    int within = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        RunConfig cfg = linear_run({0.6, -0.8, 0.0}, 0.2);
        cfg.n = 100;
        cfg.m = 2;
        cfg.seed = seed;
        cfg.delta = 0.1;
        const Problem p(cfg.problem);
        const auto hp = default_hyperparams(p.lipschitz(), 2.0, 3, 100, 2);
        cfg.h = hp.h;
        cfg.eta = hp.eta;
        const RunTrace tr = run_federated(cfg);
        const double dev = measure_deviation(tr, [&](std::span<const double>) { return p.a(); }, tr.x_star).value;
        within += dev <= 100.0 * deviation_and_variance_budgets(cfg, p.lipschitz(), 2.0).psi_n_prime;
    }
    EXPECT_GE(within, 90);
}

TEST(Variance, EventHoldsInMostReplications) {
    const int R = 200;
    int within = 0;
    for (std::uint64_t seed = 0; seed < R; ++seed) {
        RunConfig cfg = linear_run({0.6, -0.8, 0.0, 0.3}, 0.2);
        cfg.n = 100;
        cfg.m = 4;
        cfg.seed = seed;
        cfg.delta = 0.1;
        const Problem p(cfg.problem);
        const auto hp = default_hyperparams(p.lipschitz(), 2.0, 4, 100, 4);
        cfg.h = hp.h;
        cfg.eta = hp.eta;
        const RunTrace tr = run_federated(cfg);
        const double v = measure_variance_sum(tr, [&](std::span<const double>) { return p.a(); });
        within += v <= deviation_and_variance_budgets(cfg, p.lipschitz(), 2.0).psi_n;
    }
    const double frac = double(within) / R;
    EXPECT_GE(frac, 0.9 - 3 * std::sqrt(0.9 * 0.1 / R));
}
