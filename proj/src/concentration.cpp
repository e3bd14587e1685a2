#include "l1zo/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "l1zo/l1_geometry.hpp"
#include "l1zo/parallel.hpp"
#include "l1zo/zo_estimator.hpp"
#include "moments.hpp"

namespace l1zo {

std::string_view to_string(EnvelopeKind kind) {
    switch (kind) {
        case EnvelopeKind::Ratio: return "ratio";
        case EnvelopeKind::Avg: return "avg";
        case EnvelopeKind::AvgSqrt: return "avg-sqrt";
        case EnvelopeKind::Lipschitz: return "lipschitz";
        case EnvelopeKind::NormToAvg: return "norm-to-avg";
    }
    return "?";
}

EnvelopeKind envelope_kind_from_string(std::string_view name) {
    for (auto k : {EnvelopeKind::Ratio, EnvelopeKind::Avg, EnvelopeKind::AvgSqrt, EnvelopeKind::Lipschitz,
                   EnvelopeKind::NormToAvg}) {
        if (name == to_string(k)) return k;
    }
    throw std::invalid_argument("unknown envelope kind '" + std::string(name) +
                                "' (expected ratio, avg, avg-sqrt, lipschitz or norm-to-avg)");
}

bool needs_test_function(EnvelopeKind kind) {
    return kind == EnvelopeKind::Lipschitz || kind == EnvelopeKind::NormToAvg;
}

double envelope_raw(EnvelopeKind kind, double r, std::size_t d) {
    if (!(r > 0.0) || !std::isfinite(r)) throw std::domain_error("envelope: r must be positive and finite");
    if (d < 1) throw std::domain_error("envelope: d must be >= 1");
    const double dd = static_cast<double>(d);
    switch (kind) {
        case EnvelopeKind::Ratio:
            if (d < 2) throw std::domain_error("envelope(ratio): needs d >= 2");
            if (r < 16.0 / std::sqrt(dd)) throw std::domain_error("envelope(ratio): needs r >= 16/sqrt(d)");
            return 17.1 * std::exp(-0.011 * r * dd);
        case EnvelopeKind::Avg: return 2.0 * std::exp(-dd * std::min(r, r * r) / 16.0);
        case EnvelopeKind::AvgSqrt: return 2.0 * std::exp(-std::sqrt(dd) * r / 16.0);
        case EnvelopeKind::Lipschitz: return 361.0 * std::exp(-0.003 * r * dd);
        case EnvelopeKind::NormToAvg:
            if (r > 2.0) throw std::domain_error("envelope(norm-to-avg): needs r <= 2");
            return 88.0 * std::exp(-0.018 * r * dd);
    }
    throw std::domain_error("envelope: unknown kind");
}

double envelope(EnvelopeKind kind, double r, std::size_t d) { return std::min(1.0, envelope_raw(kind, r, d)); }

std::string_view to_string(TestFunction f) {
    switch (f) {
        case TestFunction::Norm2: return "norm2";
        case TestFunction::FirstCoord: return "first";
        case TestFunction::MaxCoord: return "max";
    }
    return "?";
}

TestFunction test_function_from_string(std::string_view name) {
    for (auto f : {TestFunction::Norm2, TestFunction::FirstCoord, TestFunction::MaxCoord}) {
        if (name == to_string(f)) return f;
    }
    throw std::invalid_argument("unknown test function '" + std::string(name) + "' (expected norm2, first or max)");
}

double evaluate(TestFunction f, std::span<const double> z) {
    switch (f) {
        case TestFunction::Norm2: return norm2(z);
        case TestFunction::FirstCoord: return z[0];
        case TestFunction::MaxCoord: return *std::max_element(z.begin(), z.end());
    }
    return 0.0;
}

std::vector<TailPoint> empirical_tail(std::span<const double> samples, std::span<const double> r_grid) {
    if (samples.empty()) throw std::invalid_argument("empirical_tail: samples must be non-empty");
    if (!std::is_sorted(r_grid.begin(), r_grid.end())) {
        throw std::invalid_argument("empirical_tail: r grid must be sorted ascending");
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    std::vector<TailPoint> out;
    out.reserve(r_grid.size());
    for (double r : r_grid) {
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), r);
        const double p = static_cast<double>(above) / n;
        out.push_back({r, p, std::sqrt(p * (1.0 - p) / n)});
    }
    return out;
}

namespace {

// Below this value the grid is not extended further.
constexpr double kGridFloor = 1e-4;

double grid_upper(EnvelopeKind kind, double lo, std::size_t d) {
    const double dd = static_cast<double>(d);
    double r = 0.0;
    switch (kind) {
        case EnvelopeKind::Ratio: r = std::log(17.1 / kGridFloor) / (0.011 * dd); break;
        case EnvelopeKind::Avg: {
            const double t = 16.0 * std::log(2.0 / kGridFloor) / dd;
            r = t >= 1.0 ? t : std::sqrt(t);
            break;
        }
        case EnvelopeKind::AvgSqrt: r = 16.0 * std::log(2.0 / kGridFloor) / std::sqrt(dd); break;
        case EnvelopeKind::Lipschitz: r = std::log(361.0 / kGridFloor) / (0.003 * dd); break;
        case EnvelopeKind::NormToAvg: return 2.0;
    }
    return std::max(r, 2.0 * lo);
}

// Statistic for one Laplace draw; `mean` is only used by the lipschitz kind.
double statistic(EnvelopeKind kind, TestFunction f, const Vec& x, double S, double mean) {
    const double d = static_cast<double>(x.size());
    Vec z(x.size());
    switch (kind) {
        case EnvelopeKind::Ratio: return norm2(x) / S;
        case EnvelopeKind::Avg:
        case EnvelopeKind::AvgSqrt: return std::abs(S / d - 1.0);
        case EnvelopeKind::Lipschitz:
            for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] / S;
            return std::abs(evaluate(f, z) - mean);
        case EnvelopeKind::NormToAvg: {
            Vec w(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                z[i] = x[i] / S;
                w[i] = x[i] / d;
            }
            return std::abs(evaluate(f, z) - evaluate(f, w));
        }
    }
    return 0.0;
}

// Fills out[s] with g(x_s, S_s) for N Laplace vectors, chunked over substreams.
template <class G>
void laplace_batch(std::size_t d, std::size_t N, const RngStream& stream, std::uint64_t offset, unsigned threads,
                   std::vector<double>& out, G&& g) {
    out.assign(N, 0.0);
    const std::size_t chunks = (N + kMonteCarloChunk - 1) / kMonteCarloChunk;
    parallel_for(chunks, threads, [&](std::size_t k) {
        Rng rng(substream(stream, offset + k));
        Vec x(d);
        const std::size_t end = std::min(N, (k + 1) * kMonteCarloChunk);
        for (std::size_t s = k * kMonteCarloChunk; s < end; ++s) {
            double S = 0.0;
            do {
                S = 0.0;
                for (auto& v : x) {
                    v = sample_laplace(rng);
                    S += std::abs(v);
                }
            } while (S == 0.0);
            out[s] = g(x, S);
        }
    });
}

constexpr std::uint64_t kMeanBatchOffset = std::uint64_t{1} << 32;

}  // namespace

std::vector<double> tail_grid(EnvelopeKind kind, std::size_t d) {
    if (d < 1) throw std::invalid_argument("tail grid: d must be >= 1");
    if (kind == EnvelopeKind::Ratio && d < 2) {
        throw std::invalid_argument("ratio tails need d >= 2; for d = 1 the ratio is identically 1 and the admissible "
                                    "range r >= 16 is empty");
    }
    const double lo = kind == EnvelopeKind::Ratio ? 16.0 / std::sqrt(static_cast<double>(d)) : 1e-3;
    const double hi = grid_upper(kind, lo, d);
    std::vector<double> grid(kTailGridPoints);
    const double step = std::log(hi / lo) / static_cast<double>(kTailGridPoints - 1);
    for (std::size_t i = 0; i < kTailGridPoints; ++i) grid[i] = lo * std::exp(step * static_cast<double>(i));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

TailReport tail_experiment(EnvelopeKind kind, std::size_t d, std::size_t samples, std::optional<TestFunction> f,
                           const RngStream& stream, unsigned threads) {
    if (samples < kMinTailSamples) {
        throw std::invalid_argument("N: tail experiments need at least " + std::to_string(kMinTailSamples) +
                                    " samples (got " + std::to_string(samples) + ")");
    }
    const std::vector<double> grid = tail_grid(kind, d);
    const TestFunction fn = f.value_or(TestFunction::Norm2);

    TailReport report;
    report.kind = kind;
    report.d = d;
    report.samples = samples;
    if (needs_test_function(kind)) report.function = fn;
    report.stream = stream;

    double mean = 0.0;
    if (kind == EnvelopeKind::Lipschitz) {
        std::vector<double> values;
        laplace_batch(d, samples, stream, kMeanBatchOffset, threads, values, [&](const Vec& x, double S) {
            Vec z(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] / S;
            return evaluate(fn, z);
        });
        const double n = static_cast<double>(samples);
        mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        report.mean_std_error = std::sqrt(ss / (n - 1.0) / n);
    }

    std::vector<double> stats;
    laplace_batch(d, samples, stream, 0, threads, stats,
                  [&](const Vec& x, double S) { return statistic(kind, fn, x, S, mean); });

    const std::vector<TailPoint> tail = empirical_tail(stats, grid);
    // |f - E f| > r holds whenever |f - mean| > r + |mean - E f|, so the tail
    // at r + 3 SE(mean) is a conservative stand-in for the exact-mean tail.
    std::vector<TailPoint> shifted = tail;
    if (report.mean_std_error > 0.0) {
        std::vector<double> g2(grid);
        for (auto& r : g2) r += 3.0 * report.mean_std_error;
        shifted = empirical_tail(stats, g2);
    }

    report.grid.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        TailGridRow row;
        row.r = grid[i];
        row.empirical = tail[i].fraction;
        row.std_error = tail[i].std_error;
        row.envelope_raw = envelope_raw(kind, grid[i], d);
        row.envelope = std::min(1.0, row.envelope_raw);
        row.counted = row.envelope_raw < 1.0;
        row.violated = row.counted && shifted[i].fraction - 3.0 * shifted[i].std_error > row.envelope;
        if (row.violated) ++report.violations;
        report.grid.push_back(row);
    }
    return report;
}

SubGammaBoundary::SubGammaBoundary(double c_, double rho_, double delta_) : c(c_), rho(rho_), delta(delta_) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("boundary c: must be >= 0");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("boundary rho: must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("boundary delta: must lie in (0, 1)");
}

double SubGammaBoundary::operator()(double V) const {
    if (!(V >= 0.0)) throw std::invalid_argument("boundary: V must be >= 0");
    const double H = std::log1p(V / (rho * rho)) + 2.0;
    const double ell = std::log(H / delta);
    return 4.0 * std::sqrt(V * ell) + 11.0 * (c + rho) * ell;
}

double subgamma_boundary(const SubGammaBoundary& b, double V) { return b(V); }

std::string_view to_string(IncrementLaw law) {
    return law == IncrementLaw::BoundedSymmetric ? "bounded-symmetric" : "centered-gamma";
}

IncrementLaw increment_law_from_string(std::string_view name) {
    if (name == "bounded-symmetric") return IncrementLaw::BoundedSymmetric;
    if (name == "centered-gamma") return IncrementLaw::CenteredGamma;
    throw std::invalid_argument("unknown increment law '" + std::string(name) +
                                "' (expected bounded-symmetric or centered-gamma)");
}

// Bounded-symmetric: X = +-sqrt(v) with equal probability, so |X| <= b with
// b = sqrt(v). Bernstein's inequality for a mean-zero variable bounded by b
// gives log E exp(lambda X) <= v lambda^2 / (2 (1 - b lambda / 3)), i.e.
// scale c = b / 3 on both tails.
//
// Centered gamma: X = G - k theta with G ~ Gamma(k, theta), k = v / theta^2.
// With u = theta lambda < 1,
//   log E exp(lambda X) = k (-log(1 - u) - u) <= k u^2 / (2 (1 - u))
//                       = v lambda^2 / (2 (1 - theta lambda)),
// using -log(1-u) - u = sum_{j>=2} u^j / j <= (u^2/2) sum_{j>=0} u^j. The
// lower tail has k (u - log(1 + u)) <= k u^2 / 2, which is smaller. So the
// scale is theta, taken from the spec.
double certified_scale(const MartingaleSpec& spec) {
    if (!(spec.variance >= 0.0) || !std::isfinite(spec.variance)) {
        throw std::invalid_argument("martingale variance: must be >= 0");
    }
    if (spec.law == IncrementLaw::BoundedSymmetric) return std::sqrt(spec.variance) / 3.0;
    if (spec.variance > 0.0 && !(spec.scale > 0.0)) {
        throw std::invalid_argument("martingale scale: centered-gamma increments need scale > 0");
    }
    return spec.scale;
}

CoverageResult boundary_coverage_experiment(const MartingaleSpec& spec, const SubGammaBoundary& b) {
    const double need = certified_scale(spec);
    if (need > spec.scale * (1.0 + 1e-12)) {
        throw std::invalid_argument("martingale scale: declared " + std::to_string(spec.scale) +
                                    " is below the certified sub-gamma scale " + std::to_string(need));
    }
    if (need > b.c * (1.0 + 1e-12)) {
        throw std::invalid_argument("boundary c: " + std::to_string(b.c) +
                                    " is below the increments' sub-gamma scale " + std::to_string(need));
    }
    if (spec.steps < 1) throw std::invalid_argument("martingale steps: must be >= 1");
    if (spec.replications < 1) throw std::invalid_argument("martingale replications: must be >= 1");

    std::vector<double> limit(spec.steps);
    for (std::size_t t = 0; t < spec.steps; ++t) limit[t] = b(static_cast<double>(t + 1) * spec.variance);

    const double amplitude = std::sqrt(spec.variance);
    const double theta = spec.scale;
    const double shape = spec.variance > 0.0 ? spec.variance / (theta * theta) : 0.0;
    const RngStream root{spec.seed, 0x3A27, 0};

    std::vector<char> crossed(spec.replications, 0);
    parallel_for(spec.replications, spec.threads, [&](std::size_t r) {
        if (spec.variance == 0.0) return;
        Rng rng(substream(root, r));
        double S = 0.0;
        for (std::size_t t = 0; t < spec.steps; ++t) {
            if (spec.law == IncrementLaw::BoundedSymmetric) {
                S += (rng() >> 63) ? amplitude : -amplitude;
            } else {
                S += theta * (rng.gamma(shape) - shape);
            }
            if (std::abs(S) > limit[t]) {
                crossed[r] = 1;
                return;
            }
        }
    });

    CoverageResult out;
    out.crossings = static_cast<std::size_t>(std::count(crossed.begin(), crossed.end(), 1));
    const double R = static_cast<double>(spec.replications);
    out.fraction = static_cast<double>(out.crossings) / R;
    out.std_error = std::sqrt(out.fraction * (1.0 - out.fraction) / R);
    return out;
}

double p_moment_bound(int p, std::size_t d, double L) {
    const double pf = std::tgamma(static_cast<double>(p) + 1.0);
    return std::pow(2.0 * L, p) / 2.0 *
           (361.0 * pf * std::pow(std::sqrt(static_cast<double>(d)) / 0.003, p) + 1.0);
}

double second_moment_bound(std::size_t d, double L) {
    const double k = 1.0 + std::sqrt(2.0);
    return 18.0 * k * k * L * L * static_cast<double>(d);
}

double centered_second_moment_bound(std::size_t d, double L) { return 211.0 * L * L * static_cast<double>(d); }

MomentReport moment_check(int p, std::size_t d, double h, double L, std::size_t samples, const Problem& problem,
                          const RngStream& stream, unsigned threads) {
    if (p < 2 || p > 8) throw std::invalid_argument("p: must lie in [2, 8]");
    if (samples < kMinMomentSamples) {
        throw std::invalid_argument("N: moment checks need at least " + std::to_string(kMinMomentSamples) +
                                    " samples");
    }
    if (problem.dim() != d) throw std::invalid_argument("d: must equal the problem dimension");
    if (!(h > 0.0)) throw std::invalid_argument("h: must be > 0");
    if (!(L >= 0.0)) throw std::invalid_argument("L: must be >= 0");

    MomentReport rep;
    rep.p = p;
    rep.d = d;
    rep.h = h;
    rep.L = L;
    rep.samples = samples;
    rep.p_bound = p_moment_bound(p, d, L);
    rep.second_bound = second_moment_bound(d, L);
    rep.centered_second_bound = centered_second_moment_bound(d, L);
    rep.passed = true;

    Rng point_rng(substream(stream, 0));
    for (int i = 0; i < 3; ++i) {
        MomentPoint pt;
        pt.x.resize(d);
        for (auto& v : pt.x) v = point_rng.uniform(-1.0, 1.0);

        if (auto exact = problem.exact_smoothed_gradient(pt.x)) {
            pt.smoothed_gradient = std::move(*exact);
        } else {
            const SmoothedOracle oracle(problem, h, samples, true, threads);
            pt.smoothed_gradient = smoothed_grad_mc(oracle, pt.x, substream(stream, 100 + i)).estimate;
        }

        const auto m = detail::chunked_moments(samples, 3, threads, substream(stream, 200 + i),
                                               [&](Rng& rng, Vec& out) {
                                                   const Vec g = sample_grad_estimate(problem, pt.x, h, rng).vector;
                                                   const double dist = distance2(g, pt.smoothed_gradient);
                                                   const double c2 = dist * dist;
                                                   out[0] = std::pow(dist, p);
                                                   out[1] = norm2_sq(g);
                                                   out[2] = c2;
                                               });
        const Vec se = m.std_error();
        pt.centered_p_moment = m.mean[0];
        pt.centered_p_std_error = se[0];
        pt.second_moment = m.mean[1];
        pt.second_std_error = se[1];
        pt.centered_second = m.mean[2];

        const bool ok = pt.centered_p_moment - 3.0 * se[0] <= rep.p_bound &&
                        pt.second_moment - 3.0 * se[1] <= rep.second_bound &&
                        pt.centered_second - 3.0 * se[2] <= rep.centered_second_bound;
        rep.passed = rep.passed && ok;
        rep.points.push_back(std::move(pt));
    }
    return rep;
}

}  // namespace l1zo
