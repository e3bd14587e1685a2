#include "l1zo/objectives.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace l1zo {

std::string_view to_string(Family family) {
    switch (family) {
        case Family::LinearNoise: return "linear-noise";
        case Family::ShiftedNorm: return "shifted-norm";
        case Family::MaxAffineNoise: return "max-affine-noise";
    }
    return "?";
}

Family family_from_string(std::string_view name) {
    if (name == "linear-noise" || name == "linear") return Family::LinearNoise;
    if (name == "shifted-norm") return Family::ShiftedNorm;
    if (name == "max-affine-noise" || name == "max-affine") return Family::MaxAffineNoise;
    throw std::invalid_argument("unknown problem family '" + std::string(name) + "'");
}

namespace {

Vec uniform_vec(Rng& rng, std::size_t d, double lo, double hi) {
    Vec v(d);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

void require_finite(std::span<const double> v, const std::string& what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw std::invalid_argument(what + " has a non-finite entry");
    }
}

}  // namespace

Problem::Problem(const ProblemSpec& spec) : family_(spec.family), d_(spec.d), sigma_(spec.sigma) {
    if (d_ == 0) throw std::invalid_argument("problem: d must be >= 1");
    if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) throw std::invalid_argument("problem: sigma must be >= 0");
    Rng rng(RngStream{spec.seed, 0xB0B, 0});
    const double noise_lip = sigma_ * std::sqrt(static_cast<double>(d_));

    switch (family_) {
        case Family::LinearNoise:
            a_ = spec.a.empty() ? uniform_vec(rng, d_, -1.0, 1.0) : spec.a;
            if (a_.size() != d_) throw std::invalid_argument("linear-noise: a must have length d");
            require_finite(a_, "linear-noise: a");
            lipschitz_ = norm2(a_) + noise_lip;
            break;
        case Family::ShiftedNorm:
            theta_ = spec.theta.empty() ? uniform_vec(rng, d_, -0.5, 0.5) : spec.theta;
            if (theta_.size() != d_) throw std::invalid_argument("shifted-norm: theta must have length d");
            require_finite(theta_, "shifted-norm: theta");
            lipschitz_ = 1.0;
            break;
        case Family::MaxAffineNoise: {
            if (spec.slopes.empty()) {
                if (spec.pieces == 0) throw std::invalid_argument("max-affine: need K >= 1 pieces");
                for (std::size_t k = 0; k < spec.pieces; ++k) slopes_.push_back(uniform_vec(rng, d_, -1.0, 1.0));
            } else {
                slopes_ = spec.slopes;
            }
            intercepts_ = spec.intercepts.empty() && spec.slopes.empty() ? uniform_vec(rng, slopes_.size(), -0.5, 0.5)
                                                                        : spec.intercepts;
            if (intercepts_.empty()) intercepts_.assign(slopes_.size(), 0.0);
            if (intercepts_.size() != slopes_.size()) {
                throw std::invalid_argument("max-affine: need one intercept per piece");
            }
            double max_norm = 0.0;
            for (const auto& s : slopes_) {
                if (s.size() != d_) throw std::invalid_argument("max-affine: every slope must have length d");
                require_finite(s, "max-affine: slope");
                max_norm = std::max(max_norm, norm2(s));
            }
            require_finite(intercepts_, "max-affine: intercepts");
            lipschitz_ = max_norm + noise_lip;
            break;
        }
    }
}

Problem make_problem(const ProblemSpec& spec) { return Problem(spec); }

void Problem::check_dim(std::span<const double> x, const char* what) const {
    if (x.size() != d_) {
        throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(d_) + ", got " +
                                    std::to_string(x.size()));
    }
}

Vec Problem::sample_context(Rng& rng) const {
    Vec c(d_, 0.0);
    if (sigma_ == 0.0) return c;
    for (auto& v : c) v = rng.uniform(-sigma_, sigma_);
    return c;
}

double Problem::max_affine(std::span<const double> x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < slopes_.size(); ++k) best = std::max(best, dot(slopes_[k], x) + intercepts_[k]);
    return best;
}

double Problem::eval_context(std::span<const double> c, std::span<const double> x) const {
    check_dim(x, "eval_context");
    check_dim(c, "eval_context (context)");
    switch (family_) {
        case Family::LinearNoise: {
            double s = 0.0;
            for (std::size_t i = 0; i < d_; ++i) s += (a_[i] + c[i]) * x[i];
            return s;
        }
        case Family::ShiftedNorm: {
            double s = 0.0;
            for (std::size_t i = 0; i < d_; ++i) {
                const double r = x[i] - theta_[i] - c[i];
                s += r * r;
            }
            return std::sqrt(s);
        }
        case Family::MaxAffineNoise: return max_affine(x) + dot(c, x);
    }
    return 0.0;
}

double Problem::eval_clean(std::span<const double> x) const {
    const Vec zero(d_, 0.0);
    return eval_context(zero, x);
}

double Problem::population_value(std::span<const double> x) const {
    check_dim(x, "population_value");
    switch (family_) {
        case Family::LinearNoise: return dot(a_, x);
        case Family::MaxAffineNoise: return max_affine(x);
        case Family::ShiftedNorm: {
            Vec v(d_);
            for (std::size_t i = 0; i < d_; ++i) v[i] = x[i] - theta_[i];
            return expected_shifted_norm(v, sigma_);
        }
    }
    return 0.0;
}

std::optional<Vec> Problem::exact_smoothed_gradient(std::span<const double> x) const {
    check_dim(x, "exact_smoothed_gradient");
    if (family_ == Family::LinearNoise) return a_;
    return std::nullopt;
}

namespace {

// log E exp(-t w^2) for w uniform on [v - s, v + s].
double log_gaussian_factor(double v, double s, double t) {
    if (s == 0.0) return -t * v * v;
    using Rule = boost::math::quadrature::gauss<double, 20>;
    const double rt = std::sqrt(t);
    if (s * rt <= 1.0) {
        // Interval narrow against the Gaussian width: smooth integrand.
        const double wmax = std::abs(v) + s;
        if (t * wmax * wmax < 1.0) {
            auto f = [t](double w) { return std::expm1(-t * w * w); };
            return std::log1p(Rule::integrate(f, v - s, v + s) / (2.0 * s));
        }
        auto f = [t](double w) { return std::exp(-t * w * w); };
        return std::log(Rule::integrate(f, v - s, v + s) / (2.0 * s));
    }
    const double hi = rt * (v + s);
    const double lo = rt * (v - s);
    double mass = 0.0;
    if (lo >= 0.0) {
        mass = std::erfc(lo) - std::erfc(hi);
    } else if (hi <= 0.0) {
        mass = std::erfc(-hi) - std::erfc(-lo);
    } else {
        mass = std::erf(hi) - std::erf(lo);
    }
    return std::log(std::sqrt(std::numbers::pi) / (4.0 * s * rt) * mass);
}

}  // namespace

double expected_shifted_norm(std::span<const double> v, double sigma) {
    if (sigma == 0.0) return norm2(v);
    double second_moment = 0.0;
    for (double x : v) second_moment += x * x + sigma * sigma / 3.0;

    auto integrand = [&](double u) -> double {
        const double t = u * u;
        // (1 - E e^{-tS}) / t -> E S as t -> 0.
        if (t * (1.0 + second_moment) < 1e-14) return second_moment;
        if (!std::isfinite(t)) return 0.0;
        double log_prod = 0.0;
        for (double x : v) log_prod += log_gaussian_factor(x, sigma, t);
        return -std::expm1(log_prod) / t;
    };
    double error = 0.0;
    const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-11, &error);
    return integral / std::sqrt(std::numbers::pi);
}

namespace {

// Central-cut ellipsoid method for a convex piecewise-linear objective. The
// ellipsoid is {x + B u : |u| <= 1}; updating the factor B keeps it positive
// definite in floating point. Stops once the certified gap f(best) - f* is
// below tol: every feasible centre x_k with subgradient g_k gives the lower
// bound f(x_k) - |B_k' g_k|.
Minimum ellipsoid_minimum(const FeasibleSet& set, const std::function<double(std::span<const double>)>& f,
                          const std::function<Vec(std::span<const double>)>& subgrad, double tol) {
    const std::size_t d = set.dim();
    const auto [lo, hi] = set.bounding_box();
    Vec x(d);
    double r2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        x[i] = 0.5 * (lo[i] + hi[i]);
        r2 += 0.25 * (hi[i] - lo[i]) * (hi[i] - lo[i]);
    }
    const double r = std::sqrt(r2) * 1.01 + 1e-9;
    std::vector<double> B(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) B[i * d + i] = r;

    Minimum best;
    best.value = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(d);
    const double grow = d == 1 ? 0.5 : n / std::sqrt(n * n - 1.0);
    const double a = d == 1 ? 0.0 : 1.0 - std::sqrt(1.0 - 2.0 / (n + 1.0));
    Vec g(d), u(d), Bu(d);
    for (int it = 0; it < 100000; ++it) {
        const bool feasible = set.contains(x, 0.0);
        double fx = 0.0;
        if (feasible) {
            fx = f(x);
            if (fx < best.value) {
                best.value = fx;
                best.x = x;
            }
            g = subgrad(x);
        } else {
            const Vec px = project(set, x);
            for (std::size_t i = 0; i < d; ++i) g[i] = x[i] - px[i];
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            u[j] = 0.0;
            for (std::size_t i = 0; i < d; ++i) u[j] += B[i * d + j] * g[i];
            norm += u[j] * u[j];
        }
        norm = std::sqrt(norm);
        if (feasible) {
            lower = std::max(lower, fx - norm);
            if (best.value - lower <= tol) break;
        }
        if (!(norm > 0.0)) break;
        for (auto& v : u) v /= norm;
        for (std::size_t i = 0; i < d; ++i) {
            Bu[i] = 0.0;
            for (std::size_t j = 0; j < d; ++j) Bu[i] += B[i * d + j] * u[j];
            x[i] -= Bu[i] / (n + 1.0);
        }
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) B[i * d + j] = grow * (B[i * d + j] - a * Bu[i] * u[j]);
    }
    if (!std::isfinite(best.value)) {
        Vec c = set.center();
        return {c, f(c), false};
    }
    return {best.x, best.value, best.value - lower <= tol};
}

}  // namespace

Minimum grid_refine_minimum(const FeasibleSet& set, const std::function<double(std::span<const double>)>& f,
                            double tol) {
    const std::size_t d = set.dim();
    if (d > 4) throw std::invalid_argument("grid refinement minimiser is limited to d <= 4 (got d = " + std::to_string(d) + ")");
    const std::size_t points = d <= 2 ? 41 : 11;
    auto [box_lo, box_hi] = set.bounding_box();
    Vec lo = box_lo, hi = box_hi;

    Minimum best;
    best.value = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx(d);
    Vec probe(d);
    for (;;) {
        std::fill(idx.begin(), idx.end(), 0);
        Vec local_best;
        for (bool done = false; !done;) {
            for (std::size_t i = 0; i < d; ++i) {
                probe[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(idx[i]) / static_cast<double>(points - 1);
            }
            Vec x = project(set, probe);
            const double fx = f(x);
            if (fx < best.value) {
                best.value = fx;
                best.x = x;
            }
            done = true;
            for (std::size_t i = 0; i < d; ++i) {
                if (++idx[i] < points) {
                    done = false;
                    break;
                }
                idx[i] = 0;
            }
        }
        double width = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double cell = (hi[i] - lo[i]) / static_cast<double>(points - 1);
            width = std::max(width, cell);
            lo[i] = std::max(box_lo[i], best.x[i] - 2.0 * cell);
            hi[i] = std::min(box_hi[i], best.x[i] + 2.0 * cell);
        }
        if (width < tol) break;
    }
    return best;
}

Minimum minimizer(const Problem& p, const FeasibleSet& set) {
    if (p.dim() != set.dim()) throw std::invalid_argument("minimizer: problem and set dimensions differ");
    const std::size_t d = p.dim();
    switch (p.family()) {
        case Family::LinearNoise: {
            const Vec& a = p.a();
            Vec x(d);
            switch (set.kind()) {
                case SetKind::Box:
                    for (std::size_t i = 0; i < d; ++i) {
                        x[i] = a[i] > 0.0 ? set.lower()[i] : a[i] < 0.0 ? set.upper()[i] : set.center()[i];
                    }
                    break;
                case SetKind::EuclideanBall: {
                    const double na = norm2(a);
                    for (std::size_t i = 0; i < d; ++i) {
                        x[i] = set.center()[i] - (na > 0.0 ? set.radius() * a[i] / na : 0.0);
                    }
                    break;
                }
                case SetKind::L1Ball: {
                    x = set.center();
                    std::size_t k = 0;
                    for (std::size_t i = 1; i < d; ++i) {
                        if (std::abs(a[i]) > std::abs(a[k])) k = i;
                    }
                    if (a[k] != 0.0) x[k] -= set.radius() * sign_of(a[k]);
                    break;
                }
            }
            return {x, p.population_value(x), true};
        }
        case Family::ShiftedNorm: {
            // E|x - theta - c| is convex and symmetric about theta in each
            // coordinate, so it is minimised at theta when feasible and, over
            // a box, at the coordinatewise clamp of theta.
            if (p.sigma() == 0.0 || set.contains(p.theta(), 0.0) || set.kind() == SetKind::Box) {
                Vec x = project(set, p.theta());
                return {x, p.population_value(x), true};
            }
            return grid_refine_minimum(set, [&p](std::span<const double> x) { return p.population_value(x); });
        }
        case Family::MaxAffineNoise: {
            // The noise has mean zero, so f is the clean max of affine pieces.
            const auto subgrad = [&p](std::span<const double> x) {
                std::size_t k_best = 0;
                double v_best = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < p.slopes().size(); ++k) {
                    const double v = dot(p.slopes()[k], x) + p.intercepts()[k];
                    if (v > v_best) {
                        v_best = v;
                        k_best = k;
                    }
                }
                return p.slopes()[k_best];
            };
            return ellipsoid_minimum(
                set, [&p](std::span<const double> x) { return p.population_value(x); }, subgrad, 1e-10);
        }
    }
    return {};
}

}  // namespace l1zo
