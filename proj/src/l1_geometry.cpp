#include "l1zo/l1_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace l1zo {

L1Direction::L1Direction(Vec coords) : coords_(std::move(coords)) {
    if (coords_.empty()) throw std::invalid_argument("L1Direction: dimension must be >= 1");
    const double s = norm1(coords_);
    if (!(std::abs(s - 1.0) <= 1e-12)) {
        throw std::invalid_argument("L1Direction: l1 norm is " + std::to_string(s) + ", expected 1");
    }
}

std::string_view to_string(SetKind kind) {
    switch (kind) {
        case SetKind::Box: return "box";
        case SetKind::EuclideanBall: return "euclidean-ball";
        case SetKind::L1Ball: return "l1-ball";
    }
    return "?";
}

SetKind set_kind_from_string(std::string_view name) {
    if (name == "box") return SetKind::Box;
    if (name == "euclidean-ball") return SetKind::EuclideanBall;
    if (name == "l1-ball") return SetKind::L1Ball;
    throw std::invalid_argument("unknown feasible set kind '" + std::string(name) + "'");
}

FeasibleSet FeasibleSet::box(Vec lower, Vec upper) {
    if (lower.empty()) throw std::invalid_argument("box: dimension must be >= 1");
    if (lower.size() != upper.size()) throw std::invalid_argument("box: lower/upper dimension mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
            throw std::invalid_argument("box: need finite lower < upper in coordinate " + std::to_string(i));
        }
    }
    FeasibleSet s;
    s.kind_ = SetKind::Box;
    s.dim_ = lower.size();
    s.center_.resize(s.dim_);
    for (std::size_t i = 0; i < s.dim_; ++i) s.center_[i] = 0.5 * (lower[i] + upper[i]);
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
}

FeasibleSet FeasibleSet::euclidean_ball(Vec center, double radius) {
    if (center.empty()) throw std::invalid_argument("euclidean-ball: dimension must be >= 1");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("euclidean-ball: radius must be > 0");
    FeasibleSet s;
    s.kind_ = SetKind::EuclideanBall;
    s.dim_ = center.size();
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
}

FeasibleSet FeasibleSet::l1_ball(Vec center, double radius) {
    if (center.empty()) throw std::invalid_argument("l1-ball: dimension must be >= 1");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("l1-ball: radius must be > 0");
    FeasibleSet s;
    s.kind_ = SetKind::L1Ball;
    s.dim_ = center.size();
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
}

double FeasibleSet::diameter() const {
    switch (kind_) {
        case SetKind::Box: return distance2(lower_, upper_);
        // Both balls: the farthest pair is c + r e and c - r e.
        case SetKind::EuclideanBall:
        case SetKind::L1Ball: return 2.0 * radius_;
    }
    return 0.0;
}

bool FeasibleSet::contains(std::span<const double> x, double tol) const {
    if (x.size() != dim_) return false;
    switch (kind_) {
        case SetKind::Box:
            for (std::size_t i = 0; i < dim_; ++i) {
                if (x[i] < lower_[i] - tol || x[i] > upper_[i] + tol) return false;
            }
            return true;
        case SetKind::EuclideanBall: return distance2(x, center_) <= radius_ + tol;
        case SetKind::L1Ball: {
            double s = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) s += std::abs(x[i] - center_[i]);
            return s <= radius_ + tol;
        }
    }
    return false;
}

std::pair<Vec, Vec> FeasibleSet::bounding_box() const {
    if (kind_ == SetKind::Box) return {lower_, upper_};
    Vec lo(center_), hi(center_);
    for (std::size_t i = 0; i < dim_; ++i) {
        lo[i] -= radius_;
        hi[i] += radius_;
    }
    return {lo, hi};
}

double laplace_from_uniform(double u) {
    const double c = u - 0.5;
    if (c == 0.0) return 0.0;
    const double mag = -std::log1p(-2.0 * std::abs(c));
    return c > 0.0 ? mag : -mag;
}

double sample_laplace(Rng& rng) { return laplace_from_uniform(rng.uniform()); }

L1Direction sample_l1_sphere(std::size_t d, Rng& rng, double& l1_norm_out) {
    if (d == 0) throw std::invalid_argument("sample_l1_sphere: d must be >= 1");
    Vec x(d);
    double s = 0.0;
    do {
        s = 0.0;
        for (auto& v : x) {
            v = sample_laplace(rng);
            s += std::abs(v);
        }
    } while (s == 0.0);
    l1_norm_out = s;
    for (auto& v : x) v /= s;
    return L1Direction(std::move(x));
}

L1Direction sample_l1_sphere(std::size_t d, Rng& rng) {
    double s = 0.0;
    return sample_l1_sphere(d, rng, s);
}

Vec sample_l1_ball(std::size_t d, Rng& rng) {
    const L1Direction zeta = sample_l1_sphere(d, rng);
    const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    Vec u(zeta.coords().begin(), zeta.coords().end());
    for (auto& v : u) v *= radius;
    return u;
}

Vec sign_vec(std::span<const double> x) {
    Vec s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s[i] = sign_of(x[i]);
    return s;
}

Vec project_l1_ball(std::span<const double> x, std::span<const double> center, double radius) {
    require_same_size(x, center, "project_l1_ball");
    const std::size_t n = x.size();
    Vec diff(n);
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = x[i] - center[i];
        l1 += std::abs(diff[i]);
    }
    if (l1 <= radius * (1.0 + 1e-12)) return Vec(x.begin(), x.end());

    // Find the soft threshold theta with sum_i max(|diff_i| - theta, 0) = radius.
    Vec mags(n);
    for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(diff[i]);
    std::sort(mags.begin(), mags.end(), std::greater<>());
    double cumsum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cumsum += mags[j];
        const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
        if (mags[j] - candidate > 0.0) theta = candidate;
    }
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = center[i] + sign_of(diff[i]) * std::max(std::abs(diff[i]) - theta, 0.0);
    }
    return out;
}

Vec project(const FeasibleSet& set, std::span<const double> x) {
    if (x.size() != set.dim()) {
        throw std::invalid_argument("project: point has dimension " + std::to_string(x.size()) + ", set has " +
                                    std::to_string(set.dim()));
    }
    switch (set.kind()) {
        case SetKind::Box: {
            Vec out(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], set.lower()[i], set.upper()[i]);
            return out;
        }
        case SetKind::EuclideanBall: {
            const double dist = distance2(x, set.center());
            if (dist <= set.radius() * (1.0 + 1e-12)) return Vec(x.begin(), x.end());
            const double scale = set.radius() / dist;
            Vec out(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                out[i] = set.center()[i] + (x[i] - set.center()[i]) * scale;
            }
            return out;
        }
        case SetKind::L1Ball: return project_l1_ball(x, set.center(), set.radius());
    }
    return Vec(x.begin(), x.end());
}

}  // namespace l1zo
