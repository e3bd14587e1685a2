#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "l1zo/rng.hpp"
#include "l1zo/vec.hpp"

namespace l1zo {

/// A point on the unit l1 sphere: sum |coords_i| == 1.
class L1Direction {
public:
    /// Validates the l1 normalisation (1e-12 relative) and d >= 1.
    explicit L1Direction(Vec coords);

    std::span<const double> coords() const { return coords_; }
    std::size_t dim() const { return coords_.size(); }
    double operator[](std::size_t i) const { return coords_[i]; }

private:
    Vec coords_;
};

enum class SetKind { Box, EuclideanBall, L1Ball };

std::string_view to_string(SetKind kind);
SetKind set_kind_from_string(std::string_view name);

/// Convex compact feasible set. Boxes use lower/upper; the two balls use
/// center/radius.
class FeasibleSet {
public:
    static FeasibleSet box(Vec lower, Vec upper);
    static FeasibleSet euclidean_ball(Vec center, double radius);
    static FeasibleSet l1_ball(Vec center, double radius);

    SetKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    const Vec& lower() const { return lower_; }
    const Vec& upper() const { return upper_; }
    const Vec& center() const { return center_; }
    double radius() const { return radius_; }

    /// Exact Euclidean diameter of the set.
    double diameter() const;

    bool contains(std::span<const double> x, double tol = 1e-9) const;

    /// Axis-aligned bounding box, as (lower, upper).
    std::pair<Vec, Vec> bounding_box() const;

private:
    FeasibleSet() = default;

    SetKind kind_ = SetKind::Box;
    std::size_t dim_ = 0;
    Vec lower_, upper_, center_;
    double radius_ = 0.0;
};

/// One standard Laplace draw (density exp(-|x|)/2) by inverse CDF.
double laplace_from_uniform(double u);
double sample_laplace(Rng& rng);

/// Uniform draw on the unit l1 sphere: a Laplace vector divided by its l1
/// norm. Resamples in the (probability zero) event that the norm is 0.
L1Direction sample_l1_sphere(std::size_t d, Rng& rng);

/// Same as above, but also reports the normalising l1 norm S of the Laplace
/// vector (independent of the direction).
L1Direction sample_l1_sphere(std::size_t d, Rng& rng, double& l1_norm_out);

/// Uniform draw in the unit l1 ball via radial scaling W^{1/d} * zeta.
Vec sample_l1_ball(std::size_t d, Rng& rng);

/// Componentwise sign with sign(0) = +1 (negative zero included).
Vec sign_vec(std::span<const double> x);

inline double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

/// Euclidean projection onto the set. Points already inside the set (up to
/// a relative 1e-12 slack for the balls) are returned unchanged, which makes
/// the map exactly idempotent.
Vec project(const FeasibleSet& set, std::span<const double> x);

/// Euclidean projection onto {y : ||y - center||_1 <= radius} by sorting and
/// soft-thresholding.
Vec project_l1_ball(std::span<const double> x, std::span<const double> center, double radius);

}  // namespace l1zo
