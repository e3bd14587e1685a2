#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "l1zo/l1_geometry.hpp"
#include "l1zo/rng.hpp"
#include "l1zo/vec.hpp"

namespace l1zo {

enum class Family { LinearNoise, ShiftedNorm, MaxAffineNoise };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);

/// Parameters of a problem family. Vectors left empty are drawn from `seed`.
struct ProblemSpec {
    Family family = Family::ShiftedNorm;
    std::size_t d = 1;
    double sigma = 0.0;         ///< contexts are uniform on [-sigma, sigma]^d
    Vec a;                      ///< linear-noise slope
    Vec theta;                  ///< shifted-norm center
    std::vector<Vec> slopes;    ///< max-affine a_k
    Vec intercepts;             ///< max-affine b_k
    std::size_t pieces = 3;     ///< K when the max-affine pieces are generated
    std::uint64_t seed = 0;
};

/// Absolute accuracy of the shifted-norm population expectation.
inline constexpr double kPopulationTolerance = 1e-6;

/// A contextual convex Lipschitz family f_c with its population objective
/// f(x) = E_c f_c(x). Immutable after construction.
///
///   linear-noise     f_c(x) = <a + c, x>                     L = |a| + sigma sqrt(d)
///   shifted-norm     f_c(x) = |x - theta - c|                L = 1
///   max-affine-noise f_c(x) = max_k(<a_k, x> + b_k) + <c, x> L = max_k |a_k| + sigma sqrt(d)
class Problem {
public:
    explicit Problem(const ProblemSpec& spec);

    Family family() const { return family_; }
    std::size_t dim() const { return d_; }
    double lipschitz() const { return lipschitz_; }
    double sigma() const { return sigma_; }
    const Vec& a() const { return a_; }
    const Vec& theta() const { return theta_; }
    const std::vector<Vec>& slopes() const { return slopes_; }
    const Vec& intercepts() const { return intercepts_; }

    /// Context c uniform on [-sigma, sigma]^d. Consumes exactly d uniforms
    /// from the stream (none when sigma == 0).
    Vec sample_context(Rng& rng) const;

    /// f_c(x) for an explicit context.
    double eval_context(std::span<const double> c, std::span<const double> x) const;

    /// f_0(x): the family member with a zero context.
    double eval_clean(std::span<const double> x) const;

    /// E_c f_c(x). Closed form for the linear and max-affine families; for the
    /// shifted norm a one-dimensional quadrature accurate to kPopulationTolerance.
    double population_value(std::span<const double> x) const;

    /// Analytic gradient of the smoothed surrogate when it is known exactly
    /// (linear-noise: the slope a, for every h). Empty otherwise.
    std::optional<Vec> exact_smoothed_gradient(std::span<const double> x) const;

private:
    void check_dim(std::span<const double> x, const char* what) const;
    double max_affine(std::span<const double> x) const;

    Family family_;
    std::size_t d_;
    double sigma_;
    double lipschitz_ = 0.0;
    Vec a_, theta_, intercepts_;
    std::vector<Vec> slopes_;
};

Problem make_problem(const ProblemSpec& spec);

/// E |v - c| for c uniform on [-sigma, sigma]^d.
///
/// Uses sqrt(s) = pi^{-1/2} * int_0^inf (1 - exp(-s u^2)) / u^2 du. The
/// expectation of exp(-u^2 |v - c|^2) factorises over coordinates and each
/// factor has a closed form in erf, leaving one smooth integral over u.
double expected_shifted_norm(std::span<const double> v, double sigma);

struct Minimum {
    Vec x;
    double value = 0.0;
    bool exact = false;  ///< analytic, or certified within 1e-10; false for grid refinement
};

/// Minimiser of the population objective over the set. Analytic for linear
/// objectives and for the shifted norm when theta is feasible, sigma == 0 or
/// the set is a box; otherwise grid refinement, which is limited to d <= 4.
/// The max-affine family uses an ellipsoid method with a certified gap.
Minimum minimizer(const Problem& p, const FeasibleSet& set);

/// Brute-force grid refinement of a convex function over the set.
/// Throws for d > 4.
Minimum grid_refine_minimum(const FeasibleSet& set, const std::function<double(std::span<const double>)>& f,
                            double tol = 1e-7);

}  // namespace l1zo
