#pragma once

#include <span>
#include <vector>

#include "straintc/degrade.hpp"
#include "straintc/stack.hpp"

namespace straintc {

/// Natural cubic spline. On interval m, [knot_m, knot_{m+1}),
///
///   s_m(t) = a_m (t - t_m)^3 + b_m (t - t_m)^2 + c_m (t - t_m) + d_m
///
/// with d_m the value at knot m and zero curvature at both ends.
class CubicSpline {
  public:
    struct Piece {
        double a, b, c, d;
    };

    /// Throws Error(insufficient_knots) for fewer than 4 points and
    /// Error(non_monotonic_knots) unless knots are strictly increasing.
    CubicSpline(std::span<const double> knots_t, std::span<const double> values);

    /// Evaluates the owning piece. Outside [first, last] knot the boundary
    /// piece is extended.
    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] double derivative(double t, int order) const;

    /// Index of the piece used for t.
    [[nodiscard]] std::size_t piece_index(double t) const;

    [[nodiscard]] std::span<const double> knots() const noexcept { return knots_; }
    [[nodiscard]] std::span<const Piece> pieces() const noexcept { return pieces_; }

  private:
    std::vector<double> knots_;
    std::vector<Piece> pieces_;
};

CubicSpline build_natural_spline(std::span<const double> knots_t, std::span<const double> values);

[[nodiscard]] inline double eval_spline(const CubicSpline &spline, double t) { return spline(t); }

/// Replaces bad frames of every pixel with the natural spline through that
/// pixel's good frames. Good frames pass through bit-exact.
StrainStack reconstruct_stack(const StrainStack &stack, const FrameQualityMask &mask);

} // namespace straintc
