#include "straintc/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "straintc/error.hpp"
#include "straintc/parallel.hpp"

namespace straintc {

namespace {

// Second derivatives at the knots of the natural spline. The interior
// equations
//   h[i-1] M[i-1] + 2 (h[i-1] + h[i]) M[i] + h[i] M[i+1] = 6 (slope[i] - slope[i-1])
// form a symmetric, strictly diagonally dominant tridiagonal system, solved
// by forward elimination and back substitution.
std::vector<double> natural_second_derivatives(std::span<const double> t, std::span<const double> y) {
    const std::size_t n = t.size();
    std::vector<double> m(n, 0.0);
    const std::size_t interior = n - 2;
    std::vector<double> diag(interior);
    std::vector<double> rhs(interior);
    for (std::size_t k = 0; k < interior; ++k) {
        const std::size_t i = k + 1;
        const double h0 = t[i] - t[i - 1];
        const double h1 = t[i + 1] - t[i];
        diag[k] = 2.0 * (h0 + h1);
        rhs[k] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for (std::size_t k = 1; k < interior; ++k) {
        const double sub = t[k + 1] - t[k]; // h[k], couples unknowns k-1 and k
        const double w = sub / diag[k - 1];
        diag[k] -= w * sub;
        rhs[k] -= w * rhs[k - 1];
    }
    m[interior] = rhs[interior - 1] / diag[interior - 1];
    for (std::size_t k = interior - 1; k-- > 0;) {
        const double sup = t[k + 2] - t[k + 1];
        m[k + 1] = (rhs[k] - sup * m[k + 2]) / diag[k];
    }
    return m;
}

} // namespace

CubicSpline::CubicSpline(std::span<const double> knots_t, std::span<const double> values) {
    if (knots_t.size() != values.size()) {
        throw Error(Errc::invalid_argument, "spline: knot and value counts differ");
    }
    if (knots_t.size() < 4) {
        throw Error(Errc::insufficient_knots,
                    "insufficient knots: " + std::to_string(knots_t.size()) + " (at least 4 needed)");
    }
    for (std::size_t i = 0; i < knots_t.size(); ++i) {
        if (!std::isfinite(knots_t[i]) || !std::isfinite(values[i])) {
            throw Error(Errc::invalid_argument, "spline: knots and values must be finite");
        }
        if (i > 0 && !(knots_t[i] > knots_t[i - 1])) {
            throw Error(Errc::non_monotonic_knots, "non-monotonic knots at index " + std::to_string(i));
        }
    }

    knots_.assign(knots_t.begin(), knots_t.end());
    const auto m = natural_second_derivatives(knots_t, values);
    pieces_.resize(knots_.size());
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
        const double h = knots_[i + 1] - knots_[i];
        Piece &p = pieces_[i];
        p.a = (m[i + 1] - m[i]) / (6.0 * h);
        p.b = 0.5 * m[i];
        p.c = (values[i + 1] - values[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
        p.d = values[i];
    }
    // Sentinel holding the last knot value so evaluation there is exact.
    pieces_.back() = Piece{0.0, 0.0, 0.0, values.back()};
}

std::size_t CubicSpline::piece_index(double t) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) {
        return 0;
    }
    const auto idx = static_cast<std::size_t>(it - knots_.begin()) - 1;
    return std::min(idx, knots_.size() - 2);
}

double CubicSpline::operator()(double t) const {
    if (t == knots_.back()) {
        return pieces_.back().d;
    }
    const std::size_t m = piece_index(t);
    const Piece &p = pieces_[m];
    const double x = t - knots_[m];
    return ((p.a * x + p.b) * x + p.c) * x + p.d;
}

double CubicSpline::derivative(double t, int order) const {
    const std::size_t m = piece_index(t);
    const Piece &p = pieces_[m];
    const double x = t - knots_[m];
    switch (order) {
    case 0:
        return (*this)(t);
    case 1:
        return (3.0 * p.a * x + 2.0 * p.b) * x + p.c;
    case 2:
        return 6.0 * p.a * x + 2.0 * p.b;
    case 3:
        return 6.0 * p.a;
    default:
        return 0.0;
    }
}

CubicSpline build_natural_spline(std::span<const double> knots_t, std::span<const double> values) {
    return CubicSpline(knots_t, values);
}

StrainStack reconstruct_stack(const StrainStack &stack, const FrameQualityMask &mask) {
    if (mask.size() != stack.n_frames()) {
        throw Error(Errc::invalid_argument, "frame mask length does not match the stack");
    }
    std::vector<std::size_t> good;
    std::vector<std::size_t> bad;
    for (std::size_t n = 0; n < mask.size(); ++n) {
        (mask.is_good(n) ? good : bad).push_back(n);
    }
    if (good.size() < 4) {
        throw Error(Errc::insufficient_good_frames,
                    "insufficient good frames: " + std::to_string(good.size()) + " (at least 4 needed)");
    }
    StrainStack out = stack;
    if (bad.empty()) {
        return out;
    }
    std::vector<double> knots(good.size());
    for (std::size_t k = 0; k < good.size(); ++k) {
        knots[k] = stack.time_of(good[k]);
    }
    parallel_for(stack.pixels(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> values(good.size());
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t k = 0; k < good.size(); ++k) {
                values[k] = stack.at(good[k], p);
            }
            const CubicSpline spline(knots, values);
            for (std::size_t n : bad) {
                out.at(n, p) = spline(stack.time_of(n));
            }
        }
    });
    return out;
}

} // namespace straintc
