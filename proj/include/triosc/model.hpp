#pragma once

// The two smooth vector fields X-, X+ glued along the unit sphere, the
// perturbed linear system, Lie derivatives of the switching function and
// the Filippov region classification with its sliding vector field.

#include <cmath>
#include <stdexcept>
#include <string>

#include "triosc/polynomial.hpp"

namespace triosc {

struct Params {
    double a = 0.0;    // damping coefficient
    double b = 0.0;    // stiffness (> 0 required for the perturbed-system operations)
    double eps = 0.0;  // perturbation amplitude
};

struct State3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline State3 operator+(const State3& p, const State3& q) { return {p.x + q.x, p.y + q.y, p.z + q.z}; }
inline State3 operator-(const State3& p, const State3& q) { return {p.x - q.x, p.y - q.y, p.z - q.z}; }
inline State3 operator*(double s, const State3& p) { return {s * p.x, s * p.y, s * p.z}; }

inline double dot(const State3& p, const State3& q) { return p.x * q.x + p.y * q.y + p.z * q.z; }
inline double norm2(const State3& p) { return dot(p, p); }
inline double norm(const State3& p) { return std::sqrt(norm2(p)); }
inline double max_abs(const State3& p) {
    return std::max(std::abs(p.x), std::max(std::abs(p.y), std::abs(p.z)));
}
inline bool all_finite(const State3& p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

enum class FieldSide { Minus, Plus };

enum class RegionLabel {
    PlusSide,
    MinusSide,
    Crossing,
    Sliding,
    Escape,
    TangencyPlus,
    TangencyMinus,
    TangencyBoth,
};

inline const char* to_string(RegionLabel r) {
    switch (r) {
        case RegionLabel::PlusSide: return "plus_side";
        case RegionLabel::MinusSide: return "minus_side";
        case RegionLabel::Crossing: return "crossing";
        case RegionLabel::Sliding: return "sliding";
        case RegionLabel::Escape: return "escape";
        case RegionLabel::TangencyPlus: return "tangency_plus";
        case RegionLabel::TangencyMinus: return "tangency_minus";
        case RegionLabel::TangencyBoth: return "tangency_both";
    }
    return "?";
}

// Absolute band for treating a Lie derivative as vanishing.
inline constexpr double kTangencyTol = 1e-9;
// Degenerate-denominator threshold for the sliding combination.
inline constexpr double kSlidingDenomTol = 1e-12;

struct DivisionDegenerate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// X-(x,y,z) = (y, -a y + x + a z + eps, x), active on h < 0.
inline State3 field_minus(const State3& p, const Params& prm) {
    return {p.y, -prm.a * p.y + p.x + prm.a * p.z + prm.eps, p.x};
}

/// X+(x,y,z) = (y, -a y - x - a z + eps, x), active on h > 0.
inline State3 field_plus(const State3& p, const Params& prm) {
    return {p.y, -prm.a * p.y - p.x - prm.a * p.z + prm.eps, p.x};
}

inline State3 field(FieldSide side, const State3& p, const Params& prm) {
    return side == FieldSide::Minus ? field_minus(p, prm) : field_plus(p, prm);
}

/// Full first-order system (y, -a y - b x - a b z + eps F(x,y,z), x).
inline State3 field_perturbed(const State3& p, const Params& prm, const MultiPoly& F) {
    return {p.y,
            -prm.a * p.y - prm.b * p.x - prm.a * prm.b * p.z + prm.eps * F.eval(p.x, p.y, p.z),
            p.x};
}

/// Switching function h = x^2 + y^2 + z^2 - 1, zero on the unit sphere.
inline double switching_h(const State3& p) { return p.x * p.x + p.y * p.y + p.z * p.z - 1.0; }

inline State3 grad_h(const State3& p) { return {2.0 * p.x, 2.0 * p.y, 2.0 * p.z}; }

/// First Lie derivative X(h) = <X(p), grad h(p)>.
inline double lie_derivative(FieldSide side, const State3& p, const Params& prm) {
    return dot(field(side, p, prm), grad_h(p));
}

namespace detail {

inline MultiPoly field_component_poly(FieldSide side, const Params& prm, int component) {
    MultiPoly p;
    switch (component) {
        case 0:
            p.add_term(0, 1, 0, 1.0);
            break;
        case 1:
            p.add_term(0, 1, 0, -prm.a);
            p.add_term(1, 0, 0, side == FieldSide::Minus ? 1.0 : -1.0);
            p.add_term(0, 0, 1, side == FieldSide::Minus ? prm.a : -prm.a);
            p.add_term(0, 0, 0, prm.eps);
            break;
        default:
            p.add_term(1, 0, 0, 1.0);
            break;
    }
    return p;
}

inline MultiPoly switching_h_poly() {
    MultiPoly h;
    h.add_term(2, 0, 0, 1.0);
    h.add_term(0, 2, 0, 1.0);
    h.add_term(0, 0, 2, 1.0);
    h.add_term(0, 0, 0, -1.0);
    return h;
}

}  // namespace detail

/// X^k(h) as a polynomial, built by exact symbolic differentiation.
inline MultiPoly lie_derivative_poly(FieldSide side, const Params& prm, int order) {
    if (order < 1)
        throw std::invalid_argument("lie_derivative_poly: order must be >= 1");
    MultiPoly cur = detail::switching_h_poly();
    for (int k = 0; k < order; ++k) {
        MultiPoly next;
        for (int axis = 0; axis < 3; ++axis)
            next += detail::field_component_poly(side, prm, axis) * cur.derivative(axis);
        cur = next;
    }
    return cur;
}

/// X^k(h)(p) for k >= 1; k = 1 matches lie_derivative.
inline double lie_derivative_n(FieldSide side, const State3& p, const Params& prm, int order) {
    return lie_derivative_poly(side, prm, order).eval(p.x, p.y, p.z);
}

enum class TangencyType { NotTangent, Fold, Cusp, HigherOrder };

/// Fold/cusp order of a tangency: X(h)=0 with X^2(h)!=0 is a fold,
/// X(h)=X^2(h)=0 with X^3(h)!=0 a cusp.
inline TangencyType tangency_type(FieldSide side, const State3& p, const Params& prm,
                                  double tol = kTangencyTol) {
    if (std::abs(lie_derivative(side, p, prm)) > tol)
        return TangencyType::NotTangent;
    if (std::abs(lie_derivative_n(side, p, prm, 2)) > tol)
        return TangencyType::Fold;
    if (std::abs(lie_derivative_n(side, p, prm, 3)) > tol)
        return TangencyType::Cusp;
    return TangencyType::HigherOrder;
}

/// Region of a point: PlusSide/MinusSide off the manifold (|h| > tol), else
/// the sphere is partitioned by the signs of the two Lie derivatives.
inline RegionLabel classify_point(const State3& p, const Params& prm, double tol = kTangencyTol) {
    const double h = switching_h(p);
    if (h > tol)
        return RegionLabel::PlusSide;
    if (h < -tol)
        return RegionLabel::MinusSide;
    const double lp = lie_derivative(FieldSide::Plus, p, prm);
    const double lm = lie_derivative(FieldSide::Minus, p, prm);
    const bool tp = std::abs(lp) <= kTangencyTol;
    const bool tm = std::abs(lm) <= kTangencyTol;
    if (tp && tm)
        return RegionLabel::TangencyBoth;
    if (tp)
        return RegionLabel::TangencyPlus;
    if (tm)
        return RegionLabel::TangencyMinus;
    if (lp * lm > 0.0)
        return RegionLabel::Crossing;
    if (lp < 0.0 && lm > 0.0)
        return RegionLabel::Sliding;
    return RegionLabel::Escape;
}

/// Filippov sliding field Z^s = (X-h X+ - X+h X-) / (X-h - X+h), the convex
/// combination tangent to the sphere.
inline State3 sliding_field(const State3& p, const Params& prm) {
    const double lm = lie_derivative(FieldSide::Minus, p, prm);
    const double lp = lie_derivative(FieldSide::Plus, p, prm);
    const double den = lm - lp;
    if (std::abs(den) < kSlidingDenomTol)
        throw DivisionDegenerate("sliding_field: X-h - X+h below tolerance at (" +
                                 std::to_string(p.x) + ", " + std::to_string(p.y) + ", " +
                                 std::to_string(p.z) + ")");
    const State3 xm = field_minus(p, prm);
    const State3 xp = field_plus(p, prm);
    return (1.0 / den) * (lm * xp - lp * xm);
}

}  // namespace triosc
