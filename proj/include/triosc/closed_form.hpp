#pragma once

// Closed-form objects of the piecewise system: invariant planes of X- and X+,
// the explicit saddle/center flows on them, the tangency points P and Q on the
// sphere, the transit times joining them, and the pseudo-orbit built from the
// two arcs.

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "triosc/model.hpp"
#include "triosc/trajectory.hpp"

namespace triosc {

struct DegenerateA : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoRealIntersection : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LogDomain : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArctanDegenerate : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ExistenceViolated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Plane {
    State3 normal;
    double offset = 0.0;  // plane is <normal, p> = offset

    double residual(const State3& p) const { return dot(normal, p) - offset; }
};

struct PlanePair {
    Plane alpha_minus;  // -y + z = -eps/a, invariant under X-
    Plane alpha_plus;   //  y + z =  eps/a, invariant under X+
};

inline PlanePair invariant_planes(const Params& prm) {
    if (prm.a == 0.0)
        throw DegenerateA("invariant_planes: a = 0");
    const double c = prm.eps / prm.a;
    return {Plane{{0.0, -1.0, 1.0}, -c}, Plane{{0.0, 1.0, 1.0}, c}};
}

using Vec3c = std::array<std::complex<double>, 3>;

struct EigenData {
    std::array<std::complex<double>, 3> values;
    std::array<Vec3c, 3> vectors;

    int multiplicity(int idx, double tol = 1e-12) const {
        int m = 0;
        for (const auto& v : values)
            if (std::abs(v - values[static_cast<std::size_t>(idx)]) <= tol)
                ++m;
        return m;
    }
};

/// Spectrum and eigenvectors of the linear part: {-a, 1, -1} for X- and
/// {-a, i, -i} for X+, with the explicit eigenvectors of the saddle/center.
inline EigenData eigen_data(FieldSide which, const Params& prm) {
    using namespace std::complex_literals;
    EigenData e;
    const double a = prm.a;
    e.values[0] = -a;
    e.vectors[0] = {-a, a * a, 1.0};
    if (which == FieldSide::Minus) {
        e.values[1] = 1.0;
        e.vectors[1] = {1.0, 1.0, 1.0};
        e.values[2] = -1.0;
        e.vectors[2] = {-1.0, 1.0, 1.0};
    } else {
        e.values[1] = 1i;
        e.vectors[1] = {1i, -1.0, 1.0};
        e.values[2] = -1i;
        e.vectors[2] = {-1i, -1.0, 1.0};
    }
    return e;
}

/// Saddle flow on alpha-: initial point (x0, y0, -eps/a + y0).
inline State3 flow_alpha_minus(double t, double x0, double y0, const Params& prm) {
    const double ch = std::cosh(t), sh = std::sinh(t);
    const double x = x0 * ch + y0 * sh;
    const double y = x0 * sh + y0 * ch;
    return {x, y, -prm.eps / prm.a + y};
}

/// Center flow on alpha+: initial point (x0, y0, eps/a - y0), 2*pi periodic.
inline State3 flow_alpha_plus(double t, double x0, double y0, const Params& prm) {
    const double c = std::cos(t), s = std::sin(t);
    const double x = x0 * c + y0 * s;
    const double y = y0 * c - x0 * s;
    return {x, y, prm.eps / prm.a - y};
}

struct TangencyData {
    State3 P;
    State3 Q;
    double t_minus = 0.0;
    double t_plus = 0.0;
};

/// The two intersection points of alpha-, alpha+ and the sphere:
/// P = (-sqrt(a^2-eps^2)/a, eps/a, 0), Q its mirror. Both are tangency
/// points of X+.
inline std::pair<State3, State3> tangency_points(const Params& prm) {
    if (prm.a == 0.0)
        throw DegenerateA("tangency_points: a = 0");
    const double disc = prm.a * prm.a - prm.eps * prm.eps;
    if (disc < 0.0)
        throw NoRealIntersection("tangency_points: |eps| >= |a|");
    const double s = std::sqrt(disc) / prm.a;
    const double c = prm.eps / prm.a;
    return {State3{-s, c, 0.0}, State3{s, c, 0.0}};
}

/// Flow times from P to Q: t- = ln((s+eps)/(eps-s)) on alpha-,
/// t+ = 2 arctan(s/eps) on alpha+, with s = sqrt(a^2 - eps^2).
inline std::pair<double, double> transit_times(const Params& prm) {
    if (prm.a == 0.0)
        throw DegenerateA("transit_times: a = 0");
    const double disc = prm.a * prm.a - prm.eps * prm.eps;
    if (disc < 0.0)
        throw NoRealIntersection("transit_times: |eps| >= |a|");
    if (prm.eps == 0.0)
        throw ArctanDegenerate("transit_times: eps = 0");
    const double s = std::sqrt(disc);
    const double arg = (s + prm.eps) / (prm.eps - s);
    if (arg <= 0.0)
        throw LogDomain("transit_times: nonpositive logarithm argument");
    return {std::log(arg), 2.0 * std::atan(s / prm.eps)};
}

/// Equivalent arccos form of the positive transit time on alpha+, in (0, pi].
inline double transit_time_plus_arccos(const Params& prm) {
    const double a2 = prm.a * prm.a;
    return std::acos((2.0 * prm.eps * prm.eps - a2) / a2);
}

struct TimeSigns {
    int sign_t_minus = 0;  // +1 in the positive band, -1 otherwise ("not positive")
    int sign_t_plus = 0;
    bool t_minus_in_band = false;  // |a|/sqrt(2) < |eps| < |a|
};

/// Sign pattern of the transit times: t+ > 0 iff eps > 0; t- > 0 iff
/// |a|/sqrt(2) < eps < |a| (mirror band for t- < 0).
inline TimeSigns time_signs(const Params& prm) {
    if (prm.eps == 0.0)
        throw ArctanDegenerate("time_signs: eps = 0");
    const double lo = std::abs(prm.a) / std::numbers::sqrt2;
    const double hi = std::abs(prm.a);
    TimeSigns out;
    out.sign_t_plus = prm.eps > 0.0 ? 1 : -1;
    const bool pos_band = lo < prm.eps && prm.eps < hi;
    const bool neg_band = -hi < prm.eps && prm.eps < -lo;
    out.t_minus_in_band = pos_band || neg_band;
    out.sign_t_minus = pos_band ? 1 : -1;
    return out;
}

/// Existence bands of the crossing pseudo-orbit.
inline bool pseudo_orbit_exists(const Params& prm) {
    const double lo = std::abs(prm.a) / std::numbers::sqrt2;
    const double hi = std::abs(prm.a);
    return (lo < prm.eps && prm.eps < hi) || (-hi < prm.eps && prm.eps < -lo);
}

// Margin required of the strict norm inequalities at interior samples, and
// the excluded fraction near the arc endpoints where equality holds.
inline constexpr double kNormMargin = 1e-8;
inline constexpr double kNormBoundaryBand = 1e-4;

struct NormConditions {
    bool inside_ok = false;   // alpha- arc stays strictly inside the sphere
    bool outside_ok = false;  // alpha+ arc stays strictly outside
    double worst_inside = 0.0;   // max |x|^2 over interior samples of the inner arc
    double worst_outside = 0.0;  // min |x|^2 over interior samples of the outer arc
};

/// Sample both arcs from P at n interior times and check |x|^2 < 1 on the
/// alpha- arc and |x|^2 > 1 on the alpha+ arc, with margin kNormMargin.
inline NormConditions norm_conditions(const Params& prm, int n_samples) {
    if (n_samples < 10)
        throw std::invalid_argument("norm_conditions: need at least 10 samples");
    const auto [P, Q] = tangency_points(prm);
    (void)Q;
    const auto [tm, tp] = transit_times(prm);
    NormConditions out;
    out.inside_ok = out.outside_ok = true;
    out.worst_inside = 0.0;
    out.worst_outside = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_samples; ++i) {
        const double u =
            kNormBoundaryBand + (1.0 - 2.0 * kNormBoundaryBand) * (i + 0.5) / n_samples;
        const double n2m = norm2(flow_alpha_minus(tm * u, P.x, P.y, prm));
        const double n2p = norm2(flow_alpha_plus(tp * u, P.x, P.y, prm));
        out.worst_inside = std::max(out.worst_inside, n2m);
        out.worst_outside = std::min(out.worst_outside, n2p);
        if (n2m >= 1.0 - kNormMargin)
            out.inside_ok = false;
        if (n2p <= 1.0 + kNormMargin)
            out.outside_ok = false;
    }
    return out;
}

struct PseudoOrbit {
    Trajectory arc_inside;   // alpha- arc, oriented P -> Q with signed times
    Trajectory arc_outside;  // alpha+ arc, oriented P -> Q
    State3 joint_p;
    State3 joint_q;
};

/// Concatenated closed curve of Figure-1 type: the alpha- arc through the
/// ball and the alpha+ arc outside it, joined at P and Q.
inline PseudoOrbit build_pseudo_orbit(const Params& prm, int n_samples) {
    if (!pseudo_orbit_exists(prm))
        throw ExistenceViolated("build_pseudo_orbit: parameters outside the existence bands");
    if (n_samples < 2)
        throw std::invalid_argument("build_pseudo_orbit: need at least 2 samples per arc");
    const auto [P, Q] = tangency_points(prm);
    const auto [tm, tp] = transit_times(prm);
    PseudoOrbit orbit;
    orbit.joint_p = P;
    orbit.joint_q = Q;
    for (int i = 0; i < n_samples; ++i) {
        const double ti = tm * i / (n_samples - 1);
        orbit.arc_inside.push(ti, flow_alpha_minus(ti, P.x, P.y, prm));
    }
    for (int i = 0; i < n_samples; ++i) {
        const double ti = tp * i / (n_samples - 1);
        orbit.arc_outside.push(ti, flow_alpha_plus(ti, P.x, P.y, prm));
    }
    orbit.arc_inside.events.push_back({0.0, P, RegionLabel::TangencyPlus});
    orbit.arc_inside.events.push_back({tm, Q, RegionLabel::TangencyPlus});
    orbit.arc_outside.events.push_back({0.0, P, RegionLabel::TangencyPlus});
    orbit.arc_outside.events.push_back({tp, Q, RegionLabel::TangencyPlus});
    return orbit;
}

}  // namespace triosc
