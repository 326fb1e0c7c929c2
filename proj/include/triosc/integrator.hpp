#pragma once

// Adaptive Dormand-Prince 5(4) integration with dense output, event location
// on the switching manifold, piecewise (Filippov) trajectory construction and
// the angular return map used to shoot for periodic orbits of the perturbed
// system.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "triosc/averaging.hpp"
#include "triosc/model.hpp"
#include "triosc/trajectory.hpp"

namespace triosc {

struct IntegrationConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    double event_tol = 1e-11;
};

struct StepSizeUnderflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoSignChange : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DoubleTangency : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ThetaNonMonotone : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SmallRadius : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <std::size_t N>
using VecN = std::array<double, N>;

template <std::size_t N>
bool finite(const VecN<N>& v) {
    for (double x : v)
        if (!std::isfinite(x))
            return false;
    return true;
}

/// Continuous extension of one accepted step (4th-order interpolant).
template <std::size_t N>
struct DenseSegmentN {
    double t_begin = 0.0;
    double t_end = 0.0;  // may be < t_begin for backward integration
    VecN<N> r1{}, r2{}, r3{}, r4{}, r5{};

    VecN<N> eval(double t) const {
        const double th = (t - t_begin) / (t_end - t_begin);
        const double th1 = 1.0 - th;
        VecN<N> out;
        for (std::size_t i = 0; i < N; ++i)
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        return out;
    }
};

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

/// One-shot adaptive driver for f(t, y) with y in R^N. Call step() until
/// done(); segment() exposes the dense output of the last accepted step.
template <std::size_t N, class F>
class Dopri5 {
public:
    Dopri5(F f, const VecN<N>& y0, double t0, double t1, const IntegrationConfig& cfg)
        : f_(std::move(f)), y_(y0), t_(t0), t_end_(t1), cfg_(cfg) {
        if (t0 == t1)
            throw std::invalid_argument("Dopri5: degenerate time span");
        dir_ = t1 > t0 ? 1.0 : -1.0;
        k1_ = f_(t_, y_);
        h_ = initial_step();
    }

    bool done() const { return done_; }
    double t() const { return t_; }
    const VecN<N>& y() const { return y_; }
    const DenseSegmentN<N>& segment() const { return seg_; }

    /// Replace the current state (used for on-manifold renormalization).
    void set_state(const VecN<N>& y) {
        y_ = y;
        k1_ = f_(t_, y_);
    }

    void step() {
        if (done_)
            return;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            double h = h_;
            bool last = false;
            if ((t_ + h - t_end_) * dir_ >= 0.0) {
                h = t_end_ - t_;
                last = true;
            }
            if (std::abs(h) <= std::abs(t_) * 1e-17 + 1e-300)
                throw StepSizeUnderflow("Dopri5: step size underflow at t = " +
                                        std::to_string(t_));

            VecN<N> k2, k3, k4, k5, k6, k7, ynew, yerr;
            VecN<N> tmp;
            for (std::size_t i = 0; i < N; ++i)
                tmp[i] = y_[i] + h * a21 * k1_[i];
            k2 = f_(t_ + c2 * h, tmp);
            for (std::size_t i = 0; i < N; ++i)
                tmp[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2[i]);
            k3 = f_(t_ + c3 * h, tmp);
            for (std::size_t i = 0; i < N; ++i)
                tmp[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2[i] + a43 * k3[i]);
            k4 = f_(t_ + c4 * h, tmp);
            for (std::size_t i = 0; i < N; ++i)
                tmp[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            k5 = f_(t_ + c5 * h, tmp);
            for (std::size_t i = 0; i < N; ++i)
                tmp[i] = y_[i] +
                         h * (a61 * k1_[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
            k6 = f_(t_ + h, tmp);
            for (std::size_t i = 0; i < N; ++i)
                ynew[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                       a76 * k6[i]);
            k7 = f_(t_ + h, ynew);
            for (std::size_t i = 0; i < N; ++i)
                yerr[i] = h * (e1 * k1_[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                               e7 * k7[i]);

            if (!finite(ynew)) {
                if (!finite(y_) || ++nonfinite_attempts_ > 40)
                    throw NonFinite("Dopri5: state or derivative not finite");
                h_ = 0.1 * h;
                continue;
            }
            nonfinite_attempts_ = 0;
            double err = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double sc =
                    cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y_[i]), std::abs(ynew[i]));
                const double q = yerr[i] / sc;
                err += q * q;
            }
            err = std::sqrt(err / N);
            if (!std::isfinite(err)) {
                h_ = 0.1 * h;
                continue;
            }
            if (err <= 1.0) {
                build_segment(h, ynew, k3, k4, k5, k6, k7);
                t_ += h;
                y_ = ynew;
                k1_ = k7;  // FSAL
                done_ = last;
                double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
                fac = std::min(rejected_ ? 1.0 : 5.0, std::max(0.2, fac));
                rejected_ = false;
                h_ = dir_ * std::min(std::abs(h) * fac, cfg_.max_step);
                return;
            }
            rejected_ = true;
            const double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
            h_ = h * fac;
        }
        throw StepSizeUnderflow("Dopri5: no accepted step after 1000 attempts");
    }

private:
    double initial_step() const {
        double d0 = 0.0, d1n = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_[i]);
            d0 += (y_[i] / sc) * (y_[i] / sc);
            d1n += (k1_[i] / sc) * (k1_[i] / sc);
        }
        d0 = std::sqrt(d0 / N);
        d1n = std::sqrt(d1n / N);
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h0 = std::min({h0, std::abs(t_end_ - t_), cfg_.max_step});
        VecN<N> y1;
        for (std::size_t i = 0; i < N; ++i)
            y1[i] = y_[i] + dir_ * h0 * k1_[i];
        const VecN<N> f1 = f_(t_ + dir_ * h0, y1);
        double d2 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_[i]);
            const double q = (f1[i] - k1_[i]) / sc;
            d2 += q * q;
        }
        d2 = std::sqrt(d2 / N) / h0;
        const double dmax = std::max(d1n, d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
        return dir_ * std::min({100.0 * h0, h1, std::abs(t_end_ - t_), cfg_.max_step});
    }

    void build_segment(double h, const VecN<N>& ynew, const VecN<N>& k3, const VecN<N>& k4,
                       const VecN<N>& k5, const VecN<N>& k6, const VecN<N>& k7) {
        seg_.t_begin = t_;
        seg_.t_end = t_ + h;
        for (std::size_t i = 0; i < N; ++i) {
            const double ydiff = ynew[i] - y_[i];
            const double bspl = h * k1_[i] - ydiff;
            seg_.r1[i] = y_[i];
            seg_.r2[i] = ydiff;
            seg_.r3[i] = bspl;
            seg_.r4[i] = ydiff - h * k7[i] - bspl;
            seg_.r5[i] = h * (d1 * k1_[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                              d7 * k7[i]);
        }
    }

    F f_;
    VecN<N> y_;
    VecN<N> k1_;
    double t_;
    double t_end_;
    IntegrationConfig cfg_;
    double dir_ = 1.0;
    double h_ = 0.0;
    bool done_ = false;
    bool rejected_ = false;
    int nonfinite_attempts_ = 0;
    DenseSegmentN<N> seg_;
};

inline VecN<3> to_vec(const State3& s) { return {s.x, s.y, s.z}; }
inline State3 to_state(const VecN<3>& v) { return {v[0], v[1], v[2]}; }

}  // namespace detail

using DenseSegment3 = detail::DenseSegmentN<3>;

inline State3 segment_state(const DenseSegment3& seg, double t) {
    return detail::to_state(seg.eval(t));
}

/// Integrate a smooth field over t_span (forward or backward), recording the
/// accepted step points.
template <class Field>
Trajectory integrate(Field&& field, const State3& x0, std::pair<double, double> t_span,
                     const IntegrationConfig& cfg = {}) {
    auto rhs = [&field](double t, const detail::VecN<3>& y) {
        return detail::to_vec(field(t, detail::to_state(y)));
    };
    detail::Dopri5<3, decltype(rhs)> stepper(rhs, detail::to_vec(x0), t_span.first, t_span.second,
                                             cfg);
    Trajectory out;
    out.push(t_span.first, x0);
    while (!stepper.done()) {
        stepper.step();
        out.push(stepper.t(), detail::to_state(stepper.y()));
    }
    return out;
}

struct EventPoint {
    double t = 0.0;
    State3 p;
    bool tangential = false;  // located at a |h| minimum instead of a sign change
};

/// Locate the earliest zero of h along a dense segment: bracketing scan,
/// bisection, then a safeguarded Newton polish. A segment that only grazes
/// (|h| minimum below event_tol without sign change) yields a tangential
/// event; otherwise NoSignChange is thrown. The optional window restricts the
/// scan to [t_lo, t_hi] inside the segment.
template <class H>
EventPoint locate_event(const DenseSegment3& seg, H&& h, const IntegrationConfig& cfg,
                        double t_lo = std::numeric_limits<double>::quiet_NaN(),
                        double t_hi = std::numeric_limits<double>::quiet_NaN()) {
    auto g = [&](double t) { return h(segment_state(seg, t)); };
    const double ta = std::isnan(t_lo) ? seg.t_begin : t_lo;
    const double tb = std::isnan(t_hi) ? seg.t_end : t_hi;
    constexpr int kScan = 24;
    std::array<double, kScan + 1> ts, gs;
    for (int i = 0; i <= kScan; ++i) {
        ts[static_cast<std::size_t>(i)] = ta + (tb - ta) * i / kScan;
        gs[static_cast<std::size_t>(i)] = g(ts[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < kScan; ++i) {
        const double ga = gs[static_cast<std::size_t>(i)], gb = gs[static_cast<std::size_t>(i + 1)];
        if (ga == 0.0)
            return {ts[static_cast<std::size_t>(i)], segment_state(seg, ts[static_cast<std::size_t>(i)]), false};
        if ((ga > 0) == (gb > 0))
            continue;
        double lo = ts[static_cast<std::size_t>(i)], hi = ts[static_cast<std::size_t>(i + 1)];
        double glo = ga;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double gm = g(mid);
            if (gm == 0.0) {
                lo = hi = mid;
                break;
            }
            if ((gm > 0) == (glo > 0)) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        double root = 0.5 * (lo + hi);
        const double dt = std::abs(tb - ta) * 1e-7;
        for (int it = 0; it < 3 && dt > 0.0; ++it) {
            const double gr = g(root);
            const double der = (g(root + dt) - g(root - dt)) / (2.0 * dt);
            if (der == 0.0)
                break;
            const double next = root - gr / der;
            if (next < std::min(lo, hi) || next > std::max(lo, hi))
                break;
            root = next;
        }
        return {root, segment_state(seg, root), false};
    }
    // No sign change: look for a grazing contact at the |h| minimum.
    int imin = 0;
    for (int i = 1; i <= kScan; ++i)
        if (std::abs(gs[static_cast<std::size_t>(i)]) < std::abs(gs[static_cast<std::size_t>(imin)]))
            imin = i;
    double lo = ts[static_cast<std::size_t>(std::max(0, imin - 1))];
    double hi = ts[static_cast<std::size_t>(std::min(kScan, imin + 1))];
    for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (std::abs(g(m1)) < std::abs(g(m2)))
            hi = m2;
        else
            lo = m1;
    }
    const double tmin = 0.5 * (lo + hi);
    if (std::abs(g(tmin)) <= cfg.event_tol)
        return {tmin, segment_state(seg, tmin), true};
    throw NoSignChange("locate_event: h does not reach zero on the segment");
}

namespace detail {

enum class PwMode { OnMinus, OnPlus, Slide };

inline FieldSide crossing_exit_side(double lie_plus, double dir) {
    // At a crossing both Lie derivatives share a sign; moving forward in time
    // the flow enters the side h grows toward.
    return lie_plus * dir > 0.0 ? FieldSide::Plus : FieldSide::Minus;
}

/// Continuation through a fold of X+: a visible fold (h curving up) lifts off
/// into h > 0, otherwise the arriving flow either crosses down or sticks to
/// the sliding region.
inline PwMode continue_at_plus_tangency(const State3& p, const Params& prm, double dir) {
    if (lie_derivative_n(FieldSide::Plus, p, prm, 2) > kTangencyTol)
        return PwMode::OnPlus;
    if (lie_derivative(FieldSide::Minus, p, prm) * dir < 0.0)
        return PwMode::OnMinus;
    return PwMode::Slide;
}

inline PwMode continue_at_minus_tangency(const State3& p, const Params& prm, double dir) {
    if (lie_derivative_n(FieldSide::Minus, p, prm, 2) < -kTangencyTol)
        return PwMode::OnMinus;
    if (lie_derivative(FieldSide::Plus, p, prm) * dir > 0.0)
        return PwMode::OnPlus;
    return PwMode::Slide;
}

}  // namespace detail

/// Filippov trajectory through x0: smooth arcs of X-/X+ concatenated at
/// crossing points, sliding-field motion inside the sliding/escape regions,
/// with every manifold contact recorded as an event.
inline Trajectory integrate_piecewise(const Params& prm, const State3& x0,
                                      std::pair<double, double> t_span,
                                      const IntegrationConfig& cfg = {}) {
    using detail::PwMode;
    const double dir = t_span.second > t_span.first ? 1.0 : -1.0;
    Trajectory out;
    double t = t_span.first;
    State3 p = x0;
    out.push(t, p);

    auto decide_mode = [&](const State3& q) -> PwMode {
        const double h = switching_h(q);
        if (h > cfg.event_tol)
            return PwMode::OnPlus;
        if (h < -cfg.event_tol)
            return PwMode::OnMinus;
        switch (classify_point(q, prm, cfg.event_tol)) {
            case RegionLabel::Crossing:
                return detail::crossing_exit_side(lie_derivative(FieldSide::Plus, q, prm), dir) ==
                               FieldSide::Plus
                           ? PwMode::OnPlus
                           : PwMode::OnMinus;
            case RegionLabel::Sliding:
            case RegionLabel::Escape:
                return PwMode::Slide;
            case RegionLabel::TangencyPlus:
                return detail::continue_at_plus_tangency(q, prm, dir);
            case RegionLabel::TangencyMinus:
                return detail::continue_at_minus_tangency(q, prm, dir);
            case RegionLabel::TangencyBoth:
                throw DoubleTangency("integrate_piecewise: start at a double tangency");
            default:
                return h >= 0.0 ? PwMode::OnPlus : PwMode::OnMinus;
        }
    };

    PwMode mode = decide_mode(p);
    constexpr int kMaxEvents = 100000;
    int n_events = 0;

    while ((t - t_span.second) * dir < 0.0) {
        if (++n_events > kMaxEvents)
            throw std::runtime_error("integrate_piecewise: event limit exceeded");

        if (mode == PwMode::Slide) {
            // Slide until a Lie derivative changes sign, renormalizing onto
            // the sphere after each accepted step.
            auto rhs = [&](double, const detail::VecN<3>& y) {
                return detail::to_vec(sliding_field(detail::to_state(y), prm));
            };
            detail::Dopri5<3, decltype(rhs)> stepper(rhs, detail::to_vec(p), t, t_span.second, cfg);
            const double lp0 = lie_derivative(FieldSide::Plus, p, prm);
            const double lm0 = lie_derivative(FieldSide::Minus, p, prm);
            bool switched = false;
            try {
                while (!stepper.done()) {
                    stepper.step();
                    const auto& seg = stepper.segment();
                    std::optional<EventPoint> boundary;
                    FieldSide vanished = FieldSide::Plus;
                    for (FieldSide side : {FieldSide::Plus, FieldSide::Minus}) {
                        const double ref = side == FieldSide::Plus ? lp0 : lm0;
                        auto lie = [&](const State3& q) {
                            return lie_derivative(side, q, prm);
                        };
                        const double end = lie(segment_state(seg, seg.t_end));
                        if ((end > 0) == (ref > 0) && end != 0.0)
                            continue;
                        try {
                            EventPoint ev = locate_event(seg, lie, cfg);
                            if (!boundary || (ev.t - boundary->t) * dir < 0.0) {
                                boundary = ev;
                                vanished = side;
                            }
                        } catch (const NoSignChange&) {
                        }
                    }
                    if (boundary) {
                        t = boundary->t;
                        p = boundary->p;
                        const double n = norm(p);
                        if (n > 0.0)
                            p = (1.0 / n) * p;
                        out.push(t, p);
                        out.events.push_back({t, p,
                                              vanished == FieldSide::Plus
                                                  ? RegionLabel::TangencyPlus
                                                  : RegionLabel::TangencyMinus});
                        mode = vanished == FieldSide::Plus ? PwMode::OnPlus : PwMode::OnMinus;
                        switched = true;
                        break;
                    }
                    // Project back onto the sphere to kill secular drift.
                    State3 q = detail::to_state(stepper.y());
                    const double n = norm(q);
                    if (n > 0.0)
                        q = (1.0 / n) * q;
                    stepper.set_state(detail::to_vec(q));
                    t = stepper.t();
                    p = q;
                    out.push(t, p);
                }
            } catch (const DivisionDegenerate&) {
                throw DoubleTangency("integrate_piecewise: sliding denominator degenerated");
            }
            if (!switched && stepper.done()) {
                t = stepper.t();
                p = detail::to_state(stepper.y());
                if (out.times.empty() || out.times.back() != t)
                    out.push(t, p);
                break;
            }
            continue;
        }

        const FieldSide side = mode == PwMode::OnPlus ? FieldSide::Plus : FieldSide::Minus;
        auto rhs = [&](double, const detail::VecN<3>& y) {
            return detail::to_vec(field(side, detail::to_state(y), prm));
        };
        detail::Dopri5<3, decltype(rhs)> stepper(rhs, detail::to_vec(p), t, t_span.second, cfg);
        bool armed = std::abs(switching_h(p)) > 10.0 * cfg.event_tol;
        std::optional<EventPoint> hit;
        while (!stepper.done()) {
            stepper.step();
            const auto& seg = stepper.segment();
            // Arm event detection only once the state has left the manifold
            // band, so a restart at |h| ~ 0 is not immediately re-triggered.
            double t_from = seg.t_begin;
            if (!armed) {
                constexpr int kProbe = 16;
                for (int i = 0; i <= kProbe; ++i) {
                    const double tt = seg.t_begin + (seg.t_end - seg.t_begin) * i / kProbe;
                    if (std::abs(switching_h(segment_state(seg, tt))) > 10.0 * cfg.event_tol) {
                        armed = true;
                        t_from = tt;
                        break;
                    }
                }
            }
            if (armed) {
                const double href = switching_h(segment_state(seg, t_from));
                const double hend = switching_h(segment_state(seg, seg.t_end));
                if ((href > 0) != (hend > 0) || hend == 0.0) {
                    auto hfun = [](const State3& q) { return switching_h(q); };
                    hit = locate_event(seg, hfun, cfg, t_from, seg.t_end);
                    break;
                }
            }
            t = stepper.t();
            p = detail::to_state(stepper.y());
            out.push(t, p);
        }
        if (hit) {
            t = hit->t;
            p = hit->p;
            out.push(t, p);
            const RegionLabel label = classify_point(p, prm, cfg.event_tol);
            out.events.push_back({t, p, label});
            switch (label) {
                case RegionLabel::Crossing:
                    mode = detail::crossing_exit_side(lie_derivative(FieldSide::Plus, p, prm),
                                                      dir) == FieldSide::Plus
                               ? PwMode::OnPlus
                               : PwMode::OnMinus;
                    break;
                case RegionLabel::Sliding:
                case RegionLabel::Escape:
                    mode = PwMode::Slide;
                    break;
                case RegionLabel::TangencyPlus:
                    mode = detail::continue_at_plus_tangency(p, prm, dir);
                    break;
                case RegionLabel::TangencyMinus:
                    mode = detail::continue_at_minus_tangency(p, prm, dir);
                    break;
                case RegionLabel::TangencyBoth:
                    throw DoubleTangency("integrate_piecewise: double tangency reached");
                default:
                    break;
            }
            continue;
        }
        t = stepper.t();
        p = detail::to_state(stepper.y());
        if (out.times.empty() || out.times.back() != t)
            out.push(t, p);
        break;
    }
    return out;
}

namespace detail {

// Exact theta-parametrized dynamics of the cylindrical coordinates
// (r, Z, t)' = (rdot, Zdot, 1) / thetadot, valid while thetadot < 0.
template <class Sink>
VecN<3> run_theta(const Params& prm, const MultiPoly& F, double eps, double r0, double Z0,
                  const IntegrationConfig& cfg, Sink&& sink) {
    if (prm.b <= 0.0)
        throw std::invalid_argument("return_map: b must be positive");
    if (r0 <= 0.0)
        throw std::invalid_argument("return_map: r must be positive");
    const double a = prm.a, b = prm.b;
    const double w = std::sqrt(b);
    const double denom = a * a + b;
    auto rhs = [&](double th, const VecN<3>& u) -> VecN<3> {
        const double r = u[0], Z = u[1];
        if (r < 1e-6)
            throw SmallRadius("return_map: radius collapsed below 1e-6");
        const double c = std::cos(w * th), s = std::sin(w * th);
        const double Fv = F.eval(w * r * s - a * Z, a * a * Z - b * r * c, r * c + Z);
        const double thdot = eps * (a * c + w * s) * Fv / (b * r * denom) - 1.0;
        if (thdot >= 0.0)
            throw ThetaNonMonotone("return_map: angular speed changed sign");
        const double rdot = eps * (a * s - w * c) * Fv / (w * denom);
        const double Zdot = eps * Fv / denom - a * Z;
        return {rdot / thdot, Zdot / thdot, 1.0 / thdot};
    };
    const double period = 2.0 * std::numbers::pi / w;
    IntegrationConfig run = cfg;
    run.max_step = std::min(cfg.max_step, period / 20.0);
    Dopri5<3, decltype(rhs)> stepper(rhs, VecN<3>{r0, Z0, 0.0}, 0.0, period, run);
    sink(0.0, VecN<3>{r0, Z0, 0.0});
    while (!stepper.done()) {
        stepper.step();
        sink(stepper.t(), stepper.y());
    }
    return stepper.y();
}

}  // namespace detail

struct ReturnMapResult {
    double r = 0.0;
    double Z = 0.0;
    double period_time = 0.0;  // physical time spanned by one angular period
};

/// One angular period of the theta-parametrized flow: (r, Z) -> (r', Z').
/// At eps = 0 this is (r, Z) -> (r, Z e^{2 pi a / sqrt(b)}) with r untouched.
inline ReturnMapResult return_map(const Params& prm, const MultiPoly& F, double eps, double r0,
                                  double Z0, const IntegrationConfig& cfg = {}) {
    const auto end = detail::run_theta(prm, F, eps, r0, Z0, cfg,
                                       [](double, const detail::VecN<3>&) {});
    return {end[0], end[1], -end[2]};
}

struct PeriodicOrbit {
    double r = 0.0;  // fixed point radius
    double Z = 0.0;
    double period = 0.0;
    Trajectory orbit;  // one closed loop in (x, y, z), ascending physical time
};

namespace detail {

/// First-order fixed point of the Z-component: the linearized equation
/// Z' = a Z - eps F(...)/(a^2+b) along the unperturbed circle has the unique
/// periodic solution Z* = eps I / (1 - e^{a T}), I = int e^{a(T-s)} q(s) ds.
/// Starting Newton there keeps the strongly expanding Z-transient small.
inline double slaved_z_estimate(const Params& prm, const MultiPoly& F, double eps, double r) {
    const double a = prm.a, b = prm.b;
    const double w = std::sqrt(b);
    const double T = 2.0 * std::numbers::pi / w;
    auto integrand = [&](double s) {
        const double c = std::cos(w * s), sn = std::sin(w * s);
        const double q = -F.eval(w * r * sn, -b * r * c, r * c) / (a * a + b);
        return std::exp(a * (T - s)) * q;
    };
    const double growth = std::exp(a * T);
    const double integral = detail::adaptive_quadrature(integrand, 0.0, T, 1e-10 * growth);
    return eps * integral / (1.0 - growth);
}

}  // namespace detail

/// Newton shooting on the return-map fixed point with a finite-difference
/// Jacobian; the orbit is reconstructed through the eigenbasis.
inline PeriodicOrbit find_periodic_orbit(const Params& prm, const MultiPoly& F, double eps,
                                         double r_guess, const IntegrationConfig& cfg = {}) {
    if (eps == 0.0)
        throw std::invalid_argument(
            "find_periodic_orbit: eps = 0 leaves every radius fixed (singular Jacobian)");
    if (r_guess <= 0.0)
        throw std::invalid_argument("find_periodic_orbit: r_guess must be positive");
    double r = r_guess;
    double Z = detail::slaved_z_estimate(prm, F, eps, r_guess);
    constexpr int kMaxIter = 50;
    constexpr double kResTol = 1e-9;
    bool converged = false;
    for (int it = 0; it < kMaxIter; ++it) {
        ReturnMapResult base;
        try {
            base = return_map(prm, F, eps, r, Z, cfg);
        } catch (const ThetaNonMonotone&) {
            throw NoConvergence("find_periodic_orbit: iterate lost angular monotonicity");
        } catch (const SmallRadius&) {
            throw NoConvergence("find_periodic_orbit: iterate collapsed to small radius");
        }
        const double gr = base.r - r;
        const double gz = base.Z - Z;
        if (std::max(std::abs(gr), std::abs(gz)) <= kResTol) {
            converged = true;
            break;
        }
        const double hr = 1e-6 * std::max(1.0, std::abs(r));
        const double hz = 1e-6 * std::max(1e-2, std::abs(Z));
        const ReturnMapResult pr = return_map(prm, F, eps, r + hr, Z, cfg);
        const ReturnMapResult pz = return_map(prm, F, eps, r, Z + hz, cfg);
        // Jacobian of G(v) = Phi(v) - v.
        const double j00 = (pr.r - base.r) / hr - 1.0;
        const double j01 = (pz.r - base.r) / hz;
        const double j10 = (pr.Z - base.Z) / hr;
        const double j11 = (pz.Z - base.Z) / hz - 1.0;
        const double det = j00 * j11 - j01 * j10;
        if (!std::isfinite(det) || std::abs(det) < 1e-14)
            throw NoConvergence("find_periodic_orbit: singular shooting Jacobian");
        double dr = (-gr * j11 + gz * j01) / det;
        double dz = (-gz * j00 + gr * j10) / det;
        if (std::abs(dr) > 0.5 * r) {  // keep the radius well away from zero
            const double s = 0.5 * r / std::abs(dr);
            dr *= s;
            dz *= s;
        }
        // Backtrack if the full step leaves the monotone-angle domain.
        double scale = 1.0;
        for (int bt = 0; bt < 8; ++bt) {
            const double rn = r + scale * dr;
            const double zn = Z + scale * dz;
            if (rn > 0.0 && std::isfinite(rn) && std::isfinite(zn)) {
                try {
                    (void)return_map(prm, F, eps, rn, zn, cfg);
                    r = rn;
                    Z = zn;
                    break;
                } catch (const ThetaNonMonotone&) {
                } catch (const SmallRadius&) {
                }
            }
            scale *= 0.5;
            if (bt == 7)
                throw NoConvergence("find_periodic_orbit: no admissible Newton step");
        }
    }
    if (!converged)
        throw NoConvergence("find_periodic_orbit: no fixed point after 50 iterations");

    PeriodicOrbit result;
    result.r = r;
    result.Z = Z;
    std::vector<std::array<double, 4>> samples;  // theta, r, Z, t
    const auto end = detail::run_theta(prm, F, eps, r, Z, cfg,
                                       [&](double th, const detail::VecN<3>& u) {
                                           samples.push_back({th, u[0], u[1], u[2]});
                                       });
    result.period = -end[2];
    const Mat3 B = jordan_transform(prm).B;
    const double w = std::sqrt(prm.b);
    for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
        const auto& [th, rr, zz, tt] = *it;
        const State3 eig{rr * std::cos(w * th), rr * std::sin(w * th), zz};
        result.orbit.push(tt + result.period, B * eig);
    }
    return result;
}

}  // namespace triosc
