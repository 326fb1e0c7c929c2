#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <numbers>

#include "triosc/averaging.hpp"
#include "triosc/closed_form.hpp"
#include "triosc/integrator.hpp"

using namespace triosc;

namespace {

const Params kFig1{5.0, 0.0, 4.0};

auto plus_field(const Params& prm) {
    return [prm](double, const State3& s) { return field_plus(s, prm); };
}

MultiPoly designed_cubic(const Params& prm) {
    // averaged function proportional to r^3 - r, single positive root at 1
    return design_polynomial(prm, {{1, -1.0}, {3, 1.0}});
}

}  // namespace

TEST_CASE("smooth integration against closed forms") {
    SECTION("X+ carries P to Q over t+") {
        const auto [P, Q] = tangency_points(kFig1);
        const auto [tm, tp] = transit_times(kFig1);
        (void)tm;
        const Trajectory traj = integrate(plus_field(kFig1), P, {0.0, tp});
        CHECK(max_abs(traj.states.back() - Q) <= 1e-8);
    }
    SECTION("deviation from the alpha+ flow stays within 10 rel_tol") {
        const auto [P, Q] = tangency_points(kFig1);
        (void)Q;
        const auto [tm, tp] = transit_times(kFig1);
        (void)tm;
        const Trajectory traj = integrate(plus_field(kFig1), P, {0.0, tp});
        double worst = 0.0;
        for (std::size_t i = 0; i < traj.times.size(); ++i)
            worst = std::max(worst, max_abs(traj.states[i] -
                                            flow_alpha_plus(traj.times[i], P.x, P.y, kFig1)));
        CHECK(worst <= 10.0 * 1e-10 * 2.0);
    }
    SECTION("unperturbed linear field is periodic with period 2 pi / sqrt(b)") {
        const Params prm{1.0, 4.0, 0.0};
        const MultiPoly zero;
        auto f = [&](double, const State3& s) { return field_perturbed(s, prm, zero); };
        const State3 x0{0.0, -4.0, 1.0};
        const Trajectory traj = integrate(f, x0, {0.0, std::numbers::pi});
        CHECK(max_abs(traj.states.back() - x0) <= 1e-8);
    }
    SECTION("zero field keeps the state constant") {
        auto f = [](double, const State3&) { return State3{0, 0, 0}; };
        const Trajectory traj = integrate(f, {1, 2, 3}, {0.0, 5.0});
        for (const State3& s : traj.states)
            CHECK(max_abs(s - State3{1, 2, 3}) == 0.0);
    }
    SECTION("backward integration works") {
        const auto [P, Q] = tangency_points(kFig1);
        const auto [tm, tp] = transit_times(kFig1);
        (void)tm;
        const Trajectory fwd = integrate(plus_field(kFig1), P, {0.0, tp});
        const Trajectory back = integrate(plus_field(kFig1), fwd.states.back(), {tp, 0.0});
        CHECK(max_abs(back.states.back() - P) <= 1e-8);
        (void)Q;
    }
    SECTION("tightening tolerances raises accuracy by the expected factor") {
        const Params prm{1.0, 4.0, 0.0};
        const MultiPoly zero;
        auto f = [&](double, const State3& s) { return field_perturbed(s, prm, zero); };
        const State3 x0{0.0, -4.0, 1.0};
        auto endpoint_error = [&](double rel) {
            IntegrationConfig cfg;
            cfg.rel_tol = rel;
            cfg.abs_tol = rel * 1e-2;
            const Trajectory traj = integrate(f, x0, {0.0, 10.0 * std::numbers::pi}, cfg);
            return max_abs(traj.states.back() - x0);
        };
        const double coarse = endpoint_error(1e-6);
        const double fine = endpoint_error(1e-8);
        CHECK(coarse / fine >= 10.0);
    }
}

TEST_CASE("event location") {
    IntegrationConfig cfg;
    SECTION("linear crossing is found to event tolerance") {
        auto f = [](double, const detail::VecN<3>&) { return detail::VecN<3>{1.0, 0.0, 0.0}; };
        detail::Dopri5<3, decltype(f)> stepper(f, {0.0, 0.0, 0.0}, 0.0, 1.0, cfg);
        auto h = [](const State3& p) { return p.x - 0.5; };
        while (!stepper.done()) {
            stepper.step();
            if (stepper.t() >= 0.5) {
                const EventPoint ev = locate_event(stepper.segment(), h, cfg);
                CHECK_FALSE(ev.tangential);
                CHECK(std::abs(ev.t - 0.5) <= 1e-12);
                CHECK(std::abs(h(ev.p)) <= cfg.event_tol);
                return;
            }
        }
        FAIL("crossing never reached");
    }
    SECTION("grazing the sphere is reported as a tangential event") {
        // Run the X+ flow through its tangency at P: h dips to zero without
        // changing sign.
        const auto [P, Q] = tangency_points(kFig1);
        (void)Q;
        const State3 x0 = flow_alpha_plus(-0.2, P.x, P.y, kFig1);
        auto f = [&](double, const detail::VecN<3>& y) {
            return detail::to_vec(field_plus(detail::to_state(y), kFig1));
        };
        IntegrationConfig graze = cfg;
        graze.max_step = 0.4;
        detail::Dopri5<3, decltype(f)> stepper(f, detail::to_vec(x0), 0.0, 0.4, graze);
        bool found = false;
        while (!stepper.done() && !found) {
            stepper.step();
            try {
                const EventPoint ev = locate_event(stepper.segment(),
                                                   [](const State3& p) { return switching_h(p); },
                                                   cfg);
                found = true;
                CHECK(ev.tangential);
                CHECK(max_abs(ev.p - P) <= 1e-5);
            } catch (const NoSignChange&) {
            }
        }
        CHECK(found);
    }
    SECTION("no contact raises NoSignChange") {
        auto f = [](double, const detail::VecN<3>&) { return detail::VecN<3>{1.0, 0.0, 0.0}; };
        detail::Dopri5<3, decltype(f)> stepper(f, {0.0, 0.0, 0.0}, 0.0, 0.2, cfg);
        stepper.step();
        auto h = [](const State3& p) { return p.x - 0.5; };
        CHECK_THROWS_AS(locate_event(stepper.segment(), h, cfg), NoSignChange);
    }
    SECTION("relocating an event barely moves it") {
        auto f = [](double, const detail::VecN<3>& y) {
            return detail::VecN<3>{std::cos(y[1]), 1.0, 0.0};
        };
        detail::Dopri5<3, decltype(f)> stepper(f, {-0.3, 0.0, 0.0}, 0.0, 1.0, cfg);
        auto h = [](const State3& p) { return p.x; };
        while (!stepper.done()) {
            stepper.step();
            const auto& seg = stepper.segment();
            if ((h(segment_state(seg, seg.t_begin)) > 0) != (h(segment_state(seg, seg.t_end)) > 0)) {
                const EventPoint first = locate_event(seg, h, cfg);
                const EventPoint again = locate_event(seg, h, cfg, first.t - 1e-4, first.t + 1e-4);
                CHECK(std::abs(again.t - first.t) <= 1e-9);
                return;
            }
        }
        FAIL("no event segment found");
    }
}

TEST_CASE("piecewise integration") {
    IntegrationConfig cfg;
    SECTION("outward-perturbed start shadows the outer pseudo-orbit arc") {
        const auto [P, Q] = tangency_points(kFig1);
        (void)Q;
        const auto [tm, tp] = transit_times(kFig1);
        (void)tm;
        const State3 x0 = (1.0 + 1e-8) * P;
        const double t_end = 0.95 * tp;
        const Trajectory traj = integrate_piecewise(kFig1, x0, {0.0, t_end}, cfg);
        const State3 expected = flow_alpha_plus(t_end, P.x, P.y, kFig1);
        CHECK(max_abs(traj.states.back() - expected) <= 1e-5);
    }
    SECTION("first manifold contact from deep inside matches classify_point") {
        const Trajectory traj = integrate_piecewise(kFig1, {0.3, 0.2, 0.1}, {0.0, 20.0}, cfg);
        REQUIRE_FALSE(traj.events.empty());
        const CrossingEvent& ev = traj.events.front();
        const RegionLabel expected = classify_point(ev.p, kFig1, cfg.event_tol);
        CHECK(ev.label == expected);
        const bool acceptable = ev.label == RegionLabel::Crossing ||
                                ev.label == RegionLabel::Sliding ||
                                ev.label == RegionLabel::TangencyPlus ||
                                ev.label == RegionLabel::TangencyMinus;
        CHECK(acceptable);
    }
    SECTION("every recorded event sits on the manifold") {
        const Trajectory traj = integrate_piecewise(kFig1, {0.3, 0.2, 0.1}, {0.0, 20.0}, cfg);
        for (const CrossingEvent& ev : traj.events)
            CHECK(std::abs(switching_h(ev.p)) <= cfg.event_tol);
        CHECK(traj.times.back() == Catch::Approx(20.0));
    }
    SECTION("recorded times are strictly increasing") {
        const Trajectory traj = integrate_piecewise(kFig1, {0.3, 0.2, 0.1}, {0.0, 20.0}, cfg);
        for (std::size_t i = 1; i < traj.times.size(); ++i)
            CHECK(traj.times[i] > traj.times[i - 1]);
        for (const CrossingEvent& ev : traj.events) {
            CHECK(ev.t >= traj.times.front());
            CHECK(ev.t <= traj.times.back());
        }
    }
    SECTION("backward spans run with decreasing times and on-sphere events") {
        const Trajectory traj = integrate_piecewise(kFig1, {0.3, 0.2, 0.1}, {0.0, -5.0}, cfg);
        CHECK(traj.times.back() == Catch::Approx(-5.0));
        for (std::size_t i = 1; i < traj.times.size(); ++i)
            CHECK(traj.times[i] < traj.times[i - 1]);
        for (const CrossingEvent& ev : traj.events)
            CHECK(std::abs(switching_h(ev.p)) <= cfg.event_tol);
    }
}

TEST_CASE("integration failure modes") {
    SECTION("finite-time blowup stalls the step control") {
        auto f = [](double, const State3& s) {
            return State3{s.x * s.x, 0.0, 0.0};  // x' = x^2 escapes at t = 1
        };
        CHECK_THROWS_AS(integrate(f, {1.0, 0.0, 0.0}, {0.0, 2.0}), StepSizeUnderflow);
    }
    SECTION("non-finite derivatives raise NonFinite") {
        auto f = [](double, const State3&) {
            return State3{std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
        };
        CHECK_THROWS_AS(integrate(f, {1.0, 0.0, 0.0}, {0.0, 2.0}), NonFinite);
    }
    SECTION("degenerate span is rejected") {
        auto f = [](double, const State3&) { return State3{1, 0, 0}; };
        CHECK_THROWS_AS(integrate(f, {0, 0, 0}, {1.0, 1.0}), std::invalid_argument);
    }
    SECTION("large eps flips the angular speed and is reported") {
        const Params prm{1.0, 1.0, 0.0};
        const MultiPoly F = designed_cubic(prm);
        CHECK_THROWS_AS(return_map(prm, F, 1.0, 1.0, 2.0), ThetaNonMonotone);
    }
    SECTION("radius collapse is reported") {
        const Params prm{1.0, 1.0, 0.0};
        const MultiPoly F = designed_cubic(prm);
        CHECK_THROWS_AS(return_map(prm, F, 1e-3, 5e-7, 0.0), SmallRadius);
        CHECK_THROWS_AS(return_map(prm, F, 1e-3, -1.0, 0.0), std::invalid_argument);
    }
}

TEST_CASE("return map") {
    IntegrationConfig cfg;
    const MultiPoly zero;
    SECTION("eps = 0 preserves the radius exactly") {
        for (double b : {1.0, 4.0}) {
            const Params prm{1.0, b, 0.0};
            for (double r : {0.5, 1.0, 2.0}) {
                const ReturnMapResult out = return_map(prm, zero, 0.0, r, 0.0, cfg);
                CHECK(out.r == Catch::Approx(r).margin(1e-12));
                CHECK(out.Z == 0.0);
                CHECK(out.period_time == Catch::Approx(2.0 * std::numbers::pi / std::sqrt(b))
                                             .margin(1e-10));
            }
        }
    }
    SECTION("eps = 0 scales Z by e^{2 pi a / sqrt(b)}") {
        const Params prm{1.0, 4.0, 0.0};
        const ReturnMapResult out = return_map(prm, zero, 0.0, 1.0, 0.01, cfg);
        CHECK(out.r == Catch::Approx(1.0).margin(1e-12));
        CHECK(out.Z == Catch::Approx(0.01 * std::exp(2.0 * std::numbers::pi * 1.0 / 2.0))
                           .epsilon(1e-9));
    }
    SECTION("fixed point sits O(eps) from the averaged root") {
        const Params prm{1.0, 1.0, 0.0};
        const MultiPoly F = designed_cubic(prm);
        const double eps = 1e-3;
        const PeriodicOrbit orbit = find_periodic_orbit(prm, F, eps, 1.05, cfg);
        CHECK(std::abs(orbit.r - 1.0) <= 0.02);
        const ReturnMapResult fixed = return_map(prm, F, eps, orbit.r, orbit.Z, cfg);
        CHECK(std::abs(fixed.r - orbit.r) <= 1e-9);
        CHECK(std::abs(fixed.Z - orbit.Z) <= 1e-9);
    }
}

TEST_CASE("periodic orbit shooting") {
    IntegrationConfig cfg;
    const Params prm{1.0, 1.0, 0.0};
    const MultiPoly F = designed_cubic(prm);
    SECTION("designed cubic at eps = 1e-2") {
        const PeriodicOrbit orbit = find_periodic_orbit(prm, F, 1e-2, 1.0, cfg);
        CHECK(std::abs(orbit.r - 1.0) <= 0.05);
        CHECK(orbit.period == Catch::Approx(2.0 * std::numbers::pi).epsilon(0.05));
        CHECK(max_abs(orbit.orbit.states.front() - orbit.orbit.states.back()) <= 1e-8);
        // physical times ascend from 0 to the period
        CHECK(orbit.orbit.times.front() == Catch::Approx(0.0).margin(1e-12));
        CHECK(orbit.orbit.times.back() == Catch::Approx(orbit.period).margin(1e-12));
    }
    SECTION("eps = 0 is rejected") {
        CHECK_THROWS_AS(find_periodic_orbit(prm, F, 0.0, 1.0, cfg), std::invalid_argument);
    }
}
