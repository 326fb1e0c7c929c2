#pragma once

// Cross-validation of the closed forms against numerics: pseudo-orbit
// verification by direct integration of the two arcs, limit-cycle
// confirmation by shooting and an eps-convergence study quantifying the
// first-order averaging prediction.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "triosc/averaging.hpp"
#include "triosc/closed_form.hpp"
#include "triosc/integrator.hpp"
#include "triosc/model.hpp"

namespace triosc {

struct Check {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
};

struct VerificationReport {
    std::vector<Check> checks;

    bool summary() const {
        for (const auto& c : checks)
            if (!c.passed)
                return false;
        return true;
    }
};

// Largest perturbation amplitude verify_limit_cycle accepts.
inline constexpr double kEpsMax = 0.05;

/// Five checks of the Figure-1 construction: both arcs land on Q under
/// direct integration, the norm inequalities hold, P and Q are X+ tangencies
/// and the arc directions match the sign analysis.
inline VerificationReport verify_pseudo_orbit(const Params& prm, const IntegrationConfig& cfg = {}) {
    if (!pseudo_orbit_exists(prm))
        throw ExistenceViolated("verify_pseudo_orbit: parameters outside the existence bands");
    const auto [P, Q] = tangency_points(prm);
    const auto [tm, tp] = transit_times(prm);
    VerificationReport rep;

    // In the negative band the arcs run in negative time; integrating
    // backward from P amplifies the transverse -a direction by e^{|a t|}, so
    // the same joining identity is checked forward from Q instead.
    auto arc_endpoint_error = [&](FieldSide side, double t_end) {
        auto f = [&prm, side](double, const State3& s) { return field(side, s, prm); };
        if (t_end >= 0.0) {
            const Trajectory traj = integrate(f, P, {0.0, t_end}, cfg);
            return max_abs(traj.states.back() - Q);
        }
        const Trajectory traj = integrate(f, Q, {0.0, -t_end}, cfg);
        return max_abs(traj.states.back() - P);
    };
    const double err_plus = arc_endpoint_error(FieldSide::Plus, tp);
    rep.checks.push_back({"outer_arc_reaches_Q", err_plus <= 1e-7, err_plus, 1e-7});
    const double err_minus = arc_endpoint_error(FieldSide::Minus, tm);
    rep.checks.push_back({"inner_arc_reaches_Q", err_minus <= 1e-7, err_minus, 1e-7});

    const NormConditions nc = norm_conditions(prm, 1000);
    const double margin =
        std::min(1.0 - nc.worst_inside, nc.worst_outside - 1.0);
    rep.checks.push_back(
        {"norm_inequalities", nc.inside_ok && nc.outside_ok, margin, kNormMargin});

    const bool tangency = classify_point(P, prm) == RegionLabel::TangencyPlus &&
                          classify_point(Q, prm) == RegionLabel::TangencyPlus;
    const double lie_max = std::max(std::abs(lie_derivative(FieldSide::Plus, P, prm)),
                                    std::abs(lie_derivative(FieldSide::Plus, Q, prm)));
    rep.checks.push_back({"joints_are_plus_tangencies", tangency, lie_max, kTangencyTol});

    const TimeSigns signs = time_signs(prm);
    const bool dir_ok = signs.t_minus_in_band &&
                        (tm > 0) == (signs.sign_t_minus > 0) &&
                        (tp > 0) == (signs.sign_t_plus > 0);
    rep.checks.push_back({"arc_directions_match_signs", dir_ok,
                          static_cast<double>(signs.sign_t_minus), 0.0});
    return rep;
}

struct ConvergenceRow {
    double eps = 0.0;
    double r_found = 0.0;
    double error = 0.0;  // |r_found - r0|
    double orbit_period = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    double slope = 0.0;  // least-squares slope of log error vs log eps
};

/// Shooting at each eps in a decreasing list, tabulating how fast the found
/// radius approaches the averaged root.
inline ConvergenceTable convergence_study(const Params& prm, const MultiPoly& F, double r0,
                                          const std::vector<double>& eps_list,
                                          const IntegrationConfig& cfg = {}) {
    if (eps_list.empty())
        throw std::invalid_argument("convergence_study: empty eps list");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (eps_list[i] <= 0.0)
            throw std::invalid_argument("convergence_study: eps values must be positive");
        if (i > 0 && eps_list[i] >= eps_list[i - 1])
            throw std::invalid_argument("convergence_study: eps values must decrease");
    }
    ConvergenceTable table;
    for (double eps : eps_list) {
        Params run = prm;
        run.eps = eps;
        const PeriodicOrbit orbit = find_periodic_orbit(run, F, eps, r0, cfg);
        table.rows.push_back({eps, orbit.r, std::abs(orbit.r - r0), orbit.period});
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(table.rows.size());
    for (const auto& row : table.rows) {
        const double x = std::log(row.eps);
        const double y = std::log(std::max(row.error, 1e-16));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    table.slope = denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
    return table;
}

/// Confirm one bifurcating cycle: shooting converges from the averaged root,
/// lands within the calibrated O(eps) distance of it, the orbit closes under
/// direct time integration and stays O(eps) close to the invariant plane.
/// c_conv <= 0 triggers self-calibration via a two-point convergence study.
inline VerificationReport verify_limit_cycle(const Params& prm, const MultiPoly& F, double eps,
                                             double r0, const IntegrationConfig& cfg = {},
                                             double c_conv = 0.0) {
    if (eps <= 0.0 || eps > kEpsMax)
        throw std::invalid_argument("verify_limit_cycle: need 0 < eps <= " +
                                    std::to_string(kEpsMax));
    if (r0 <= 0.0)
        throw std::invalid_argument("verify_limit_cycle: r0 must be positive");
    VerificationReport rep;

    PeriodicOrbit orbit;
    bool converged = true;
    try {
        Params run = prm;
        run.eps = eps;
        orbit = find_periodic_orbit(run, F, eps, r0, cfg);
    } catch (const NoConvergence&) {
        converged = false;
    }
    rep.checks.push_back({"shooting_converged", converged, converged ? 1.0 : 0.0, 0.0});
    if (!converged) {
        rep.checks.push_back({"averaging_prediction", false, 0.0, 0.0});
        rep.checks.push_back({"orbit_closes", false, 0.0, 0.0});
        rep.checks.push_back({"plane_residual", false, 0.0, 0.0});
        return rep;
    }

    if (c_conv <= 0.0) {
        const ConvergenceTable cal =
            convergence_study(prm, F, r0, {1e-2, std::pow(10.0, -2.5)}, cfg);
        c_conv = 0.0;
        for (const auto& row : cal.rows)
            c_conv = std::max(c_conv, row.error / row.eps);
    }
    const double pred_tol = std::max(3.0 * c_conv * eps, 1e-7);
    const double pred_err = std::abs(orbit.r - r0);
    rep.checks.push_back({"averaging_prediction", pred_err <= pred_tol, pred_err, pred_tol});

    Params run = prm;
    run.eps = eps;
    auto f = [&run, &F](double, const State3& s) { return field_perturbed(s, run, F); };
    const Trajectory loop = integrate(f, orbit.orbit.states.front(), {0.0, orbit.period}, cfg);
    const double closure = max_abs(loop.states.back() - orbit.orbit.states.front());
    rep.checks.push_back({"orbit_closes", closure <= 1e-7, closure, 1e-7});

    double plane_residual = 0.0;
    for (const State3& s : orbit.orbit.states)
        plane_residual = std::max(plane_residual, std::abs(s.y + prm.b * s.z));
    const double plane_tol = 10.0 * (prm.a * prm.a + prm.b) * eps;
    rep.checks.push_back({"plane_residual", plane_residual <= plane_tol, plane_residual, plane_tol});
    return rep;
}

}  // namespace triosc
