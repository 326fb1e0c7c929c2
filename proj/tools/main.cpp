// Command-line front end: check-pseudo, trace, simulate, averaged, predict
// and the verify suites. Reports are JSON on stdout; trajectories and tables
// are CSV files under --out. Exit codes: 0 success, 1 usage/config/runtime
// error, 2 analysis ran but the property does not hold.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "triosc/averaging.hpp"
#include "triosc/closed_form.hpp"
#include "triosc/config.hpp"
#include "triosc/integrator.hpp"
#include "triosc/io.hpp"
#include "triosc/model.hpp"
#include "triosc/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPropertyFails = 2;

bool use_color() {
    return std::getenv("NO_COLOR") == nullptr && isatty(fileno(stdout));
}

std::string passfail(bool ok) {
    if (!use_color())
        return ok ? "PASS" : "FAIL";
    return ok ? "\033[32mPASS\033[0m" : "\033[31mFAIL\033[0m";
}

struct CliOptions {
    std::string config_path;
    double a = std::numeric_limits<double>::quiet_NaN();
    double b = std::numeric_limits<double>::quiet_NaN();
    double eps = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> terms;
    std::string out_dir;
    int samples = -1;
    double r_max = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> x0;
    double t_end = std::numeric_limits<double>::quiet_NaN();
    bool emit_dat = false;
    std::vector<double> eps_list;
    double rel_tol = std::numeric_limits<double>::quiet_NaN();
};

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "JSON configuration file");
    cmd->add_option("--a", opt.a, "damping coefficient a");
    cmd->add_option("--b", opt.b, "stiffness b (> 0)");
    cmd->add_option("--eps", opt.eps, "perturbation amplitude eps");
    cmd->add_option("--term", opt.terms,
                    "polynomial term i,j,k,coeff (repeatable)");
    cmd->add_option("--out", opt.out_dir, "output directory for CSV files");
    cmd->add_option("--samples", opt.samples, "samples per arc");
    cmd->add_option("--r-max", opt.r_max, "root search bound");
    cmd->add_option("--x0", opt.x0, "initial state x,y,z")->expected(3);
    cmd->add_option("--t-end", opt.t_end, "simulation end time");
    cmd->add_option("--eps-list", opt.eps_list, "eps values for the convergence study");
    cmd->add_option("--rel-tol", opt.rel_tol, "integrator relative tolerance");
    cmd->add_flag("--dat", opt.emit_dat, "also write a gnuplot .dat file");
}

triosc::RunConfig build_config(const CliOptions& opt) {
    nlohmann::json j = nlohmann::json::object();
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in)
            throw triosc::ConfigInvalid("cannot read config file: " + opt.config_path);
        in >> j;
    }
    triosc::RunConfig cfg = triosc::config_from_json(j);
    if (!std::isnan(opt.a))
        cfg.a = opt.a;
    if (!std::isnan(opt.b))
        cfg.b = opt.b;
    if (!std::isnan(opt.eps))
        cfg.eps = opt.eps;
    for (const std::string& spec : opt.terms) {
        triosc::TermSpec term;
        if (std::sscanf(spec.c_str(), "%d,%d,%d,%lf", &term.i, &term.j, &term.k, &term.coeff) != 4)
            throw triosc::ConfigInvalid("bad --term, expected i,j,k,coeff: " + spec);
        cfg.poly_terms.push_back(term);
    }
    if (!opt.out_dir.empty())
        cfg.out_dir = opt.out_dir;
    if (opt.samples > 0)
        cfg.samples = opt.samples;
    if (!std::isnan(opt.r_max))
        cfg.r_max = opt.r_max;
    if (opt.x0.size() == 3)
        cfg.x0 = {opt.x0[0], opt.x0[1], opt.x0[2]};
    if (!std::isnan(opt.t_end))
        cfg.t_end = opt.t_end;
    if (!std::isnan(opt.rel_tol))
        cfg.integ.rel_tol = opt.rel_tol;
    if (!opt.eps_list.empty())
        cfg.eps_list = opt.eps_list;
    cfg.emit_dat = cfg.emit_dat || opt.emit_dat;
    std::filesystem::create_directories(cfg.out_dir);
    return cfg;
}

std::string out_path(const triosc::RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_check_pseudo(const CliOptions& opt) {
    const triosc::RunConfig cfg = build_config(opt);
    cfg.require_part1("check-pseudo");
    const triosc::Params prm = cfg.params();
    nlohmann::json j;
    j["a"] = prm.a;
    j["eps"] = prm.eps;
    const bool exists = triosc::pseudo_orbit_exists(prm);
    j["exists"] = exists;
    j["band"] = prm.eps > 0 ? "positive" : "negative";
    if (std::abs(prm.eps) < std::abs(prm.a) && prm.eps != 0.0) {
        const auto [P, Q] = triosc::tangency_points(prm);
        j["P"] = triosc::to_json(P);
        j["Q"] = triosc::to_json(Q);
        try {
            const auto [tm, tp] = triosc::transit_times(prm);
            j["t_minus"] = tm;
            j["t_plus"] = tp;
        } catch (const triosc::LogDomain&) {
            j["t_minus"] = nullptr;
            j["t_plus"] = 2.0 * std::atan(std::sqrt(prm.a * prm.a - prm.eps * prm.eps) / prm.eps);
        }
        const triosc::TimeSigns signs = triosc::time_signs(prm);
        j["sign_t_minus"] = signs.sign_t_minus;
        j["sign_t_plus"] = signs.sign_t_plus;
        j["t_minus_in_band"] = signs.t_minus_in_band;
    }
    print_json(j);
    return exists ? kExitOk : kExitPropertyFails;
}

int run_simulation(const triosc::RunConfig& cfg) {
    const triosc::Params prm = cfg.params();
    const triosc::State3 x0{(*cfg.x0)[0], (*cfg.x0)[1], (*cfg.x0)[2]};
    const triosc::Trajectory traj =
        triosc::integrate_piecewise(prm, x0, {0.0, cfg.t_end}, cfg.integ);
    // Label each sample with the side it sits on; samples within the event
    // band are on the sphere itself.
    auto row_label = [&](const triosc::State3& s) -> const char* {
        const double h = triosc::switching_h(s);
        if (h > 10.0 * cfg.integ.event_tol)
            return "outer";
        if (h < -10.0 * cfg.integ.event_tol)
            return "inner";
        return "sphere";
    };
    {
        auto out = triosc::open_output(out_path(cfg, "trajectory.csv"));
        out << "t,x,y,z,arc\n";
        for (std::size_t i = 0; i < traj.times.size(); ++i)
            out << triosc::format_double(traj.times[i]) << ','
                << triosc::format_double(traj.states[i].x) << ','
                << triosc::format_double(traj.states[i].y) << ','
                << triosc::format_double(traj.states[i].z) << ',' << row_label(traj.states[i])
                << '\n';
    }
    triosc::write_events_csv(out_path(cfg, "events.csv"), traj.events);
    if (cfg.emit_dat)
        triosc::write_dat(out_path(cfg, "trajectory.dat"), {{&traj, "piecewise"}});
    nlohmann::json j;
    j["rows"] = traj.times.size();
    j["events"] = traj.events.size();
    j["trajectory_csv"] = out_path(cfg, "trajectory.csv");
    j["events_csv"] = out_path(cfg, "events.csv");
    print_json(j);
    return kExitOk;
}

int cmd_trace(const CliOptions& opt) {
    const triosc::RunConfig cfg = build_config(opt);
    cfg.require_part1("trace");
    if (cfg.x0)
        return run_simulation(cfg);
    const triosc::Params prm = cfg.params();
    if (!triosc::pseudo_orbit_exists(prm)) {
        std::cerr << "trace: no pseudo-orbit at these parameters and no --x0 given\n";
        return kExitPropertyFails;
    }
    const triosc::PseudoOrbit orbit = triosc::build_pseudo_orbit(prm, cfg.samples);
    triosc::write_trajectory_csv(
        out_path(cfg, "pseudo_orbit.csv"),
        {{&orbit.arc_inside, "inner"}, {&orbit.arc_outside, "outer"}});
    std::vector<triosc::CrossingEvent> events = orbit.arc_inside.events;
    triosc::write_events_csv(out_path(cfg, "events.csv"), events);
    if (cfg.emit_dat)
        triosc::write_dat(out_path(cfg, "pseudo_orbit.dat"),
                          {{&orbit.arc_inside, "inner"}, {&orbit.arc_outside, "outer"}});
    nlohmann::json j;
    j["rows"] = orbit.arc_inside.times.size() + orbit.arc_outside.times.size();
    j["pseudo_orbit_csv"] = out_path(cfg, "pseudo_orbit.csv");
    j["events_csv"] = out_path(cfg, "events.csv");
    j["P"] = triosc::to_json(orbit.joint_p);
    j["Q"] = triosc::to_json(orbit.joint_q);
    print_json(j);
    return kExitOk;
}

int cmd_simulate(const CliOptions& opt) {
    const triosc::RunConfig cfg = build_config(opt);
    cfg.require_part1("simulate");
    if (!cfg.x0)
        throw triosc::ConfigInvalid("simulate: requires --x0");
    return run_simulation(cfg);
}

int cmd_averaged(const CliOptions& opt) {
    const triosc::RunConfig cfg = build_config(opt);
    cfg.require_part2("averaged");
    const triosc::Params prm = cfg.params();
    const triosc::MultiPoly F = cfg.polynomial();
    const triosc::AveragedPoly fbar = triosc::averaged_function(prm, F);
    nlohmann::json j;
    j["degree_F"] = F.degree();
    j["bound"] = triosc::cycle_bound(F.degree());
    j["coeffs"] = triosc::to_json(fbar);
    if (fbar.identically_zero()) {
        j["identically_zero"] = true;
        print_json(j);
        return kExitPropertyFails;
    }
    j["identically_zero"] = false;
    nlohmann::json cross = nlohmann::json::array();
    double max_residual = 0.0;
    for (double r : {0.5, 1.0, 1.5, 2.0, 2.5}) {
        const double closed = fbar.eval(r);
        const double quad = triosc::averaged_quadrature(prm, F, r);
        const double residual = std::abs(closed - quad);
        max_residual = std::max(max_residual, residual);
        cross.push_back({{"r", r}, {"closed", closed}, {"quadrature", quad}, {"residual", residual}});
    }
    j["cross_check"] = cross;
    j["max_residual"] = max_residual;
    print_json(j);
    return kExitOk;
}

int cmd_predict(const CliOptions& opt) {
    const triosc::RunConfig cfg = build_config(opt);
    cfg.require_part2("predict");
    const triosc::Params prm = cfg.params();
    try {
        const triosc::CyclePrediction pred =
            triosc::predict_limit_cycles(prm, cfg.polynomial(), cfg.r_max);
        print_json(triosc::to_json(pred));
        return kExitOk;
    } catch (const triosc::IdenticallyZero& e) {
        nlohmann::json j;
        j["identically_zero"] = true;
        j["error"] = e.what();
        print_json(j);
        return kExitPropertyFails;
    }
}

int cmd_verify_pseudo(const CliOptions& opt) {
    const triosc::RunConfig cfg = build_config(opt);
    cfg.require_part1("verify pseudo");
    const triosc::Params prm = cfg.params();
    if (!triosc::pseudo_orbit_exists(prm)) {
        nlohmann::json j;
        j["exists"] = false;
        print_json(j);
        return kExitPropertyFails;
    }
    const triosc::VerificationReport rep = triosc::verify_pseudo_orbit(prm, cfg.integ);
    for (const auto& c : rep.checks)
        std::cerr << passfail(c.passed) << ' ' << c.name << '\n';
    print_json(triosc::to_json(rep));
    return rep.summary() ? kExitOk : kExitPropertyFails;
}

int cmd_verify_cycles(const CliOptions& opt) {
    const triosc::RunConfig cfg = build_config(opt);
    cfg.require_part2("verify cycles");
    if (!cfg.has_eps() || cfg.eps <= 0.0)
        throw triosc::ConfigInvalid("verify cycles: requires eps > 0");
    const triosc::Params prm = cfg.params();
    const triosc::MultiPoly F = cfg.polynomial();
    const triosc::CyclePrediction pred = triosc::predict_limit_cycles(prm, F, cfg.r_max);
    nlohmann::json reports = nlohmann::json::array();
    bool all_ok = !pred.roots.empty();
    int index = 0;
    for (const auto& root : pred.roots) {
        const triosc::VerificationReport rep =
            triosc::verify_limit_cycle(prm, F, cfg.eps, root.r, cfg.integ);
        for (const auto& c : rep.checks)
            std::cerr << passfail(c.passed) << " r0=" << root.r << ' ' << c.name << '\n';
        all_ok = all_ok && rep.summary();
        nlohmann::json entry = triosc::to_json(rep);
        entry["r0"] = root.r;
        triosc::Params run = prm;
        run.eps = cfg.eps;
        try {
            const triosc::PeriodicOrbit orbit =
                triosc::find_periodic_orbit(run, F, cfg.eps, root.r, cfg.integ);
            const std::string file = out_path(cfg, "orbit_" + std::to_string(index) + ".csv");
            triosc::write_trajectory_csv(file, {{&orbit.orbit, "cycle"}});
            entry["orbit_csv"] = file;
            entry["r_star"] = orbit.r;
            entry["period"] = orbit.period;
        } catch (const triosc::NoConvergence&) {
            entry["orbit_csv"] = nullptr;
        }
        reports.push_back(entry);
        ++index;
    }
    if (!cfg.eps_list.empty()) {
        const double r0 = pred.roots.empty() ? 1.0 : pred.roots.front().r;
        const triosc::ConvergenceTable table =
            triosc::convergence_study(prm, F, r0, cfg.eps_list, cfg.integ);
        triosc::write_convergence_csv(out_path(cfg, "convergence.csv"), table);
        nlohmann::json conv;
        conv["slope"] = table.slope;
        conv["csv"] = out_path(cfg, "convergence.csv");
        reports.push_back({{"convergence", conv}});
    }
    nlohmann::json j;
    j["prediction"] = triosc::to_json(pred);
    j["reports"] = reports;
    print_json(j);
    return all_ok ? kExitOk : kExitPropertyFails;
}

int cmd_verify_moments(const CliOptions& opt) {
    const triosc::RunConfig cfg = build_config(opt);
    (void)cfg;
    double max_residual = 0.0;
    int cases = 0;
    bool odd_zero = true;
    for (double b : {1.0, 2.0, 4.0}) {
        const double w = std::sqrt(b);
        for (int p = 0; p <= 10; ++p) {
            for (int q = 0; q <= 10; ++q) {
                const double closed = triosc::trig_moment(p, q, b);
                auto integrand = [&](double th) {
                    return std::pow(std::sin(w * th), p) * std::pow(std::cos(w * th), q);
                };
                const double quad = triosc::detail::adaptive_quadrature(
                    integrand, 0.0, 2.0 * std::numbers::pi / w, 1e-13);
                max_residual = std::max(max_residual, std::abs(closed - quad));
                if ((p % 2 == 1 || q % 2 == 1) && closed != 0.0)
                    odd_zero = false;
                ++cases;
            }
        }
    }
    const bool ok = max_residual <= 1e-11 && odd_zero;
    std::cerr << passfail(ok) << " trig moment suite\n";
    nlohmann::json j;
    j["cases"] = cases;
    j["max_residual"] = max_residual;
    j["odd_cases_exact_zero"] = odd_zero;
    j["passed"] = ok;
    print_json(j);
    return ok ? kExitOk : kExitPropertyFails;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Piecewise-smooth third-order oscillator: pseudo-orbit and "
                 "averaged limit-cycle analysis"};
    app.require_subcommand(1);

    CliOptions opt;
    auto* check = app.add_subcommand("check-pseudo", "existence bands, P, Q and transit times");
    add_common_flags(check, opt);
    auto* trace = app.add_subcommand("trace", "emit the closed-form pseudo-orbit as CSV");
    add_common_flags(trace, opt);
    auto* simulate = app.add_subcommand("simulate", "piecewise integration from --x0");
    add_common_flags(simulate, opt);
    auto* averaged = app.add_subcommand("averaged", "averaged polynomial and quadrature cross-check");
    add_common_flags(averaged, opt);
    auto* predict = app.add_subcommand("predict", "limit-cycle count and bound");
    add_common_flags(predict, opt);
    auto* verify = app.add_subcommand("verify", "numerical verification suites");
    verify->require_subcommand(1);
    auto* vp = verify->add_subcommand("pseudo", "verify the pseudo-orbit numerically");
    add_common_flags(vp, opt);
    auto* vc = verify->add_subcommand("cycles", "verify bifurcating limit cycles by shooting");
    add_common_flags(vc, opt);
    auto* vm = verify->add_subcommand("moments", "trig moments vs adaptive quadrature");
    add_common_flags(vm, opt);

    try {
        app.parse(argc, argv);
        if (check->parsed())
            return cmd_check_pseudo(opt);
        if (trace->parsed())
            return cmd_trace(opt);
        if (simulate->parsed())
            return cmd_simulate(opt);
        if (averaged->parsed())
            return cmd_averaged(opt);
        if (predict->parsed())
            return cmd_predict(opt);
        if (vp->parsed())
            return cmd_verify_pseudo(opt);
        if (vc->parsed())
            return cmd_verify_cycles(opt);
        if (vm->parsed())
            return cmd_verify_moments(opt);
        return kExitError;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    } catch (const triosc::ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
}
