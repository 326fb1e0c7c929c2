// Acceptance suite: one criterion per run_criterion call, one PASS/FAIL line
// each, nonzero exit when any fails. argv[1] is the path to the CLI binary,
// used where a criterion exercises the command-line surface.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "triosc/averaging.hpp"
#include "triosc/closed_form.hpp"
#include "triosc/config.hpp"
#include "triosc/integrator.hpp"
#include "triosc/verify.hpp"

using namespace triosc;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_out;
int g_failures = 0;

struct Tolerance {
    double limit_seconds;
};

void run_criterion(int number, const std::string& title, double time_limit_s,
                   const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
        ok = false;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (time_limit_s > 0 && elapsed > time_limit_s) {
        ok = false;
        detail += (detail.empty() ? "" : "; ") + std::string("runtime ") +
                  std::to_string(elapsed) + "s exceeds " + std::to_string(time_limit_s) + "s";
    }
    std::printf("%s criterion %d: %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", number, title.c_str(),
                elapsed, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok)
        ++g_failures;
}

int run_cli(const std::string& args, const fs::path& stdout_file) {
    const std::string cmd = g_cli + " " + args + " > " + stdout_file.string() + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct CsvRow {
    double t, x, y, z;
    std::string arc;
};

std::vector<CsvRow> read_csv(const fs::path& path) {
    std::ifstream in(path);
    std::vector<CsvRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        CsvRow row;
        char arc[64] = {};
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%63s", &row.t, &row.x, &row.y, &row.z,
                        arc) == 5) {
            row.arc = arc;
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<double> band_interior(double a, int n, bool positive) {
    const double lo = std::abs(a) / std::numbers::sqrt2;
    const double hi = std::abs(a);
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        const double eps = lo + (hi - lo) * (i + 1.0) / (n + 1.0);
        out.push_back(positive ? eps : -eps);
    }
    return out;
}

MultiPoly random_poly(std::mt19937_64& rng, int max_degree) {
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::bernoulli_distribution keep(0.5);
    MultiPoly F;
    for (int i = 0; i <= max_degree; ++i)
        for (int j = 0; i + j <= max_degree; ++j)
            for (int k = 0; i + j + k <= max_degree; ++k)
                if (keep(rng))
                    F.add_term(i, j, k, coeff(rng));
    return F;
}

bool criterion1_figure1(std::string& detail) {
    const Params prm{5.0, 0.0, 4.0};
    const State3 P{-3.0 / 5.0, 4.0 / 5.0, 0.0};
    const State3 Q{3.0 / 5.0, 4.0 / 5.0, 0.0};
    const double t_minus = std::log(7.0);
    const double t_plus = 2.0 * std::atan(0.75);

    // CLI reports existence with the exact transit times.
    const fs::path report = g_out / "check_pseudo.json";
    if (run_cli("check-pseudo --a 5 --eps 4", report) != 0) {
        detail = "check-pseudo exit code != 0";
        return false;
    }
    nlohmann::json j;
    std::ifstream(report) >> j;
    if (!j.at("exists").get<bool>() ||
        std::abs(j.at("t_minus").get<double>() - t_minus) > 1e-12 ||
        std::abs(j.at("t_plus").get<double>() - t_plus) > 1e-12) {
        detail = "check-pseudo report values off";
        return false;
    }

    // Emitted pseudo-orbit joins P and Q with the stated arc times.
    const fs::path trace_dir = g_out / "trace";
    if (run_cli("trace --a 5 --eps 4 --samples 500 --out " + trace_dir.string(),
                g_out / "trace.json") != 0) {
        detail = "trace exit code != 0";
        return false;
    }
    const auto rows = read_csv(trace_dir / "pseudo_orbit.csv");
    if (rows.size() != 1000) {
        detail = "expected 1000 CSV rows, got " + std::to_string(rows.size());
        return false;
    }
    auto row_state = [](const CsvRow& r) { return State3{r.x, r.y, r.z}; };
    double join_err = 0.0, time_err = 0.0;
    for (const std::string arc : {"inner", "outer"}) {
        std::vector<CsvRow> part;
        for (const auto& r : rows)
            if (r.arc == arc)
                part.push_back(r);
        if (part.size() != 500) {
            detail = "arc " + arc + " has " + std::to_string(part.size()) + " rows";
            return false;
        }
        join_err = std::max(join_err, max_abs(row_state(part.front()) - P));
        join_err = std::max(join_err, max_abs(row_state(part.back()) - Q));
        time_err = std::max(time_err,
                            std::abs(part.back().t - (arc == "inner" ? t_minus : t_plus)));
    }
    if (join_err > 1e-10 || time_err > 1e-12) {
        detail = "emitted arcs do not join P and Q at the stated times";
        return false;
    }

    // Independent numeric integration of each arc lands on Q.
    auto fp = [&](double, const State3& s) { return field_plus(s, prm); };
    auto fm = [&](double, const State3& s) { return field_minus(s, prm); };
    const double err_plus = max_abs(integrate(fp, P, {0.0, t_plus}).states.back() - Q);
    const double err_minus = max_abs(integrate(fm, P, {0.0, t_minus}).states.back() - Q);
    if (err_plus > 1e-7 || err_minus > 1e-7) {
        detail = "numeric arc endpoints off Q";
        return false;
    }

    // Out-of-band parameters exit with code 2.
    if (run_cli("check-pseudo --a 5 --eps 3", g_out / "check_pseudo_out.json") != 2) {
        detail = "check-pseudo at eps=3 should exit 2";
        return false;
    }
    return true;
}

bool criterion2_band_sweep(std::string& detail) {
    for (double a : {2.0, 5.0, 10.0}) {
        for (bool positive : {true, false}) {
            for (double eps : band_interior(a, 5, positive)) {
                const Params prm{a, 0.0, eps};
                const VerificationReport rep = verify_pseudo_orbit(prm);
                if (!rep.summary()) {
                    std::ostringstream os;
                    os << "verification failed at a=" << a << " eps=" << eps << ":";
                    for (const auto& c : rep.checks)
                        if (!c.passed)
                            os << ' ' << c.name << " measured " << c.measured;
                    detail = os.str();
                    return false;
                }
            }
        }
    }
    const std::vector<Params> outside{{5.0, 0.0, 3.0},
                                      {5.0, 0.0, 0.5},
                                      {5.0, 0.0, 5.2},
                                      {2.0, 0.0, 1.0},
                                      {10.0, 0.0, -7.0}};
    for (const Params& prm : outside) {
        if (pseudo_orbit_exists(prm)) {
            detail = "existence predicate true outside the bands";
            return false;
        }
    }
    return true;
}

bool criterion3_tangency_certificates(std::string& detail) {
    double worst = 0.0;
    for (double a : {2.0, 5.0, 10.0}) {
        for (bool positive : {true, false}) {
            for (double eps : band_interior(a, 5, positive)) {
                const Params prm{a, 0.0, eps};
                const auto [P, Q] = tangency_points(prm);
                worst = std::max(worst, std::abs(lie_derivative(FieldSide::Plus, P, prm)));
                worst = std::max(worst, std::abs(lie_derivative(FieldSide::Plus, Q, prm)));
                const double expected = -4.0 * eps * std::sqrt(a * a - eps * eps) / (a * a);
                worst = std::max(worst,
                                 std::abs(lie_derivative(FieldSide::Minus, P, prm) - expected));
            }
        }
    }
    if (worst > 1e-12) {
        detail = "worst certificate residual " + std::to_string(worst);
        return false;
    }
    return true;
}

bool criterion4_moments(std::string& detail) {
    double worst = 0.0;
    for (double b : {1.0, 2.0, 4.0}) {
        const double w = std::sqrt(b);
        for (int p = 0; p <= 10; ++p) {
            for (int q = 0; q <= 10; ++q) {
                const double closed = trig_moment(p, q, b);
                if ((p % 2 == 1 || q % 2 == 1) && closed != 0.0) {
                    detail = "odd moment not exactly zero";
                    return false;
                }
                auto integrand = [&](double th) {
                    return std::pow(std::sin(w * th), p) * std::pow(std::cos(w * th), q);
                };
                const double quad = detail::adaptive_quadrature(
                    integrand, 0.0, 2.0 * std::numbers::pi / w, 1e-13);
                worst = std::max(worst, std::abs(closed - quad));
            }
        }
    }
    if (worst > 1e-11) {
        detail = "worst moment residual " + std::to_string(worst);
        return false;
    }
    // The CLI moment suite reaches the same verdict.
    if (run_cli("verify moments", g_out / "moments.json") != 0) {
        detail = "CLI verify moments failed";
        return false;
    }
    return true;
}

bool criterion5_oracle_equivalence(std::string& detail) {
    std::mt19937_64 rng(20240811);
    std::uniform_real_distribution<double> ua(0.5, 2.0), ub(0.5, 3.0), ur(0.05, 3.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Params prm{ua(rng), ub(rng), 0.0};
        const MultiPoly F = random_poly(rng, 5);
        const AveragedPoly fbar = averaged_function(prm, F);
        for (const auto& [d, c] : fbar.coeffs) {
            if (d % 2 == 0) {
                detail = "even-degree coefficient produced";
                return false;
            }
            (void)c;
        }
        for (int i = 0; i < 20; ++i) {
            const double r = ur(rng);
            worst = std::max(worst,
                             std::abs(fbar.eval(r) - averaged_quadrature(prm, F, r, 1e-12)));
        }
    }
    if (worst > 1e-9) {
        detail = "worst closed-vs-quadrature residual " + std::to_string(worst);
        return false;
    }
    return true;
}

bool criterion6_bounds(std::string& detail) {
    const Params prm{1.0, 1.0, 0.0};
    const MultiPoly cubic = design_polynomial(prm, {{1, -1.0}, {3, 1.0}});
    const CyclePrediction pc = predict_limit_cycles(prm, cubic, 10.0);
    if (pc.count != 1 || pc.bound != 2) {
        detail = "designed cubic: count " + std::to_string(pc.count) + " bound " +
                 std::to_string(pc.bound);
        return false;
    }
    const MultiPoly quintic = design_polynomial(prm, {{1, 4.0}, {3, -5.0}, {5, 1.0}});
    const CyclePrediction pq = predict_limit_cycles(prm, quintic, 10.0);
    if (pq.count != 2 || pq.bound != 3) {
        detail = "designed quintic: count " + std::to_string(pq.count) + " bound " +
                 std::to_string(pq.bound);
        return false;
    }
    std::mt19937_64 rng(424242);
    std::uniform_int_distribution<int> deg(1, 6);
    std::uniform_real_distribution<double> ua(0.5, 2.5), ub(0.5, 4.0);
    int done = 0;
    while (done < 200) {
        const Params rp{ua(rng), ub(rng), 0.0};
        const MultiPoly F = random_poly(rng, deg(rng));
        try {
            const CyclePrediction pred = predict_limit_cycles(rp, F, 10.0);
            if (pred.count > pred.bound) {
                detail = "bound exceeded on a random instance";
                return false;
            }
            ++done;
        } catch (const IdenticallyZero&) {
        }
    }
    return true;
}

bool criterion7_limit_cycle(std::string& detail) {
    const Params prm{1.0, 1.0, 0.0};
    const MultiPoly F = design_polynomial(prm, {{1, -1.0}, {3, 1.0}});
    Params run = prm;
    run.eps = 1e-2;
    const PeriodicOrbit orbit = find_periodic_orbit(run, F, 1e-2, 1.0);
    if (std::abs(orbit.r - 1.0) > 0.05) {
        detail = "r* = " + std::to_string(orbit.r);
        return false;
    }
    if (std::abs(orbit.period - 2.0 * std::numbers::pi) > 0.05 * 2.0 * std::numbers::pi) {
        detail = "period = " + std::to_string(orbit.period);
        return false;
    }
    const std::vector<double> eps_list{std::pow(10.0, -1.5), 1e-2, std::pow(10.0, -2.5), 1e-3};
    const ConvergenceTable table = convergence_study(prm, F, 1.0, eps_list);
    if (table.slope < 0.8 || table.slope > 1.2) {
        detail = "convergence slope " + std::to_string(table.slope);
        return false;
    }
    return true;
}

bool criterion8_structure(std::string& detail) {
    double worst = 0.0;
    for (double a : {-3.0, -1.0, 0.5, 1.0, 2.0, 5.0})
        for (double b : {0.25, 1.0, 2.0, 4.0, 9.0}) {
            const Params prm{a, b, 0.0};
            const JordanTransform t = jordan_transform(prm);
            worst = std::max(worst, max_abs_diff(t.B * t.J * t.B_inv,
                                                 linear_part_unperturbed(prm)));
        }
    if (worst > 1e-12) {
        detail = "worst similarity residual " + std::to_string(worst);
        return false;
    }
    // Piecewise-system spectra {-a, +-1} and {-a, +-i}: check the eigenpairs
    // satisfy the characteristic equations and M v = lambda v.
    for (double a : {1.0, 2.0, 5.0, 10.0}) {
        const Params prm{a, 0.0, 0.4 * a};
        for (FieldSide side : {FieldSide::Minus, FieldSide::Plus}) {
            const EigenData e = eigen_data(side, prm);
            const double sgn = side == FieldSide::Minus ? 1.0 : -1.0;
            for (int i = 0; i < 3; ++i) {
                const auto lam = e.values[static_cast<std::size_t>(i)];
                const auto res = (lam + a) * (lam * lam - sgn);
                if (std::abs(res) > 1e-12) {
                    detail = "piecewise characteristic residual too large";
                    return false;
                }
                const auto& v = e.vectors[static_cast<std::size_t>(i)];
                const std::array<std::complex<double>, 3> mv{
                    v[1], sgn * v[0] - a * v[1] + sgn * a * v[2], v[0]};
                for (int c = 0; c < 3; ++c)
                    if (std::abs(mv[static_cast<std::size_t>(c)] -
                                 lam * v[static_cast<std::size_t>(c)]) > 1e-12) {
                        detail = "piecewise eigenpair residual too large";
                        return false;
                    }
            }
        }
    }
    // Unperturbed-system spectrum {-a, +-i sqrt(b)} solves lambda^3 + a lambda^2 +
    // b lambda + a b = 0.
    for (double a : {1.0, 2.0, 5.0})
        for (double b : {1.0, 4.0, 9.0}) {
            for (const auto& lam : spectrum_unperturbed({a, b, 0.0})) {
                const auto res = lam * lam * lam + a * lam * lam + b * lam + a * b;
                if (std::abs(res) > 1e-12) {
                    detail = "unperturbed characteristic residual too large";
                    return false;
                }
            }
        }
    return true;
}

bool criterion9_ect_and_sturm(std::string& detail) {
    for (int k = 0; k <= 5; ++k)
        if (!ect_check(k, {0.1, 1.0, 10.0})) {
            detail = "ect_check failed at k=" + std::to_string(k);
            return false;
        }
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::uniform_int_distribution<int> halfdeg(0, 5);
    for (int trial = 0; trial < 100; ++trial) {
        AveragedPoly fbar;
        const int m = halfdeg(rng);
        for (int d = 0; d <= m; ++d) {
            const double c = coeff(rng);
            if (c != 0.0)
                fbar.coeffs[2 * d + 1] = c;
        }
        if (fbar.identically_zero())
            continue;
        std::vector<RootInfo> roots;
        try {
            roots = simple_positive_roots(fbar, 9.0);
        } catch (const IdenticallyZero&) {
            continue;
        }
        // Fine-grid sign scan as the oracle.
        std::vector<double> scan;
        const int kGrid = 300000;
        double prev = fbar.eval(9.0 * 0.5 / kGrid);
        for (int i = 1; i <= kGrid; ++i) {
            const double r = 9.0 * i / kGrid;
            const double v = fbar.eval(r);
            if ((prev > 0) != (v > 0) && prev != 0.0)
                scan.push_back(r);
            prev = v;
        }
        if (roots.size() != scan.size()) {
            detail = "trial " + std::to_string(trial) + ": Sturm found " +
                     std::to_string(roots.size()) + " roots, scan " +
                     std::to_string(scan.size());
            return false;
        }
        for (std::size_t i = 0; i < roots.size(); ++i)
            if (std::abs(roots[i].r - scan[i]) > 9.0 / kGrid + 1e-9) {
                detail = "root location mismatch";
                return false;
            }
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-cli>\n");
        return 64;
    }
    g_cli = argv[1];
    g_out = fs::path("acceptance_out");
    fs::create_directories(g_out);

    run_criterion(1, "Figure 1 reproduction (a=5, eps=4)", 1.0, criterion1_figure1);
    run_criterion(2, "existence band sweep", 30.0, criterion2_band_sweep);
    run_criterion(3, "tangency certificates", 0.0, criterion3_tangency_certificates);
    run_criterion(4, "trig moment suite vs quadrature", 10.0, criterion4_moments);
    run_criterion(5, "averaged-function oracle equivalence", 0.0, criterion5_oracle_equivalence);
    run_criterion(6, "cycle-count bounds", 0.0, criterion6_bounds);
    run_criterion(7, "limit-cycle confirmation and convergence rate", 60.0,
                  criterion7_limit_cycle);
    run_criterion(8, "eigenstructure and similarity checks", 0.0, criterion8_structure);
    run_criterion(9, "Chebyshev Wronskians and Sturm-vs-scan roots", 0.0,
                  criterion9_ect_and_sturm);

    if (g_failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", g_failures);
    return g_failures;
}
