#pragma once

// Emission of machine-readable artifacts: strictly schema'd CSV trajectories
// (header t,x,y,z,arc), event tables, gnuplot blocks and JSON reports. All
// floats are printed with 17 significant digits so reruns are byte-identical.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "triosc/averaging.hpp"
#include "triosc/closed_form.hpp"
#include "triosc/trajectory.hpp"
#include "triosc/verify.hpp"

namespace triosc {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open output file: " + path);
    return out;
}

/// Rows t,x,y,z,arc for a list of labelled trajectory pieces.
inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<std::pair<const Trajectory*, std::string>>& arcs) {
    auto out = open_output(path);
    out << "t,x,y,z,arc\n";
    for (const auto& [traj, label] : arcs)
        for (std::size_t i = 0; i < traj->times.size(); ++i)
            out << format_double(traj->times[i]) << ',' << format_double(traj->states[i].x) << ','
                << format_double(traj->states[i].y) << ',' << format_double(traj->states[i].z)
                << ',' << label << '\n';
}

inline void write_events_csv(const std::string& path, const std::vector<CrossingEvent>& events) {
    auto out = open_output(path);
    out << "t,x,y,z,label\n";
    for (const auto& ev : events)
        out << format_double(ev.t) << ',' << format_double(ev.p.x) << ',' << format_double(ev.p.y)
            << ',' << format_double(ev.p.z) << ',' << to_string(ev.label) << '\n';
}

/// Gnuplot-friendly blocks: columns separated by spaces, arcs separated by a
/// blank line.
inline void write_dat(const std::string& path,
                      const std::vector<std::pair<const Trajectory*, std::string>>& arcs) {
    auto out = open_output(path);
    out << "# t x y z arc\n";
    bool first = true;
    for (const auto& [traj, label] : arcs) {
        if (!first)
            out << '\n';
        first = false;
        for (std::size_t i = 0; i < traj->times.size(); ++i)
            out << format_double(traj->times[i]) << ' ' << format_double(traj->states[i].x) << ' '
                << format_double(traj->states[i].y) << ' ' << format_double(traj->states[i].z)
                << ' ' << label << '\n';
    }
}

inline nlohmann::json to_json(const State3& p) {
    return nlohmann::json::array({p.x, p.y, p.z});
}

inline nlohmann::json to_json(const Check& c) {
    return {{"name", c.name},
            {"passed", c.passed},
            {"measured", c.measured},
            {"tolerance", c.tolerance}};
}

inline nlohmann::json to_json(const VerificationReport& rep) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : rep.checks)
        checks.push_back(to_json(c));
    return {{"checks", checks}, {"summary", rep.summary()}};
}

inline nlohmann::json to_json(const CyclePrediction& pred) {
    nlohmann::json roots = nlohmann::json::array();
    for (const auto& r : pred.roots)
        roots.push_back({{"r", r.r}, {"derivative", r.derivative}});
    return {{"roots", roots},
            {"count", pred.count},
            {"bound", pred.bound},
            {"attained", pred.attained}};
}

inline nlohmann::json to_json(const AveragedPoly& fbar) {
    nlohmann::json coeffs = nlohmann::json::object();
    for (const auto& [d, c] : fbar.coeffs)
        coeffs[std::to_string(d)] = c;
    return coeffs;
}

inline void write_convergence_csv(const std::string& path, const ConvergenceTable& table) {
    auto out = open_output(path);
    out << "eps,r_found,error,orbit_period\n";
    for (const auto& row : table.rows)
        out << format_double(row.eps) << ',' << format_double(row.r_found) << ','
            << format_double(row.error) << ',' << format_double(row.orbit_period) << '\n';
}

}  // namespace triosc
