#pragma once

// Run configuration shared by the CLI commands: a single JSON document that
// command-line flags may override. Serialization round-trips exactly.

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "triosc/integrator.hpp"
#include "triosc/model.hpp"
#include "triosc/polynomial.hpp"

namespace triosc {

struct ConfigInvalid : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TermSpec {
    int i = 0;
    int j = 0;
    int k = 0;
    double coeff = 0.0;

    friend bool operator==(const TermSpec&, const TermSpec&) = default;
};

struct RunConfig {
    double a = std::numeric_limits<double>::quiet_NaN();
    double b = std::numeric_limits<double>::quiet_NaN();  // optional, Part 2 only
    double eps = std::numeric_limits<double>::quiet_NaN();
    std::vector<TermSpec> poly_terms;

    int samples = 500;  // per arc / per orbit loop
    double r_max = 10.0;
    IntegrationConfig integ;
    std::string out_dir = ".";
    std::vector<double> eps_list;
    std::optional<std::array<double, 3>> x0;
    double t_end = 10.0;
    bool emit_dat = false;

    bool has_a() const { return !std::isnan(a); }
    bool has_b() const { return !std::isnan(b); }
    bool has_eps() const { return !std::isnan(eps); }

    MultiPoly polynomial() const {
        MultiPoly F;
        for (const auto& t : poly_terms)
            F.add_term(t.i, t.j, t.k, t.coeff);
        return F;
    }

    Params params() const {
        Params p;
        p.a = a;
        p.b = has_b() ? b : 0.0;
        p.eps = has_eps() ? eps : 0.0;
        return p;
    }

    void require_part1(const char* cmd) const {
        if (!has_a() || a == 0.0)
            throw ConfigInvalid(std::string(cmd) + ": requires a nonzero 'a'");
        if (!has_eps())
            throw ConfigInvalid(std::string(cmd) + ": requires 'eps'");
        for (const auto& t : poly_terms)
            if (t.i != 0 || t.j != 0 || t.k != 0)
                throw ConfigInvalid(std::string(cmd) +
                                    ": only the constant polynomial term is allowed here");
    }

    void require_part2(const char* cmd) const {
        if (!has_a() || a == 0.0)
            throw ConfigInvalid(std::string(cmd) + ": requires a nonzero 'a'");
        if (!has_b() || b <= 0.0)
            throw ConfigInvalid(std::string(cmd) + ": requires b > 0");
    }

    friend bool operator==(const RunConfig& lhs, const RunConfig& rhs) {
        auto eq = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
        return eq(lhs.a, rhs.a) && eq(lhs.b, rhs.b) && eq(lhs.eps, rhs.eps) &&
               lhs.poly_terms == rhs.poly_terms && lhs.samples == rhs.samples &&
               lhs.r_max == rhs.r_max && lhs.integ.rel_tol == rhs.integ.rel_tol &&
               lhs.integ.abs_tol == rhs.integ.abs_tol && lhs.integ.max_step == rhs.integ.max_step &&
               lhs.integ.event_tol == rhs.integ.event_tol && lhs.out_dir == rhs.out_dir &&
               lhs.eps_list == rhs.eps_list && lhs.x0 == rhs.x0 && lhs.t_end == rhs.t_end &&
               lhs.emit_dat == rhs.emit_dat;
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    if (c.has_a())
        j["a"] = c.a;
    if (c.has_b())
        j["b"] = c.b;
    if (c.has_eps())
        j["eps"] = c.eps;
    if (!c.poly_terms.empty()) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& t : c.poly_terms)
            terms.push_back({t.i, t.j, t.k, t.coeff});
        j["poly_terms"] = terms;
    }
    j["samples"] = c.samples;
    j["r_max"] = c.r_max;
    j["rel_tol"] = c.integ.rel_tol;
    j["abs_tol"] = c.integ.abs_tol;
    if (std::isfinite(c.integ.max_step))
        j["max_step"] = c.integ.max_step;
    j["event_tol"] = c.integ.event_tol;
    j["out_dir"] = c.out_dir;
    if (!c.eps_list.empty())
        j["eps_list"] = c.eps_list;
    if (c.x0)
        j["x0"] = *c.x0;
    j["t_end"] = c.t_end;
    j["emit_dat"] = c.emit_dat;
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        if (j.contains("a"))
            c.a = j.at("a").get<double>();
        if (j.contains("b"))
            c.b = j.at("b").get<double>();
        if (j.contains("eps"))
            c.eps = j.at("eps").get<double>();
        if (j.contains("poly_terms")) {
            for (const auto& t : j.at("poly_terms")) {
                if (!t.is_array() || t.size() != 4)
                    throw ConfigInvalid("poly_terms entries must be [i, j, k, coeff]");
                TermSpec term;
                term.i = t.at(0).get<int>();
                term.j = t.at(1).get<int>();
                term.k = t.at(2).get<int>();
                term.coeff = t.at(3).get<double>();
                if (term.i < 0 || term.j < 0 || term.k < 0)
                    throw ConfigInvalid("poly_terms exponents must be nonnegative");
                c.poly_terms.push_back(term);
            }
        }
        if (j.contains("samples"))
            c.samples = j.at("samples").get<int>();
        if (j.contains("r_max"))
            c.r_max = j.at("r_max").get<double>();
        if (j.contains("rel_tol"))
            c.integ.rel_tol = j.at("rel_tol").get<double>();
        if (j.contains("abs_tol"))
            c.integ.abs_tol = j.at("abs_tol").get<double>();
        if (j.contains("max_step"))
            c.integ.max_step = j.at("max_step").get<double>();
        if (j.contains("event_tol"))
            c.integ.event_tol = j.at("event_tol").get<double>();
        if (j.contains("out_dir"))
            c.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("eps_list"))
            c.eps_list = j.at("eps_list").get<std::vector<double>>();
        if (j.contains("x0"))
            c.x0 = j.at("x0").get<std::array<double, 3>>();
        if (j.contains("t_end"))
            c.t_end = j.at("t_end").get<double>();
        if (j.contains("emit_dat"))
            c.emit_dat = j.at("emit_dat").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid(std::string("config: ") + e.what());
    }
    if (c.samples < 2)
        throw ConfigInvalid("config: samples must be >= 2");
    if (c.integ.rel_tol <= 0 || c.integ.abs_tol <= 0 || c.integ.event_tol <= 0 ||
        c.integ.max_step <= 0)
        throw ConfigInvalid("config: tolerances must be positive");
    return c;
}

}  // namespace triosc
