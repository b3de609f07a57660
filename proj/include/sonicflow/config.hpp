#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "doping.hpp"
#include "error.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "regime.hpp"
#include "solvers.hpp"

namespace sonicflow {

using nlohmann::json;

enum class Command { Solve, Classify, Portrait, Sweep, Verify };

inline const char* to_string(Command c) {
    switch (c) {
    case Command::Solve: return "solve";
    case Command::Classify: return "classify";
    case Command::Portrait: return "portrait";
    case Command::Sweep: return "sweep";
    case Command::Verify: return "verify";
    }
    return "solve";
}

enum class PortraitMode { RhoE, NF };

struct PortraitOptions {
    PortraitMode mode = PortraitMode::RhoE;
    int trajectories = 16;    // seeds on a ring around the critical point
    double ringRadius = 0.25; // relative to the critical density
    double span = 2.0;        // x-range integrated on each side of a seed
    bool separatrices = true; // extra seeds along saddle eigenvectors
};

struct SweepOptions {
    std::string variable = "rhoL"; // rhoL | x0 | tau | bConstant
    std::vector<double> values;
    int threads = 0; // 0: hardware concurrency
    bool writeSamples = true;
};

struct RunConfig {
    Command command = Command::Solve;
    ModelParams model{1.0, DopingProfile(1.5)};
    SolutionKind kind = SolutionKind::Subsonic;
    std::string method = "elliptic"; // subsonic: elliptic | shooting
    double rhoL = 0.9;
    double x0 = 0.5;
    int branch = 0; // supersonic solution index when several are found
    SolverOptions solver;
    double holderInner = 1e-4;
    double holderOuter = 1e-2;
    std::string outDir = ".";
    bool writeCsv = true;
    bool writeJson = true;
    bool writeSvg = true;
    std::string verifyInput; // directory holding solution.csv/json to re-check
    PortraitOptions portrait;
    SweepOptions sweep;
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw Error(ErrorCode::InvalidConfig, "unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, where + "." + key + ": " + e.what());
    }
}

inline SolutionKind kind_from_string(const std::string& s) {
    for (auto k : {SolutionKind::Sonic, SolutionKind::Subsonic, SolutionKind::Supersonic, SolutionKind::TransonicShock,
                   SolutionKind::C1Transonic})
        if (s == to_string(k)) return k;
    throw Error(ErrorCode::InvalidConfig, "unknown solution kind '" + s + "'");
}

inline Command command_from_string(const std::string& s) {
    for (auto c : {Command::Solve, Command::Classify, Command::Portrait, Command::Sweep, Command::Verify})
        if (s == to_string(c)) return c;
    throw Error(ErrorCode::InvalidConfig, "unknown command '" + s + "'");
}

} // namespace detail

inline DopingProfile doping_from_json(const json& j) {
    if (j.is_number()) return DopingProfile::constant(j.get<double>());
    if (!j.is_object() || !j.contains("type")) throw Error(ErrorCode::InvalidConfig, "doping needs a 'type'");
    std::string type = j.at("type").get<std::string>();
    try {
        if (type == "constant") {
            detail::check_keys(j, {"type", "value"}, "doping");
            return DopingProfile::constant(j.at("value").get<double>());
        }
        if (type == "sine") {
            detail::check_keys(j, {"type", "b0", "amplitude", "frequency"}, "doping");
            return DopingProfile::sine(j.at("b0").get<double>(), j.at("amplitude").get<double>(),
                                       j.value("frequency", 1.0));
        }
        if (type == "piecewise") {
            detail::check_keys(j, {"type", "breakpoints", "values"}, "doping");
            return DopingProfile::piecewise(j.at("breakpoints").get<std::vector<double>>(),
                                            j.at("values").get<std::vector<double>>());
        }
        if (type == "tabulated") {
            detail::check_keys(j, {"type", "knots", "values"}, "doping");
            return DopingProfile::tabulated(j.at("knots").get<std::vector<double>>(),
                                            j.at("values").get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("doping: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("doping: ") + e.what());
    }
    throw Error(ErrorCode::InvalidConfig, "unknown doping type '" + type + "'");
}

inline json doping_to_json(const DopingProfile& d) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ConstantDoping>)
                return {{"type", "constant"}, {"value", v.b}};
            else if constexpr (std::is_same_v<T, SineDoping>)
                return {{"type", "sine"}, {"b0", v.b0}, {"amplitude", v.amplitude}, {"frequency", v.frequency}};
            else if constexpr (std::is_same_v<T, PiecewiseDoping>)
                return {{"type", "piecewise"}, {"breakpoints", v.breakpoints}, {"values", v.values}};
            else
                return {{"type", "tabulated"}, {"knots", v.knots}, {"values", v.values}};
        },
        d.variant());
}

inline RunConfig config_from_json(const json& j) {
    using detail::read;
    RunConfig c;
    detail::check_keys(j, {"command", "model", "solve", "solver", "integrator", "grid", "analysis", "output", "portrait",
                           "sweep", "verify"},
                       "config");
    if (j.contains("command")) c.command = detail::command_from_string(j.at("command").get<std::string>());

    if (!j.contains("model")) throw Error(ErrorCode::InvalidConfig, "config needs a 'model' section");
    const json& m = j.at("model");
    detail::check_keys(m, {"tau", "gamma", "doping"}, "model");
    if (!m.contains("tau") || !m.contains("doping"))
        throw Error(ErrorCode::InvalidConfig, "model needs 'tau' and 'doping'");
    double tau = 0.0, gamma = 1.0;
    read(m, "tau", tau, "model");
    read(m, "gamma", gamma, "model");
    try {
        c.model = ModelParams(tau, doping_from_json(m.at("doping")), gamma);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidConfig) throw;
        throw Error(ErrorCode::InvalidConfig, std::string("model: ") + e.what());
    }

    if (j.contains("solve")) {
        const json& s = j.at("solve");
        detail::check_keys(s, {"kind", "method", "rhoL", "x0", "branch"}, "solve");
        if (s.contains("kind")) c.kind = detail::kind_from_string(s.at("kind").get<std::string>());
        read(s, "method", c.method, "solve");
        read(s, "rhoL", c.rhoL, "solve");
        read(s, "x0", c.x0, "solve");
        read(s, "branch", c.branch, "solve");
        if (c.method != "elliptic" && c.method != "shooting")
            throw Error(ErrorCode::InvalidConfig, "solve.method must be 'elliptic' or 'shooting'");
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        detail::check_keys(s, {"jSchedule", "deltaSchedule", "boundaryTol", "crossCheckTol", "glueTol", "slopeTol",
                               "newtonMaxIter", "supersonicSamples", "lengthBudget", "assemblyTolFactor"},
                           "solver");
        auto& o = c.solver;
        read(s, "jSchedule", o.jSchedule, "solver");
        read(s, "deltaSchedule", o.deltaSchedule, "solver");
        read(s, "boundaryTol", o.boundaryTol, "solver");
        read(s, "crossCheckTol", o.crossCheckTol, "solver");
        read(s, "glueTol", o.glueTol, "solver");
        read(s, "slopeTol", o.slopeTol, "solver");
        read(s, "newtonMaxIter", o.newtonMaxIter, "solver");
        read(s, "supersonicSamples", o.supersonicSamples, "solver");
        read(s, "lengthBudget", o.lengthBudget, "solver");
        read(s, "assemblyTolFactor", o.assemblyTolFactor, "solver");
    }
    if (j.contains("integrator")) {
        const json& s = j.at("integrator");
        detail::check_keys(s, {"relTol", "absTol", "maxStep", "sonicSwitchBand", "blowUpDensity", "blowUpField",
                               "maxArcLength", "foldRatio", "nodeStop", "minDensity"},
                           "integrator");
        auto& o = c.solver.integrator;
        read(s, "relTol", o.relTol, "integrator");
        read(s, "absTol", o.absTol, "integrator");
        read(s, "maxStep", o.maxStep, "integrator");
        read(s, "sonicSwitchBand", o.sonicSwitchBand, "integrator");
        read(s, "blowUpDensity", o.blowUpDensity, "integrator");
        read(s, "blowUpField", o.blowUpField, "integrator");
        read(s, "maxArcLength", o.maxArcLength, "integrator");
        read(s, "foldRatio", o.foldRatio, "integrator");
        read(s, "nodeStop", o.nodeStop, "integrator");
        read(s, "minDensity", o.minDensity, "integrator");
    }
    if (j.contains("grid")) {
        const json& s = j.at("grid");
        detail::check_keys(s, {"coreCells", "ratio", "minSpacing"}, "grid");
        read(s, "coreCells", c.solver.grid.coreCells, "grid");
        read(s, "ratio", c.solver.grid.ratio, "grid");
        read(s, "minSpacing", c.solver.grid.minSpacing, "grid");
    }
    if (j.contains("analysis")) {
        const json& s = j.at("analysis");
        detail::check_keys(s, {"holderWindow"}, "analysis");
        if (s.contains("holderWindow")) {
            auto w = s.at("holderWindow").get<std::vector<double>>();
            if (w.size() != 2) throw Error(ErrorCode::InvalidConfig, "analysis.holderWindow needs two values");
            c.holderInner = w[0];
            c.holderOuter = w[1];
        }
    }
    if (j.contains("output")) {
        const json& s = j.at("output");
        detail::check_keys(s, {"dir", "formats"}, "output");
        read(s, "dir", c.outDir, "output");
        if (s.contains("formats")) {
            c.writeCsv = c.writeJson = c.writeSvg = false;
            for (const auto& f : s.at("formats")) {
                std::string v = f.get<std::string>();
                if (v == "csv")
                    c.writeCsv = true;
                else if (v == "json")
                    c.writeJson = true;
                else if (v == "svg")
                    c.writeSvg = true;
                else
                    throw Error(ErrorCode::InvalidConfig, "unknown output format '" + v + "'");
            }
        }
    }
    if (j.contains("portrait")) {
        const json& s = j.at("portrait");
        detail::check_keys(s, {"mode", "trajectories", "ringRadius", "span", "separatrices"}, "portrait");
        std::string mode = "rho-e";
        read(s, "mode", mode, "portrait");
        if (mode == "rho-e")
            c.portrait.mode = PortraitMode::RhoE;
        else if (mode == "n-f")
            c.portrait.mode = PortraitMode::NF;
        else
            throw Error(ErrorCode::InvalidConfig, "portrait.mode must be 'rho-e' or 'n-f'");
        read(s, "trajectories", c.portrait.trajectories, "portrait");
        read(s, "ringRadius", c.portrait.ringRadius, "portrait");
        read(s, "span", c.portrait.span, "portrait");
        read(s, "separatrices", c.portrait.separatrices, "portrait");
    }
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        detail::check_keys(s, {"variable", "values", "range", "count", "threads", "writeSamples"}, "sweep");
        read(s, "variable", c.sweep.variable, "sweep");
        read(s, "values", c.sweep.values, "sweep");
        read(s, "threads", c.sweep.threads, "sweep");
        read(s, "writeSamples", c.sweep.writeSamples, "sweep");
        if (s.contains("range")) {
            auto r = s.at("range").get<std::vector<double>>();
            int n = s.value("count", 0);
            if (r.size() != 2 || n < 1) throw Error(ErrorCode::InvalidConfig, "sweep.range needs [lo, hi] and count >= 1");
            c.sweep.values.clear();
            for (int k = 0; k < n; ++k) c.sweep.values.push_back(n == 1 ? r[0] : r[0] + (r[1] - r[0]) * k / (n - 1));
        }
        static const std::set<std::string> vars{"rhoL", "x0", "tau", "bConstant"};
        if (!vars.count(c.sweep.variable))
            throw Error(ErrorCode::InvalidConfig, "sweep.variable must be one of rhoL, x0, tau, bConstant");
    }
    if (j.contains("verify")) {
        const json& s = j.at("verify");
        detail::check_keys(s, {"input"}, "verify");
        read(s, "input", c.verifyInput, "verify");
    }
    try {
        c.solver.integrator.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("integrator: ") + e.what());
    }
    return c;
}

// Full configuration with every default filled in.
inline json config_to_json(const RunConfig& c) {
    const auto& o = c.solver;
    const auto& ic = o.integrator;
    json formats = json::array();
    if (c.writeCsv) formats.push_back("csv");
    if (c.writeJson) formats.push_back("json");
    if (c.writeSvg) formats.push_back("svg");
    json j;
    j["command"] = to_string(c.command);
    j["model"] = {{"tau", c.model.tau}, {"gamma", c.model.gamma}, {"doping", doping_to_json(c.model.doping)}};
    j["solve"] = {{"kind", to_string(c.kind)}, {"method", c.method}, {"rhoL", c.rhoL}, {"x0", c.x0}, {"branch", c.branch}};
    j["solver"] = {{"jSchedule", o.jSchedule},
                   {"deltaSchedule", o.deltaSchedule},
                   {"boundaryTol", o.boundaryTol},
                   {"crossCheckTol", o.crossCheckTol},
                   {"glueTol", o.glueTol},
                   {"slopeTol", o.slopeTol},
                   {"newtonMaxIter", o.newtonMaxIter},
                   {"supersonicSamples", o.supersonicSamples},
                   {"lengthBudget", o.lengthBudget},
                   {"assemblyTolFactor", o.assemblyTolFactor}};
    j["integrator"] = {{"relTol", ic.relTol},           {"absTol", ic.absTol},
                       {"maxStep", ic.maxStep},         {"sonicSwitchBand", ic.sonicSwitchBand},
                       {"blowUpDensity", ic.blowUpDensity}, {"blowUpField", ic.blowUpField},
                       {"maxArcLength", ic.maxArcLength}, {"foldRatio", ic.foldRatio},
                       {"nodeStop", ic.nodeStop},       {"minDensity", ic.minDensity}};
    j["grid"] = {{"coreCells", o.grid.coreCells}, {"ratio", o.grid.ratio}, {"minSpacing", o.grid.minSpacing}};
    j["analysis"] = {{"holderWindow", {c.holderInner, c.holderOuter}}};
    j["output"] = {{"dir", c.outDir}, {"formats", formats}};
    j["portrait"] = {{"mode", c.portrait.mode == PortraitMode::RhoE ? "rho-e" : "n-f"},
                     {"trajectories", c.portrait.trajectories},
                     {"ringRadius", c.portrait.ringRadius},
                     {"span", c.portrait.span},
                     {"separatrices", c.portrait.separatrices}};
    j["sweep"] = {{"variable", c.sweep.variable},
                  {"values", c.sweep.values},
                  {"threads", c.sweep.threads},
                  {"writeSamples", c.sweep.writeSamples}};
    j["verify"] = {{"input", c.verifyInput}};
    return j;
}

} // namespace sonicflow
