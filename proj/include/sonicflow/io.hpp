#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "config.hpp"
#include "error.hpp"
#include "model.hpp"
#include "solution.hpp"

namespace sonicflow {

// Shortest decimal that parses back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_number(const std::string& s) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw Error(ErrorCode::InvalidConfig, "bad number '" + s + "'");
    return v;
}

// ---------- CSV ----------

inline void write_solution_csv(std::ostream& os, const Solution& s) {
    os << "x,rho,e,regime\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        os << format_number(s.x[i]) << ',' << format_number(s.rho[i]) << ',' << format_number(s.e[i]) << ','
           << to_string(s.regime_at(i)) << '\n';
}

struct CsvTable {
    std::vector<double> x, rho, e;
};

inline CsvTable read_solution_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    if (!std::getline(is, line) || line != "x,rho,e,regime")
        throw Error(ErrorCode::InvalidConfig, "solution CSV needs the header x,rho,e,regime");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, c, ',');
        t.x.push_back(parse_number(a));
        t.rho.push_back(parse_number(b));
        t.e.push_back(parse_number(c));
    }
    return t;
}

// ---------- JSON ----------

inline json error_json(const Error& e) {
    return {{"code", to_string(e.code())}, {"message", e.what()}, {"theoremRef", e.theorem_ref()}};
}

inline json fit_json(const ExponentFit& f) {
    return {{"at", f.at},
            {"side", f.side},
            {"exponent", f.exponent},
            {"confidenceHalfWidth", f.confidenceHalfWidth},
            {"window", {f.windowInner, f.windowOuter}},
            {"points", f.points},
            {"regressionResidual", f.regressionResidual}};
}

inline json residual_json(const ResidualReport& r) {
    json j{{"max", r.maxResidual}, {"location", r.location}, {"points", r.pointsChecked}, {"field", r.fieldResidual}};
    j["weak"] = r.weakResidual ? json(*r.weakResidual) : json(nullptr);
    return j;
}

// Square-root endpoint fits for a solution; sides that do not apply are skipped.
inline json holder_fits_json(const Solution& s, double inner, double outer) {
    json out = json::object();
    if (s.kind == SolutionKind::Sonic) return out;
    for (int ep : {0, 1}) {
        try {
            out["endpoint" + std::to_string(ep)] = fit_json(fit_holder_exponent(s, ep, inner, outer));
        } catch (const Error& e) {
            out["endpoint" + std::to_string(ep)] = error_json(e);
        }
    }
    return out;
}

inline json solution_json(const Solution& s, const RunConfig& cfg, const ResidualReport& res) {
    json j;
    j["kind"] = to_string(s.kind);
    j["gridSize"] = s.size();
    if (s.shock) {
        j["shock"] = {{"x0", s.shock->x0},
                      {"rhoL", s.shock->rhoL},
                      {"rhoR", s.shock->rhoR},
                      {"eJump", s.shock->eJump},
                      {"index", *s.shockIndex}};
    } else {
        j["shock"] = nullptr;
    }
    j["transition"] = s.transition ? json{{"x0", s.transition->x0}, {"slope", s.transition->slope}} : json(nullptr);
    j["diagnostics"] = s.diagnostics;
    j["residual"] = residual_json(res);
    j["holder"] = holder_fits_json(s, cfg.holderInner, cfg.holderOuter);
    j["config"] = config_to_json(cfg);
    return j;
}

inline Solution read_solution(std::istream& csv, const json& meta) {
    Solution s;
    auto t = read_solution_csv(csv);
    s.x = std::move(t.x);
    s.rho = std::move(t.rho);
    s.e = std::move(t.e);
    s.kind = detail::kind_from_string(meta.at("kind").get<std::string>());
    if (!meta.at("shock").is_null()) {
        const json& k = meta.at("shock");
        s.shock = ShockData{k.at("x0").get<double>(), k.at("rhoL").get<double>(), k.at("rhoR").get<double>(),
                            k.at("eJump").get<double>()};
        s.shockIndex = k.at("index").get<std::size_t>();
    }
    if (!meta.at("transition").is_null())
        s.transition = Transition{meta["transition"].at("x0").get<double>(), meta["transition"].at("slope").get<double>()};
    s.diagnostics = meta.at("diagnostics").get<std::map<std::string, double>>();
    if (s.size() != meta.at("gridSize").get<std::size_t>())
        throw Error(ErrorCode::InvalidConfig, "CSV row count does not match solution.json");
    return s;
}

// ---------- SVG ----------

namespace detail {

struct Frame {
    double left, top, width, height;
    double x0, x1, y0, y1;
    double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
    double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

inline std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string g4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline void pad_range(double& lo, double& hi) {
    if (!(hi > lo)) {
        double m = std::max(std::abs(lo), 1.0) * 0.05;
        lo -= m;
        hi += m;
    } else {
        double m = 0.05 * (hi - lo);
        lo -= m;
        hi += m;
    }
}

inline void axes(std::ostream& os, const Frame& f, const std::string& xl, const std::string& yl) {
    os << "<rect x=\"" << f2(f.left) << "\" y=\"" << f2(f.top) << "\" width=\"" << f2(f.width) << "\" height=\""
       << f2(f.height) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << f2(f.left) << "\" y=\"" << f2(f.top + f.height + 16) << "\">" << g4(f.x0) << "</text>\n";
    os << "<text x=\"" << f2(f.left + f.width) << "\" y=\"" << f2(f.top + f.height + 16)
       << "\" text-anchor=\"end\">" << g4(f.x1) << "</text>\n";
    os << "<text x=\"" << f2(f.left + f.width / 2) << "\" y=\"" << f2(f.top + f.height + 16)
       << "\" text-anchor=\"middle\">" << xl << "</text>\n";
    os << "<text x=\"" << f2(f.left - 6) << "\" y=\"" << f2(f.top + f.height) << "\" text-anchor=\"end\">" << g4(f.y0)
       << "</text>\n";
    os << "<text x=\"" << f2(f.left - 6) << "\" y=\"" << f2(f.top + 10) << "\" text-anchor=\"end\">" << g4(f.y1)
       << "</text>\n";
    os << "<text x=\"" << f2(f.left - 6) << "\" y=\"" << f2(f.top + f.height / 2) << "\" text-anchor=\"end\">" << yl
       << "</text>\n";
}

inline void polyline(std::ostream& os, const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                     const char* color, std::size_t from = 0, std::size_t to = std::string::npos) {
    to = std::min(to, xs.size());
    if (to <= from) return;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = from; i < to; ++i) {
        if (i > from) os << ' ';
        os << f2(f.px(xs[i])) << ',' << f2(f.py(ys[i]));
    }
    os << "\"/>\n";
}

inline void vline(std::ostream& os, const Frame& f, double x, const char* color, bool dashed) {
    os << "<line x1=\"" << f2(f.px(x)) << "\" y1=\"" << f2(f.top) << "\" x2=\"" << f2(f.px(x)) << "\" y2=\""
       << f2(f.top + f.height) << "\" stroke=\"" << color << "\"" << (dashed ? " stroke-dasharray=\"6,4\"" : "")
       << "/>\n";
}

inline const char* svg_open() {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\" "
           "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
}

} // namespace detail

// Density (top) and field (bottom) against x; a shock is a vertical segment.
inline std::string profile_svg(const Solution& s) {
    using namespace detail;
    std::ostringstream os;
    os << svg_open();
    os << "<text x=\"400\" y=\"20\" text-anchor=\"middle\">" << to_string(s.kind) << " profile</text>\n";
    auto panel = [&](const std::vector<double>& ys, double top, const char* name, const char* color) {
        double lo = *std::min_element(ys.begin(), ys.end()), hi = *std::max_element(ys.begin(), ys.end());
        pad_range(lo, hi);
        Frame f{80, top, 680, 220, 0.0, 1.0, lo, hi};
        axes(os, f, "x", name);
        std::size_t cut = s.shockIndex ? *s.shockIndex + 1 : s.size();
        polyline(os, f, s.x, ys, color, 0, cut);
        if (s.shockIndex) {
            std::size_t i = *s.shockIndex;
            os << "<line x1=\"" << f2(f.px(s.x[i])) << "\" y1=\"" << f2(f.py(ys[i])) << "\" x2=\"" << f2(f.px(s.x[i]))
               << "\" y2=\"" << f2(f.py(ys[i + 1])) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
            polyline(os, f, s.x, ys, color, cut, s.size());
        }
        if (s.transition) vline(os, f, s.transition->x0, "#888", true);
        return f;
    };
    Frame fr = panel(s.rho, 40, "rho", "#1f5fbf");
    if (fr.y0 < 1.0 && fr.y1 > 1.0)
        os << "<line x1=\"" << f2(fr.left) << "\" y1=\"" << f2(fr.py(1.0)) << "\" x2=\"" << f2(fr.left + fr.width)
           << "\" y2=\"" << f2(fr.py(1.0)) << "\" stroke=\"#aaa\" stroke-dasharray=\"4,4\"/>\n";
    panel(s.e, 320, "E", "#bf3f1f");
    os << "</svg>\n";
    return os.str();
}

struct Portrait {
    PortraitMode mode = PortraitMode::RhoE;
    double tau = 1.0;
    double b = 1.0;
    CriticalPointInfo critical;
    std::vector<std::vector<State>> trajectories;
};

inline void write_portrait_csv(std::ostream& os, const Portrait& p) {
    os << "trajectory,x,rho,e\n";
    for (std::size_t k = 0; k < p.trajectories.size(); ++k)
        for (const auto& s : p.trajectories[k])
            os << k << ',' << format_number(s.x) << ',' << format_number(s.rho) << ',' << format_number(s.e) << '\n';
}

inline std::string portrait_svg(const Portrait& p) {
    using namespace detail;
    const bool nf = p.mode == PortraitMode::NF;
    const double itau = 1.0 / p.tau;
    auto cx = [&](const State& s) { return nf ? s.rho - 1.0 : s.rho; };
    auto cy = [&](const State& s) { return nf ? s.e - itau / s.rho : s.e; };
    State crit{0.0, p.critical.rho, p.critical.e};
    double x0 = cx(crit), x1 = cx(crit), y0 = cy(crit), y1 = cy(crit);
    // the end points of each trajectory sit just outside the viewing box
    for (const auto& t : p.trajectories)
        for (std::size_t i = t.size() > 2 ? 1 : 0; i < (t.size() > 2 ? t.size() - 1 : t.size()); ++i) {
            const State& s = t[i];
            x0 = std::min(x0, cx(s));
            x1 = std::max(x1, cx(s));
            y0 = std::min(y0, cy(s));
            y1 = std::max(y1, cy(s));
        }
    pad_range(x0, x1);
    pad_range(y0, y1);
    Frame f{80, 40, 680, 500, x0, x1, y0, y1};
    std::ostringstream os;
    os << svg_open();
    os << "<text x=\"400\" y=\"24\" text-anchor=\"middle\">tau = " << g4(p.tau) << ", b = " << g4(p.b) << ", "
       << (nf ? "(n, F)" : "(rho, E)") << " plane</text>\n";
    axes(os, f, nf ? "n" : "rho", nf ? "F" : "E");
    double sonic = nf ? 0.0 : 1.0;
    if (sonic > x0 && sonic < x1) vline(os, f, sonic, "#aaa", true);
    os << "<clipPath id=\"frame\"><rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.width
       << "\" height=\"" << f.height << "\"/></clipPath>\n<g clip-path=\"url(#frame)\">\n";
    for (const auto& t : p.trajectories) {
        std::vector<double> xs, ys;
        for (const auto& s : t) {
            xs.push_back(cx(s));
            ys.push_back(cy(s));
        }
        polyline(os, f, xs, ys, "#1f5fbf");
    }
    os << "</g>\n";
    if (nf) {
        std::vector<double> xs, ys;
        ModelParams mp(p.tau, DopingProfile(p.b));
        for (int k = 0; k <= 400; ++k) {
            double n = x0 + (x1 - x0) * k / 400.0;
            if (n <= -1.0) continue;
            double xi = xi_curve(n, mp);
            if (xi < y0 || xi > y1) continue;
            xs.push_back(n);
            ys.push_back(xi);
        }
        polyline(os, f, xs, ys, "red");
    }
    os << "<circle cx=\"" << f2(f.px(cx(crit))) << "\" cy=\"" << f2(f.py(cy(crit)))
       << "\" r=\"5\" fill=\"black\"/>\n<text x=\"" << f2(f.px(cx(crit)) + 8) << "\" y=\"" << f2(f.py(cy(crit)) - 8)
       << "\">A (" << to_string(p.critical.kind) << ")</text>\n";
    os << "</svg>\n";
    return os.str();
}

// ---------- files ----------

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidConfig, "cannot write " + path);
    f << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidConfig, "cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace sonicflow
