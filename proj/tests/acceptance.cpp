// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include <sonicflow/driver.hpp>

using namespace sonicflow;
namespace fs = std::filesystem;

namespace {

// Collects the failures of one criterion; the first few are reported.
struct Checks {
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    bool ok() const { return failures.empty(); }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Artifacts of one pass go to a fixed directory so repeated passes see identical config echoes.
class Artifacts {
public:
    explicit Artifacts(fs::path root) : root_(std::move(root)) {}

    void reset() {
        fs::remove_all(root_);
        fs::create_directories(root_);
    }

    void solution(const std::string& name, const Solution& s, const RunConfig& c) {
        RunConfig cfg = c;
        cfg.writeSvg = false;
        cfg.outDir = (root_ / name).string();
        write_solution_artifacts(cfg.outDir, s, cfg);
    }

    void report(const std::string& name, const json& j) { write_text((root_ / (name + ".json")).string(), j.dump(2) + "\n"); }

    std::map<std::string, std::string> snapshot() const {
        std::map<std::string, std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(root_))
            if (e.is_regular_file()) files[fs::relative(e.path(), root_).string()] = read_text(e.path().string());
        return files;
    }

private:
    fs::path root_;
};

RunConfig config_for(const ModelParams& p, SolutionKind k) {
    RunConfig c;
    c.model = p;
    c.kind = k;
    return c;
}

template <class F>
std::optional<Error> error_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e;
    }
    return std::nullopt;
}

double sup_diff(const Solution& a, const Solution& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.rho[i] - detail::interp_linear(b.x, b.rho, a.x[i])));
    return m;
}

void sonic_exactness(Checks& ck, Artifacts& art) {
    for (double tau : {0.5, 2.0, 15.0}) {
        ModelParams p(tau, 1.0);
        Solution s = solve_sonic(p);
        bool exact = true;
        for (std::size_t i = 0; i < s.size(); ++i) exact = exact && s.rho[i] == 1.0 && s.e[i] == 1.0 / tau;
        ck.expect(exact, "tau=" + num(tau) + ": state is not rho=1, E=1/tau");
        auto r = residual_norm(s, p);
        ck.expect(r.pointsChecked > 0 && r.maxResidual < 1e-12, "tau=" + num(tau) + ": residual " + num(r.maxResidual));
        art.solution("sonic_tau" + num(tau), s, config_for(p, SolutionKind::Sonic));
    }
}

void critical_points(Checks& ck, Artifacts& art) {
    struct Case {
        double tau, b, e;
        CriticalKind kind;
    };
    json out = json::array();
    for (const Case& c : {Case{15.0, 1.5, 2.0 / 45.0, CriticalKind::Saddle}, Case{0.5, 1.5, 4.0 / 3.0, CriticalKind::Saddle},
                          Case{15.0, 0.5, 2.0 / 15.0, CriticalKind::StableFocus}}) {
        auto a = critical_point_analysis(ModelParams(c.tau, c.b));
        std::string tag = "(tau=" + num(c.tau) + ", b=" + num(c.b) + ")";
        ck.expect(a.rho == c.b, tag + ": rho " + num(a.rho));
        ck.expect(std::abs(a.e - c.e) <= 1e-15, tag + ": E " + num(a.e));
        ck.expect(a.kind == c.kind, tag + ": classified " + to_string(a.kind));
        // the eigenvalues themselves carry the classification
        bool saddle = a.lambda1.imag() == 0.0 && a.lambda1.real() * a.lambda2.real() < 0.0;
        bool focus = a.lambda1.imag() != 0.0 && a.lambda1.real() < 0.0;
        ck.expect(c.kind == CriticalKind::Saddle ? saddle : focus, tag + ": eigenvalue signs disagree");
        out.push_back({{"tau", c.tau},
                       {"b", c.b},
                       {"rho", a.rho},
                       {"e", a.e},
                       {"kind", to_string(a.kind)},
                       {"lambda1", {a.lambda1.real(), a.lambda1.imag()}},
                       {"lambda2", {a.lambda2.real(), a.lambda2.imag()}}});
    }
    art.report("critical_points", out);
}

void subsonic_uniqueness(Checks& ck, Artifacts& art) {
    for (double b : {1.2, 1.5, 2.0})
        for (double tau : {1.0, 15.0}) {
            ModelParams p(tau, b);
            std::string tag = "(b=" + num(b) + ", tau=" + num(tau) + ")";
            Solution ell = solve_subsonic_elliptic(p, default_j_schedule());
            Solution sh = solve_subsonic_shooting(p);
            double d = std::max(sup_diff(ell, sh), sup_diff(sh, ell));
            ck.expect(d <= 1e-4, tag + ": methods differ by " + num(d));
            for (const Solution* s : {&ell, &sh}) {
                auto [lo, hi] = std::minmax_element(s->rho.begin(), s->rho.end());
                ck.expect(*lo >= 1.0 && *hi <= b + 1e-8, tag + ": rho outside [1, b]: [" + num(*lo) + ", " + num(*hi) + "]");
                double m = subsonic_margin(*s);
                ck.expect(m > 0.0, tag + ": interior margin " + num(m));
            }
            RunConfig c = config_for(p, SolutionKind::Subsonic);
            c.method = "elliptic";
            art.solution("subsonic_elliptic_b" + num(b) + "_tau" + num(tau), ell, c);
            c.method = "shooting";
            art.solution("subsonic_shooting_b" + num(b) + "_tau" + num(tau), sh, c);
        }
}

void optimal_regularity(Checks& ck, Artifacts& art) {
    ModelParams p(15.0, 1.5);
    Solution sub = solve_subsonic_shooting(p);
    Solution sup = solve_supersonic(p);
    auto a = fit_holder_exponent(sub, 1);
    auto b = fit_holder_exponent(sup, 0);
    ck.expect(std::abs(a.exponent - 0.5) <= 0.05, "subsonic exponent at x=1: " + num(a.exponent));
    ck.expect(std::abs(b.exponent - 0.5) <= 0.05, "supersonic exponent at x=0: " + num(b.exponent));
    art.report("holder", {{"subsonicRight", fit_json(a)}, {"supersonicLeft", fit_json(b)}});
}

void supersonic_structure(Checks& ck, Artifacts& art) {
    ModelParams p(15.0, 1.5);
    Solution s = solve_supersonic(p);
    auto sh = shape_report(s, p);
    ck.expect(sh.localMinima == 1 && sh.localMaxima == 0,
              "extrema: " + std::to_string(sh.localMinima) + " minima, " + std::to_string(sh.localMaxima) + " maxima");
    ck.expect(sh.criticalCrossings == 1, "rho E - 1/tau changes sign " + std::to_string(sh.criticalCrossings) + " times");
    auto m = undamped_min_density_bounds(1.0, 1.5);
    ck.expect(sh.minRho >= m.beta && sh.minRho <= m.gamma,
              "rho_min " + num(sh.minRho) + " outside [" + num(m.beta) + ", " + num(m.gamma) + "]");
    art.solution("supersonic", s, config_for(p, SolutionKind::Supersonic));
    art.report("supersonic_shape",
               {{"minima", sh.localMinima}, {"maxima", sh.localMaxima}, {"rhoMin", sh.minRho}, {"beta", m.beta}, {"gamma", m.gamma}});
}

void shock_family(Checks& ck, Artifacts& art) {
    ModelParams p(50.0, 1.5);
    std::vector<double> x0s;
    for (double rhoL : {0.90, 0.95}) {
        std::string tag = "rhoL=" + num(rhoL);
        RunConfig c = config_for(p, SolutionKind::TransonicShock);
        c.rhoL = rhoL;
        Solution s = solve_transonic_shock(p, rhoL, c.solver.deltaSchedule);
        if (!s.shock) {
            ck.expect(false, tag + ": no shock recorded");
            continue;
        }
        auto r = shock_report(s);
        ck.expect(r.productError <= 1e-10, tag + ": |rhoL rhoR - 1| = " + num(r.productError));
        ck.expect(r.momentumError <= 1e-10, tag + ": momentum flux jump " + num(r.momentumError));
        ck.expect(r.fieldJump <= 1e-10, tag + ": E jump " + num(r.fieldJump));
        ck.expect(r.entropy, tag + ": entropy condition fails");
        double be = s.diagnostics.at("boundaryError");
        ck.expect(be < 1e-6, tag + ": boundary residual " + num(be));
        x0s.push_back(s.shock->x0);
        art.solution("shock_rhoL" + num(rhoL), s, c);
    }
    ck.expect(x0s.size() == 2 && std::abs(x0s[0] - x0s[1]) > 1e-6, "shock positions are not distinct");
}

void c1_slopes(Checks& ck, Artifacts& art) {
    ModelParams p(0.1, 1.5);
    const double k = c1_transition_slope(1.5, 0.1);
    ck.expect(std::abs(k - 0.0505102) <= 1e-7, "closed-form slope " + num(k));
    for (double x0 : {0.25, 0.5, 0.75}) {
        std::string tag = "x0=" + num(x0);
        Solution s = solve_c1_transonic(p, x0);
        for (const char* side : {"slopeLeft", "slopeRight"}) {
            double v = s.diagnostics.at(side);
            ck.expect(std::abs(v / k - 1.0) <= 1e-3, tag + ": " + side + " " + num(v));
        }
        for (const char* side : {"eLeftAtX0", "eRightAtX0"}) {
            double v = s.diagnostics.at(side);
            ck.expect(std::abs(v - 10.0) <= 1e-6, tag + ": " + side + " " + num(v));
        }
        RunConfig c = config_for(p, SolutionKind::C1Transonic);
        c.x0 = x0;
        art.solution("c1_x0" + num(x0), s, c);
    }
}

void nonexistence(Checks& ck, Artifacts& art) {
    json out;
    auto record = [&](const char* name, const std::optional<Error>& e) {
        out[name] = e ? error_json(*e) : json(nullptr);
    };

    // (i) subsonic with b = 0.9, both methods
    auto e1 = error_of([] { solve_subsonic_shooting(ModelParams(1.0, 0.9)); });
    auto e1b = error_of([] { solve_subsonic_elliptic(ModelParams(1.0, 0.9), default_j_schedule()); });
    ck.expect(e1 && e1->theorem_ref() == "Theorem 3.1", "(i) shooting does not reject citing Theorem 3.1");
    ck.expect(e1b && e1b->theorem_ref() == "Theorem 3.1", "(i) elliptic does not reject citing Theorem 3.1");
    record("subsonicB09", e1);

    // (ii) supersonic with b = 0.4, tau = 15
    const double bb = 0.4, w = bb * (1.0 + std::sqrt(2.0 * bb));
    ck.expect(std::abs(w - 0.7578) < 5e-5 && w < 1.0, "(ii) b(1 + sqrt(2b)) = " + num(w));
    auto e2 = error_of([] { solve_supersonic(ModelParams(15.0, 0.4)); });
    ck.expect(e2 && e2->code() == ErrorCode::NoSolutionInRegime, "(ii) supersonic solver accepts b = 0.4");
    ck.expect(e2 && std::string(e2->what()).find("0.757771") != std::string::npos, "(ii) rejection does not cite the bound");
    record("supersonicB04", e2);
    auto sweep = supersonic_residual_sweep(ModelParams(15.0, 0.4), 200, 0.01, 0.99);
    int changes = count_sign_changes(sweep);
    ck.expect(sweep.size() == 200 && changes == 0, "(ii) rho_min sweep has " + std::to_string(changes) + " sign changes");
    json rows = json::array();
    for (const auto& r : sweep) rows.push_back({r.rhoMin, std::isfinite(r.residual) ? json(r.residual) : json("inf")});
    out["sweepB04"] = rows;

    // (iii) supersonic with b = 0.9, tau = 0.2
    auto e3 = error_of([] { solve_supersonic(ModelParams(0.2, 0.9)); });
    ck.expect(e3 && e3->code() == ErrorCode::NoSolutionInRegime, "(iii) supersonic solver accepts tau = 0.2");
    ck.expect(e3 && std::string(e3->what()).find("1/3") != std::string::npos, "(iii) rejection does not cite tau < 1/3");
    record("supersonicTau02", e3);

    // (iv) b = 1.5, tau = 0.1: no shock, but a smooth transition
    auto e4 = error_of([] { solve_transonic_shock(ModelParams(0.1, 1.5), 0.9, SolverOptions{}.deltaSchedule); });
    ck.expect(e4 && e4->theorem_ref() == "Theorem 2.23", "(iv) shock constructor does not reject citing Theorem 2.23");
    record("shockTau01", e4);
    auto e5 = error_of([] { solve_c1_transonic(ModelParams(0.1, 1.5), 0.5); });
    ck.expect(!e5, "(iv) smooth transition constructor fails" + (e5 ? std::string(": ") + e5->what() : std::string()));
    art.report("nonexistence", out);
}

void trajectory_lemmas(Checks& ck, Artifacts& art) {
    ModelParams p(0.1, 1.5);
    auto c = construct_c1_transonic(p, 0.5);
    auto r = check_trajectory_lemmas(p, c.subsonicBackward);
    ck.expect(r.positive, "subsonic trajectory is not in n >= 0");
    ck.expect(r.pointsChecked > 0 && r.worstMargin <= 1e-8, "F - 1.5 Xi reaches " + num(r.worstMargin));
    ck.expect(std::abs(r.slopeAtOrigin - 0.101020) <= 1e-3, "F'(0) = " + num(r.slopeAtOrigin));
    art.report("lemmas", {{"positive", r.positive},
                          {"points", r.pointsChecked},
                          {"worstMargin", r.worstMargin},
                          {"worstAt", r.worstAt},
                          {"originDistance", r.originDistance},
                          {"slopeAtOrigin", r.slopeAtOrigin}});
}

struct Criterion {
    int id;
    const char* name;
    double limitSeconds;
    std::function<void(Checks&, Artifacts&)> run;
};

struct Outcome {
    bool pass = false;
    double seconds = 0.0;
    std::string detail;
};

Outcome evaluate(const Criterion& c, Artifacts& art) {
    Checks ck;
    auto t0 = std::chrono::steady_clock::now();
    try {
        c.run(ck, art);
    } catch (const std::exception& e) {
        ck.expect(false, std::string("threw: ") + e.what());
    }
    Outcome o;
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ck.expect(o.seconds < c.limitSeconds, "took " + num(o.seconds) + " s, limit " + num(c.limitSeconds) + " s");
    o.pass = ck.ok();
    for (std::size_t i = 0; i < ck.failures.size() && i < 3; ++i) o.detail += (i ? "; " : "") + ck.failures[i];
    if (ck.failures.size() > 3) o.detail += "; +" + std::to_string(ck.failures.size() - 3) + " more";
    return o;
}

void report(int id, const char* name, const Outcome& o) {
    std::printf("criterion %2d %-28s %s  %7.3f s%s%s\n", id, name, o.pass ? "PASS" : "FAIL", o.seconds,
                o.detail.empty() ? "" : "  ", o.detail.c_str());
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "sonic exactness", 1.0, sonic_exactness},
        {2, "critical points", 1.0, critical_points},
        {3, "subsonic uniqueness", 30.0, subsonic_uniqueness},
        {4, "optimal regularity", 10.0, optimal_regularity},
        {5, "supersonic structure", 10.0, supersonic_structure},
        {6, "shock family", 60.0, shock_family},
        {7, "smooth transition slopes", 30.0, c1_slopes},
        {8, "non-existence witnesses", 60.0, nonexistence},
        {9, "trajectory lemmas", 10.0, trajectory_lemmas},
    };

    fs::path scratch = fs::temp_directory_path() / ("sonicflow_acceptance_" + std::to_string(::getpid()));
    bool all = true;
    std::map<int, std::map<std::string, std::string>> first;
    for (const auto& c : criteria) {
        Artifacts art(scratch / ("criterion" + std::to_string(c.id)));
        art.reset();
        Outcome o = evaluate(c, art);
        report(c.id, c.name, o);
        all = all && o.pass;
        first[c.id] = art.snapshot();
    }

    // second pass into the same paths, compared byte for byte
    Outcome det;
    auto t0 = std::chrono::steady_clock::now();
    std::size_t files = 0, differing = 0;
    for (const auto& c : criteria) {
        Artifacts art(scratch / ("criterion" + std::to_string(c.id)));
        art.reset();
        Checks ignored;
        try {
            c.run(ignored, art);
        } catch (const std::exception&) {
        }
        auto again = art.snapshot();
        const auto& before = first[c.id];
        files += before.size();
        if (again.size() != before.size()) {
            det.detail += (det.detail.empty() ? "" : "; ") + std::string("criterion ") + std::to_string(c.id) +
                          ": file count " + std::to_string(before.size()) + " vs " + std::to_string(again.size());
            ++differing;
            continue;
        }
        for (const auto& [name, bytes] : before) {
            auto it = again.find(name);
            if (it == again.end() || it->second != bytes) {
                ++differing;
                if (differing <= 3) det.detail += (det.detail.empty() ? "" : "; ") + name + " differs";
            }
        }
    }
    det.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    det.pass = differing == 0 && files > 0;
    if (det.pass) det.detail = std::to_string(files) + " artifacts identical";
    report(10, "determinism", det);
    all = all && det.pass;

    fs::remove_all(scratch);
    std::printf("%s\n", all ? "ALL PASS" : "SOME CRITERIA FAILED");
    return all ? 0 : 1;
}
