#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include <sonicflow/driver.hpp>

using namespace sonicflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path d = fs::temp_directory_path() / ("sonicflow_io_" + std::to_string(::getpid())) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

RunConfig parse(const std::string& text) { return config_from_json(json::parse(text)); }

ErrorCode config_error(const std::string& text) {
    try {
        parse(text);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "accepted: " << text;
    return ErrorCode::InvalidParameter;
}

struct CliRun {
    int status = -1;
    std::string out;
};

CliRun cli(const std::string& args, const fs::path& dir) {
    const char* bin = std::getenv("SONIC_FLOW_BIN");
    if (!bin) return {};
    fs::path log = dir / "stdout.txt";
    std::string cmd = std::string(bin) + " " + args + " > " + log.string() + " 2>&1";
    int raw = std::system(cmd.c_str());
    CliRun r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = read_text(log.string());
    return r;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
    fs::path p = dir / name;
    write_text(p.string(), text);
    return p;
}

} // namespace

TEST(Numbers, ShortestRoundTrip) {
    for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5e-10, 0.9684341749466845}) {
        std::string s = format_number(v);
        EXPECT_EQ(parse_number(s), v) << s;
    }
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_THROW(parse_number("abc"), Error);
}

TEST(Csv, SolutionRoundTripIsExact) {
    ModelParams p(15.0, 1.5);
    RunConfig c;
    c.model = p;
    c.kind = SolutionKind::Supersonic;
    Solution s = solve(c);
    std::ostringstream os;
    write_solution_csv(os, s);
    EXPECT_EQ(os.str().substr(0, 15), "x,rho,e,regime\n");
    auto res = residual_norm(s, p);
    json meta = solution_json(s, c, res);
    std::istringstream is(os.str());
    Solution back = read_solution(is, meta);
    ASSERT_EQ(back.size(), s.size());
    EXPECT_EQ(back.x, s.x);
    EXPECT_EQ(back.rho, s.rho);
    EXPECT_EQ(back.e, s.e);
    EXPECT_EQ(back.kind, s.kind);
    EXPECT_EQ(residual_norm(back, p).maxResidual, meta.at("residual").at("max").get<double>());
}

TEST(Csv, ShockMetadataSurvives) {
    RunConfig c = parse(R"({"model": {"tau": 50, "doping": 1.5}, "solve": {"kind": "transonic-shock", "rhoL": 0.95}})");
    Solution s = solve(c);
    auto res = residual_norm(s, c.model);
    json meta = solution_json(s, c, res);
    std::ostringstream os;
    write_solution_csv(os, s);
    std::istringstream is(os.str());
    Solution back = read_solution(is, meta);
    ASSERT_TRUE(back.shock);
    EXPECT_EQ(back.shock->x0, s.shock->x0);
    EXPECT_EQ(*back.shockIndex, *s.shockIndex);
    auto r = shock_report(back);
    EXPECT_TRUE(r.entropy);
    EXPECT_EQ(meta.at("config"), config_to_json(c));
}

TEST(Csv, RejectsMalformedInput) {
    std::istringstream bad("x,rho,e,regime\n0,1\n");
    EXPECT_THROW(read_solution_csv(bad), Error);
    std::istringstream header("a,b,c,d\n");
    EXPECT_THROW(read_solution_csv(header), Error);
}

TEST(Config, EchoRoundTrip) {
    RunConfig c = parse(R"({
        "model": {"tau": 2, "gamma": 1.4, "doping": {"type": "piecewise", "breakpoints": [0.5], "values": [1.2, 1.8]}},
        "solve": {"kind": "subsonic", "method": "shooting"},
        "solver": {"boundaryTol": 1e-7},
        "integrator": {"relTol": 1e-10},
        "grid": {"coreCells": 1024},
        "analysis": {"holderWindow": [1e-5, 1e-2]},
        "output": {"dir": "somewhere", "formats": ["csv"]},
        "sweep": {"variable": "tau", "range": [1, 2], "count": 3}
    })");
    EXPECT_EQ(c.kind, SolutionKind::Subsonic);
    EXPECT_EQ(c.method, "shooting");
    EXPECT_EQ(c.model.gamma, 1.4);
    EXPECT_EQ(c.model.doping.lower(), 1.2);
    EXPECT_EQ(c.solver.integrator.relTol, 1e-10);
    EXPECT_EQ(c.solver.grid.coreCells, 1024);
    EXPECT_EQ(c.holderInner, 1e-5);
    EXPECT_TRUE(c.writeCsv);
    EXPECT_FALSE(c.writeSvg);
    ASSERT_EQ(c.sweep.values.size(), 3u);
    EXPECT_EQ(c.sweep.values[1], 1.5);
    json echo = config_to_json(c);
    RunConfig again = config_from_json(echo);
    EXPECT_EQ(config_to_json(again), echo);
}

TEST(Config, DopingVariants) {
    for (const char* d : {R"(1.5)", R"({"type": "constant", "value": 1.5})",
                          R"({"type": "sine", "b0": 2, "amplitude": 0.3, "frequency": 1})",
                          R"({"type": "tabulated", "knots": [0, 1], "values": [1.5, 2]})"}) {
        DopingProfile p = doping_from_json(json::parse(d));
        EXPECT_EQ(doping_to_json(doping_from_json(doping_to_json(p))), doping_to_json(p));
    }
}

TEST(Config, StrictErrors) {
    EXPECT_EQ(config_error(R"({"model": {"tau": 1, "doping": 1.5}, "bogus": 1})"), ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"model": {"tau": 1, "doping": 1.5, "extra": 2}})"), ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"model": {"doping": 1.5}})"), ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"solve": {"kind": "subsonic"}})"), ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"model": {"tau": -1, "doping": 1.5}})"), ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"model": {"tau": 1, "doping": {"type": "wavy"}}})"), ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"model": {"tau": 1, "doping": 1.5}, "solve": {"kind": "laminar"}})"),
              ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"model": {"tau": 1, "doping": 1.5}, "solve": {"method": "magic"}})"),
              ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"model": {"tau": 1, "doping": 1.5}, "integrator": {"relTol": 0}})"),
              ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"model": {"tau": 1, "doping": 1.5}, "sweep": {"variable": "mass"}})"),
              ErrorCode::InvalidConfig);
    EXPECT_EQ(config_error(R"({"model": {"tau": "one", "doping": 1.5}})"), ErrorCode::InvalidConfig);
}

TEST(Errors, JsonShapeAndExitCodes) {
    Error e(ErrorCode::PreconditionViolation, "no subsonic solution", "Theorem 3.1");
    json j = error_json(e);
    EXPECT_EQ(j.at("code"), "PreconditionViolation");
    EXPECT_EQ(j.at("theoremRef"), "Theorem 3.1");
    EXPECT_EQ(j.at("message"), "no subsonic solution");
    EXPECT_EQ(exit_code(ErrorCode::InvalidConfig), 1);
    EXPECT_EQ(exit_code(ErrorCode::NoSolutionInRegime), 2);
    EXPECT_EQ(exit_code(ErrorCode::ShootingDivergence), 3);
}

TEST(Svg, ProfileAndPortrait) {
    RunConfig c = parse(R"({"model": {"tau": 50, "doping": 1.5}, "solve": {"kind": "transonic-shock", "rhoL": 0.9}})");
    std::string svg = profile_svg(solve(c));
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("viewBox=\"0 0 800 600\""), std::string::npos);
    EXPECT_NE(svg.find("stroke=\"black\""), std::string::npos); // the shock segment
    EXPECT_NE(svg.find("</svg>"), std::string::npos);

    RunConfig pc = parse(R"({"model": {"tau": 15, "doping": 0.5}, "portrait": {"trajectories": 6}})");
    Portrait p = build_portrait(pc);
    EXPECT_EQ(p.critical.kind, CriticalKind::StableFocus);
    EXPECT_EQ(p.trajectories.size(), 6u);
    std::string ps = portrait_svg(p);
    EXPECT_NE(ps.find("A (stable focus)"), std::string::npos);
    std::ostringstream os;
    write_portrait_csv(os, p);
    EXPECT_EQ(os.str().substr(0, 19), "trajectory,x,rho,e\n");

    RunConfig nf = parse(R"({"model": {"tau": 0.1, "doping": 1.5}, "portrait": {"mode": "n-f"}})");
    Portrait q = build_portrait(nf);
    EXPECT_EQ(q.critical.kind, CriticalKind::Saddle);
    EXPECT_NE(portrait_svg(q).find("stroke=\"red\""), std::string::npos); // the Xi curve
    // saddle separatrices are added to the ring
    EXPECT_EQ(q.trajectories.size(), 16u + 4u);
}

TEST(Sweep, RowsInInputOrderWithRejections) {
    RunConfig c = parse(R"({"model": {"tau": 15, "doping": 0.9}, "solve": {"kind": "supersonic"},
                             "sweep": {"variable": "tau", "values": [0.2, 0.25], "threads": 2}})");
    auto samples = run_sweep(c);
    ASSERT_EQ(samples.size(), 2u);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        EXPECT_EQ(samples[i].index, i);
        EXPECT_FALSE(samples[i].solution);
    }
    std::string csv = sweep_csv(c, samples);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "index,variable,value,success,kind,code,theoremRef,x0,rhoL,rhoR,slope,boundaryError,maxResidual,message");
    EXPECT_NE(csv.find("NoSolutionInRegime"), std::string::npos);
    EXPECT_NE(csv.find("Theorem 3.2"), std::string::npos);
}

TEST(Cli, SolveWritesArtifacts) {
    if (!std::getenv("SONIC_FLOW_BIN")) GTEST_SKIP() << "SONIC_FLOW_BIN not set";
    fs::path d = scratch("solve");
    auto cfg = write_config(d, "c.json", R"({"model": {"tau": 15, "doping": 1.5}, "solve": {"kind": "subsonic"}})");
    auto r = cli("solve --config " + cfg.string() + " --out " + (d / "out").string(), d);
    EXPECT_EQ(r.status, 0) << r.out;
    for (const char* f : {"solution.csv", "solution.json", "profile.svg"}) EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
    json meta = json::parse(read_text((d / "out" / "solution.json").string()));
    EXPECT_EQ(meta.at("kind"), "subsonic");
    EXPECT_EQ(meta.at("config").at("model").at("tau"), 15.0);
}

TEST(Cli, ExitCodesByCategory) {
    if (!std::getenv("SONIC_FLOW_BIN")) GTEST_SKIP() << "SONIC_FLOW_BIN not set";
    fs::path d = scratch("codes");
    auto regime = write_config(d, "r.json", R"({"model": {"tau": 1, "doping": 0.9}, "solve": {"kind": "subsonic"}})");
    auto r = cli("solve --config " + regime.string() + " --out " + (d / "r").string(), d);
    EXPECT_EQ(r.status, 2) << r.out;
    json err = json::parse(read_text((d / "r" / "error.json").string()));
    EXPECT_EQ(err.at("code"), "PreconditionViolation");
    EXPECT_EQ(err.at("theoremRef"), "Theorem 3.1");

    auto usage = write_config(d, "u.json", R"({"model": {"tau": 1}})");
    EXPECT_EQ(cli("solve --config " + usage.string() + " --out " + (d / "u").string(), d).status, 1);
    EXPECT_EQ(cli("solve --config " + (d / "missing.json").string(), d).status, 1);
    EXPECT_EQ(cli("frobnicate", d).status, 1);
    auto broken = write_config(d, "b.json", "{ not json");
    EXPECT_EQ(cli("classify --config " + broken.string() + " --out " + (d / "b").string(), d).status, 1);
}

TEST(Cli, ClassifyAndVerifyRoundTrip) {
    if (!std::getenv("SONIC_FLOW_BIN")) GTEST_SKIP() << "SONIC_FLOW_BIN not set";
    fs::path d = scratch("verify");
    auto cfg = write_config(d, "c.json", R"({"model": {"tau": 15, "doping": 1.5}, "solve": {"kind": "supersonic"}})");
    auto c = cli("classify --config " + cfg.string() + " --out " + (d / "cls").string(), d);
    EXPECT_EQ(c.status, 0);
    json cls = json::parse(read_text((d / "cls" / "classify.json").string()));
    EXPECT_EQ(cls.at("supersonic").at("verdict"), "exists");

    ASSERT_EQ(cli("solve --config " + cfg.string() + " --out " + (d / "sol").string(), d).status, 0);
    auto v = cli("verify --config " + cfg.string() + " --input " + (d / "sol").string() + " --out " +
                     (d / "ver").string(),
                 d);
    EXPECT_EQ(v.status, 0) << v.out;
    json ver = json::parse(read_text((d / "ver" / "verify.json").string()));
    EXPECT_TRUE(ver.at("pass").get<bool>());
    EXPECT_EQ(ver.at("checks").at(0).at("name"), "roundTripResidual");
    EXPECT_EQ(ver.at("checks").at(0).at("value"), 0.0);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    if (!std::getenv("SONIC_FLOW_BIN")) GTEST_SKIP() << "SONIC_FLOW_BIN not set";
    fs::path d = scratch("determinism");
    auto cfg = write_config(d, "c.json",
                            R"({"model": {"tau": 50, "doping": 1.5}, "solve": {"kind": "transonic-shock"},
                                "sweep": {"variable": "rhoL", "values": [0.9, 0.92, 0.95], "threads": 3}})");
    // same configuration and output path twice; the config echo includes the path
    auto snapshot = [&] {
        fs::remove_all(d / "out");
        EXPECT_EQ(cli("sweep --config " + cfg.string() + " --out " + (d / "out").string(), d).status, 0);
        std::map<std::string, std::string> files;
        for (const auto& entry : fs::recursive_directory_iterator(d / "out"))
            if (entry.is_regular_file()) files[fs::relative(entry.path(), d / "out").string()] = read_text(entry.path().string());
        return files;
    };
    auto first = snapshot();
    auto second = snapshot();
    EXPECT_EQ(first.size(), 3u * 3u + 1u);
    ASSERT_EQ(first.size(), second.size());
    for (const auto& [name, bytes] : first) EXPECT_TRUE(bytes == second.at(name)) << name;
    EXPECT_TRUE(first.count("sample_002/solution.csv"));
}
