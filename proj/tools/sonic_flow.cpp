#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <sonicflow/driver.hpp>

using namespace sonicflow;

namespace {

struct Args {
    std::string config;
    std::string out;
    std::string input;
};

RunConfig load(const Args& a, Command cmd) {
    json j;
    try {
        j = json::parse(read_text(a.config));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c = config_from_json(j);
    c.command = cmd;
    if (!a.out.empty()) c.outDir = a.out;
    if (!a.input.empty()) c.verifyInput = a.input;
    return c;
}

int run_solve(const RunConfig& c) {
    Solution s = solve(c);
    auto res = write_solution_artifacts(c.outDir, s, c);
    json summary{{"kind", to_string(s.kind)}, {"gridSize", s.size()}, {"maxResidual", res.maxResidual},
                 {"outDir", c.outDir}};
    if (s.shock) summary["shockX0"] = s.shock->x0;
    if (s.transition) summary["transitionX0"] = s.transition->x0;
    std::cout << summary.dump() << '\n';
    return 0;
}

int run_classify(const RunConfig& c) {
    json r = regime_json(classify_regime(c.model));
    std::filesystem::create_directories(c.outDir);
    write_text(c.outDir + "/classify.json", r.dump(2) + "\n");
    std::cout << r.dump() << '\n';
    return 0;
}

int run_portrait(const RunConfig& c) {
    Portrait p = build_portrait(c);
    std::filesystem::create_directories(c.outDir);
    std::ostringstream os;
    write_portrait_csv(os, p);
    write_text(c.outDir + "/portrait.csv", os.str());
    write_text(c.outDir + "/portrait.svg", portrait_svg(p));
    std::cout << json{{"critical", {{"rho", p.critical.rho}, {"e", p.critical.e}, {"kind", to_string(p.critical.kind)}}},
                      {"trajectories", p.trajectories.size()},
                      {"outDir", c.outDir}}
                     .dump()
              << '\n';
    return 0;
}

int run_sweep_cmd(const RunConfig& c) {
    auto samples = run_sweep(c);
    std::filesystem::create_directories(c.outDir);
    // all writes happen here, in sample order
    int ok = 0;
    for (const auto& s : samples) {
        if (!s.solution) continue;
        ++ok;
        if (c.sweep.writeSamples) {
            char name[32];
            std::snprintf(name, sizeof name, "/sample_%03zu", s.index);
            write_solution_artifacts(c.outDir + name, *s.solution, sweep_config(c, s.value));
        }
    }
    write_text(c.outDir + "/sweep.csv", sweep_csv(c, samples));
    std::cout << json{{"samples", samples.size()}, {"successes", ok}, {"outDir", c.outDir}}.dump() << '\n';
    return 0;
}

int run_verify(const RunConfig& c) {
    Solution s;
    std::vector<Check> extra;
    if (!c.verifyInput.empty()) {
        json meta = json::parse(read_text(c.verifyInput + "/solution.json"));
        std::istringstream csv(read_text(c.verifyInput + "/solution.csv"));
        s = read_solution(csv, meta);
        double recorded = meta.at("residual").at("max").get<double>();
        double now = residual_norm(s, c.model).maxResidual;
        extra.push_back({"roundTripResidual", std::abs(now - recorded), 1e-12, std::abs(now - recorded) <= 1e-12});
    } else {
        s = solve(c);
    }
    auto checks = verify_solution(s, c);
    checks.insert(checks.begin(), extra.begin(), extra.end());
    bool pass = std::all_of(checks.begin(), checks.end(), [](const Check& k) { return k.pass; });
    json r{{"kind", to_string(s.kind)}, {"pass", pass}, {"checks", checks_json(checks)}};
    std::filesystem::create_directories(c.outDir);
    write_text(c.outDir + "/verify.json", r.dump(2) + "\n");
    std::cout << r.dump() << '\n';
    return pass ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady hydrodynamic flow with sonic boundaries: solve, classify, portrait, sweep, verify"};
    app.require_subcommand(1);
    Args args;
    struct Sub {
        const char* name;
        Command cmd;
        const char* help;
    };
    const Sub subs[] = {{"solve", Command::Solve, "solve for one solution kind and write solution.csv/json/svg"},
                        {"classify", Command::Classify, "report existence verdicts for every solution kind"},
                        {"portrait", Command::Portrait, "trace a fan of trajectories and write portrait.csv/svg"},
                        {"sweep", Command::Sweep, "solve over a list of parameter values concurrently"},
                        {"verify", Command::Verify, "solve (or reload) and check the invariants of the solution"}};
    std::vector<std::pair<CLI::App*, Command>> cmds;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("--config", args.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", args.out, "output directory (overrides output.dir)");
        if (s.cmd == Command::Verify)
            sub->add_option("--input", args.input, "directory with solution.csv and solution.json to re-check");
        cmds.emplace_back(sub, s.cmd);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    Command cmd = Command::Solve;
    for (const auto& [sub, c] : cmds)
        if (sub->parsed()) cmd = c;

    std::string outDir = args.out.empty() ? "." : args.out;
    try {
        RunConfig c = load(args, cmd);
        outDir = c.outDir;
        switch (cmd) {
        case Command::Solve: return run_solve(c);
        case Command::Classify: return run_classify(c);
        case Command::Portrait: return run_portrait(c);
        case Command::Sweep: return run_sweep_cmd(c);
        case Command::Verify: return run_verify(c);
        }
    } catch (const Error& e) {
        json j = error_json(e);
        std::cout << j.dump() << '\n';
        try {
            std::filesystem::create_directories(outDir);
            write_text(outDir + "/error.json", j.dump(2) + "\n");
        } catch (...) {
        }
        return exit_code(e.code());
    } catch (const json::exception& e) {
        Error err(ErrorCode::InvalidConfig, e.what());
        std::cout << error_json(err).dump() << '\n';
        return exit_code(err.code());
    } catch (const std::filesystem::filesystem_error& e) {
        Error err(ErrorCode::InvalidConfig, e.what());
        std::cout << error_json(err).dump() << '\n';
        return exit_code(err.code());
    }
    return 0;
}
