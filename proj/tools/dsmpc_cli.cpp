#include "dsmpc/controller.hpp"
#include "dsmpc/ocp.hpp"
#include "dsmpc/scenario.hpp"
#include "dsmpc/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace dsmpc;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitSolverFailure = 3;

Scenario resolve_scenario(const std::string& ref) {
    if (ref == "buck_boost") return builtin_scenarios().buck_boost;
    if (ref == "two_mass_spring") return builtin_scenarios().two_mass_spring;
    return load_scenario(ref);
}

json matrix_json(const Matrix& M) {
    json rows = json::array();
    for (int i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

Vector parse_vector(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    Vector v(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) v(static_cast<int>(i)) = vals[i];
    return v;
}

int cmd_certify(const std::string& scenarioRef, Method method, const std::string& outPath) {
    Scenario sc = resolve_scenario(scenarioRef);
    SynthesisArtifacts art = sc.synthesize();

    json report;
    report["scenario"] = sc.name;
    report["method"] = method_name(method);
    report["K"] = matrix_json(art.K);
    report["S"] = matrix_json(art.S);
    report["SigmaBar"] = matrix_json(art.SigmaBar);
    report["spectral_radius"] = art.spectralRadius;

    int exitCode = kExitOk;
    try {
        StageRadii radii = stage_radii(sc.stateConstraints, sc.inputConstraints,
                                       art.K, art.Sigma, art.SigmaBar, method);
        report["state_radii"] = matrix_json(radii.stateRadii);
        report["input_radii"] = matrix_json(radii.inputRadii);
        report["terminal_radii"] = matrix_json(radii.terminalRadii);
        report["terminal_input_radii"] = matrix_json(radii.terminalInputRadii);

        TerminalSet ts = make_terminal_set(sc.stateConstraints, art.SigmaBar, method);
        TerminalReport tr = certify_terminal(art.K, art.Acl, ts, sc.inputConstraints,
                                             radii.terminalInputRadii);
        report["terminal_invariant"] = tr.invariant;
        report["input_admissible"] = tr.inputAdmissible == Admissibility::Yes
                                         ? "yes"
                                         : (tr.inputAdmissible == Admissibility::No
                                                ? "no"
                                                : "unbounded");
        report["invariance_margin"] = tr.worstInvarianceMargin;
        report["input_margin"] = tr.worstInputMargin;
        if (!tr.invariant) exitCode = kExitInfeasible;
    } catch (const StageInfeasible& e) {
        report["infeasible_constraint"] = e.index;
        report["infeasible_stage"] = e.stage;
        report["error"] = e.what();
        exitCode = kExitInfeasible;
    }

    const std::string text = report.dump(2);
    if (outPath.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream out(outPath);
        out << text << "\n";
    }
    return exitCode;
}

int cmd_solve(const std::string& scenarioRef, Method method, const std::string& x0text) {
    Scenario sc = resolve_scenario(scenarioRef);
    SynthesisArtifacts art = sc.synthesize();
    Vector x0 = x0text.empty() ? sc.x0 : parse_vector(x0text);
    if (x0.size() != sc.model.nx()) {
        std::cerr << "x0 dimension mismatch\n";
        return kExitSolverFailure;
    }

    OcpInstance inst;
    inst.model = sc.model;
    inst.cost = sc.cost;
    inst.stateConstraints = sc.stateConstraints;
    inst.inputConstraints = sc.inputConstraints;
    inst.K = art.K;
    inst.S = art.S;
    inst.Sigma = art.Sigma;
    inst.SigmaBar = art.SigmaBar;
    inst.x0bar = x0;
    inst.method = method;

    OcpSolution sol = solve_ocp(inst);
    if (sol.status == OcpStatus::Infeasible) {
        std::cerr << "infeasible (phase-1 margin " << sol.infeasibilityMargin << ")\n";
        return kExitInfeasible;
    }
    if (sol.status != OcpStatus::Optimal) {
        std::cerr << "solver failure\n";
        return kExitSolverFailure;
    }
    std::cout << "step";
    for (int i = 0; i < sc.model.nx(); ++i) std::cout << ",xbar" << i + 1;
    for (int i = 0; i < sc.model.nu(); ++i) std::cout << ",ubar" << i + 1;
    std::cout << "\n";
    for (int l = 0; l <= sc.cost.N; ++l) {
        std::cout << l;
        for (int i = 0; i < sc.model.nx(); ++i)
            std::cout << "," << format_double(sol.nominalStates[l](i));
        for (int i = 0; i < sc.model.nu(); ++i)
            std::cout << ","
                      << (l < sc.cost.N ? format_double(sol.nominalInputs[l](i)) : "");
        std::cout << "\n";
    }
    std::cout << "cost," << format_double(sol.cost) << "\n";
    return kExitOk;
}

int cmd_simulate(const std::string& scenarioRef, Method method, int runs, int steps,
                 std::uint64_t seed, int jobs, const std::string& outDir) {
    Scenario sc = resolve_scenario(scenarioRef);
    if (steps > 0) sc.simHorizon = steps;
    std::filesystem::create_directories(outDir);
    MonteCarloResult result = monte_carlo(sc, method, runs, seed, jobs);
    write_runs_csv(outDir + "/runs.csv", sc, result.records);
    write_stats_csv(outDir + "/stats.csv", result.stats);
    write_summary(outDir + "/summary.txt", result, sc, method);
    std::cout << "runs: " << runs << "  max violation count: " << result.stats.maxCount
              << "  empirical rate: " << result.stats.empiricalRate << "\n";
    return kExitOk;
}

int cmd_feasible_set(const std::string& scenarioRef, const std::string& methods,
                     const std::string& gridText, const std::string& outDir) {
    Scenario sc = resolve_scenario(scenarioRef);
    GridSpec grid = parse_grid_spec(gridText);
    std::filesystem::create_directories(outDir);

    std::vector<std::pair<Method, FeasibleSetResult>> results;
    std::stringstream ss(methods);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        Method m = parse_method(tok);
        results.emplace_back(m, feasible_set_scan(sc, m, grid));
        std::cout << method_name(m) << ": area " << results.back().second.area
                  << " (" << results.back().second.feasibleCount << " cells)\n";
    }
    write_feasible_csv(outDir + "/feasible.csv", results);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributionally robust stochastic MPC toolkit"};
    app.require_subcommand(1);

    std::string scenarioRef, methodStr = "dr", x0text, outPath, gridText, outDir = ".";
    int runs = 1000, steps = 0, jobs = 1;
    std::uint64_t seed = 1;

    auto* certify = app.add_subcommand("certify", "synthesize and certify a scenario");
    certify->add_option("--scenario", scenarioRef, "scenario file or builtin name")->required();
    certify->add_option("--method", methodStr, "dr|gauss|cantelli");
    certify->add_option("--out", outPath, "report file (default stdout)");

    auto* solve = app.add_subcommand("solve", "solve one finite-horizon program");
    solve->add_option("--scenario", scenarioRef)->required();
    solve->add_option("--method", methodStr);
    solve->add_option("--x0", x0text, "comma-separated initial nominal state");

    auto* simulate = app.add_subcommand("simulate", "closed-loop Monte Carlo");
    simulate->add_option("--scenario", scenarioRef)->required();
    simulate->add_option("--method", methodStr);
    simulate->add_option("--runs", runs);
    simulate->add_option("--steps", steps, "simulation horizon override");
    simulate->add_option("--seed", seed);
    simulate->add_option("--jobs", jobs);
    simulate->add_option("--out", outDir)->required();

    auto* feas = app.add_subcommand("feasible-set", "grid scan of feasible initial states");
    feas->add_option("--scenario", scenarioRef)->required();
    feas->add_option("--method", methodStr, "comma-separated list");
    feas->add_option("--grid", gridText, "x1min:x1max:step,x2min:x2max:step")->required();
    feas->add_option("--out", outDir)->required();

    auto* emit = app.add_subcommand("emit-scenario", "write a builtin scenario as JSON");
    std::string builtinName;
    emit->add_option("name", builtinName, "buck_boost|two_mass_spring")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (certify->parsed())
            return cmd_certify(scenarioRef, parse_method(methodStr), outPath);
        if (solve->parsed())
            return cmd_solve(scenarioRef, parse_method(methodStr), x0text);
        if (simulate->parsed())
            return cmd_simulate(scenarioRef, parse_method(methodStr), runs, steps, seed,
                                jobs, outDir);
        if (feas->parsed())
            return cmd_feasible_set(scenarioRef, methodStr, gridText, outDir);
        if (emit->parsed()) {
            std::cout << scenario_to_json(resolve_scenario(builtinName)) << "\n";
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolverFailure;
    }
    return kExitOk;
}
