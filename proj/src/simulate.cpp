#include "dsmpc/simulate.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

namespace dsmpc {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

RunRecord simulate_run(const Controller& controller, const Scenario& scenario,
                       std::uint64_t seed) {
    RunRecord rec;
    rec.seed = seed;
    std::mt19937_64 rng(seed);
    NoiseSampler sampler(scenario.noise);

    auto violationFlags = [&](const Vector& x) {
        std::vector<bool> f(scenario.stateConstraints.size());
        for (size_t i = 0; i < scenario.stateConstraints.size(); ++i) {
            const auto& c = scenario.stateConstraints[i];
            f[i] = std::abs(c.direction.dot(x)) > c.bound;  // strict
        }
        return f;
    };

    Vector x = scenario.x0;
    ControllerState state = controller.init(x);
    rec.states.push_back(x);
    rec.violations.push_back(violationFlags(x));

    for (int k = 0; k < scenario.simHorizon; ++k) {
        StepOutcome outcome;
        const Vector xbarPrev = state.xbar;  // Strategy-2 nominal for this step
        try {
            auto [o, next] = controller.step(state, x);
            outcome = o;
            state = next;
        } catch (const BothInfeasible&) {
            rec.termination = Termination::BothInfeasibleAt;
            rec.terminationStep = k;
            return rec;
        }
        rec.inputs.push_back(outcome.input);
        rec.strategies.push_back(outcome.strategy);
        rec.costs.push_back(outcome.cost);
        rec.nominals.push_back(outcome.strategy == Strategy::S1 ? x : xbarPrev);

        const Vector w = sampler.sample(rng);
        x = scenario.model.A * x + scenario.model.B * outcome.input +
            scenario.model.E * w;
        rec.states.push_back(x);
        rec.violations.push_back(violationFlags(x));
    }
    rec.termination = Termination::Completed;
    return rec;
}

MonteCarloResult monte_carlo(const Scenario& scenario, Method method, int runs,
                             std::uint64_t baseSeed, int jobs, OcpForm form) {
    MonteCarloResult result;
    scenario.validate();
    SynthesisArtifacts art = scenario.synthesize();
    Controller controller(scenario.model, scenario.cost, scenario.stateConstraints,
                          scenario.inputConstraints, art, method, form);

    result.records.resize(runs);
    std::atomic<int> nextRun{0};
    auto worker = [&]() {
        for (;;) {
            const int i = nextRun.fetch_add(1);
            if (i >= runs) break;
            result.records[i] = simulate_run(controller, scenario, baseSeed + i);
        }
    };
    const int nThreads = std::max(1, jobs);
    if (nThreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nThreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // order-insensitive aggregation over the stored records
    const int T = scenario.simHorizon;
    const int nsc = static_cast<int>(scenario.stateConstraints.size());
    ViolationStats& stats = result.stats;
    stats.runs = runs;
    stats.perStepCounts.assign(nsc, std::vector<int>(T + 1, 0));
    stats.anyCounts.assign(T + 1, 0);
    result.meanStageCost.assign(T, 0.0);
    std::vector<int> completedAt(T, 0);

    for (const auto& rec : result.records) {
        if (rec.termination == Termination::BothInfeasibleAt) ++result.bothInfeasibleRuns;
        for (size_t k = 0; k < rec.violations.size(); ++k) {
            bool any = false;
            for (int i = 0; i < nsc; ++i) {
                if (rec.violations[k][i]) {
                    ++stats.perStepCounts[i][k];
                    any = true;
                }
            }
            if (any) ++stats.anyCounts[k];
        }
        for (size_t k = 0; k + 1 < rec.states.size() && k < rec.inputs.size(); ++k) {
            const Vector& xk = rec.states[k];
            const Vector& uk = rec.inputs[k];
            result.meanStageCost[k] +=
                xk.dot(scenario.cost.Q * xk) + uk.dot(scenario.cost.R * uk);
            ++completedAt[k];
        }
    }
    for (int k = 0; k < T; ++k)
        if (completedAt[k] > 0) result.meanStageCost[k] /= completedAt[k];

    stats.maxCount = 0;
    for (int c : stats.anyCounts) stats.maxCount = std::max(stats.maxCount, c);
    stats.empiricalRate = runs > 0 ? static_cast<double>(stats.maxCount) / runs : 0.0;

    const int tail = std::min(20, T);
    double acc = 0.0;
    for (int k = T - tail; k < T; ++k) acc += result.meanStageCost[k];
    result.meanTailStageCost = acc / tail;
    result.traceSW = (art.S * scenario.model.W()).trace();
    return result;
}

FeasibleSetResult feasible_set_scan(const Scenario& scenario, Method method,
                                    const GridSpec& grid) {
    if (scenario.model.nx() != 2)
        throw std::invalid_argument("feasible_set_scan requires a 2-state scenario");
    scenario.validate();
    SynthesisArtifacts art = scenario.synthesize();

    OcpInstance inst;
    inst.model = scenario.model;
    inst.cost = scenario.cost;
    inst.stateConstraints = scenario.stateConstraints;
    inst.inputConstraints = scenario.inputConstraints;
    inst.K = art.K;
    inst.S = art.S;
    inst.Sigma = art.Sigma;  // Strategy-1 stage-0 solve: Sigma_0 = 0
    inst.SigmaBar = art.SigmaBar;
    inst.method = method;

    FeasibleSetResult out;
    out.grid = grid;

    bool radiiOk = true;
    StageRadii radii;
    try {
        radii = stage_radii(inst.stateConstraints, inst.inputConstraints, inst.K,
                            inst.Sigma, inst.SigmaBar, method);
    } catch (const StageInfeasible&) {
        radiiOk = false;
    }

    const double cellArea = grid.step1 * grid.step2;
    for (double x1 = grid.x1min; x1 <= grid.x1max + 1e-12; x1 += grid.step1) {
        for (double x2 = grid.x2min; x2 <= grid.x2max + 1e-12; x2 += grid.step2) {
            out.x1.push_back(x1);
            out.x2.push_back(x2);
            bool feas = false;
            if (radiiOk) {
                inst.x0bar = Vector{{x1, x2}};
                feas = feasibility_margin(inst, radii) <= 1e-7;
            }
            out.feasible.push_back(feas);
            if (feas) ++out.feasibleCount;
        }
    }
    out.area = out.feasibleCount * cellArea;
    return out;
}

GridSpec parse_grid_spec(const std::string& text) {
    GridSpec g{};
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf,%lf:%lf:%lf", &g.x1min, &g.x1max,
                    &g.step1, &g.x2min, &g.x2max, &g.step2) != 6)
        throw std::invalid_argument(
            "grid spec must look like x1min:x1max:step,x2min:x2max:step");
    if (g.step1 <= 0 || g.step2 <= 0 || g.x1max < g.x1min || g.x2max < g.x2min)
        throw std::invalid_argument("invalid grid spec ranges");
    return g;
}

void write_runs_csv(const std::string& path, const Scenario& scenario,
                    const std::vector<RunRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    const int nx = scenario.model.nx();
    const int nu = scenario.model.nu();
    const int nsc = static_cast<int>(scenario.stateConstraints.size());
    out << "run,step";
    for (int i = 0; i < nx; ++i) out << ",x" << i + 1;
    for (int i = 0; i < nu; ++i) out << ",u" << i + 1;
    for (int i = 0; i < nx; ++i) out << ",xbar" << i + 1;
    out << ",strategy";
    for (int i = 0; i < nsc; ++i) out << ",violated" << i + 1;
    out << "\n";
    for (size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        for (size_t k = 0; k < rec.inputs.size(); ++k) {
            out << r << "," << k;
            for (int i = 0; i < nx; ++i) out << "," << format_double(rec.states[k](i));
            for (int i = 0; i < nu; ++i) out << "," << format_double(rec.inputs[k](i));
            for (int i = 0; i < nx; ++i) out << "," << format_double(rec.nominals[k](i));
            out << "," << (rec.strategies[k] == Strategy::S1 ? "S1" : "S2");
            for (int i = 0; i < nsc; ++i) out << "," << (rec.violations[k][i] ? 1 : 0);
            out << "\n";
        }
    }
}

void write_stats_csv(const std::string& path, const ViolationStats& stats) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    const int nsc = static_cast<int>(stats.perStepCounts.size());
    out << "step";
    for (int i = 0; i < nsc; ++i) out << ",count_c" << i + 1;
    out << ",count_any\n";
    for (size_t k = 0; k < stats.anyCounts.size(); ++k) {
        out << k;
        for (int i = 0; i < nsc; ++i) out << "," << stats.perStepCounts[i][k];
        out << "," << stats.anyCounts[k] << "\n";
    }
}

void write_summary(const std::string& path, const MonteCarloResult& result,
                   const Scenario& scenario, Method method) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "scenario: " << scenario.name << "\n";
    out << "method: " << method_name(method) << "\n";
    out << "runs: " << result.stats.runs << "\n";
    out << "max_violation_count: " << result.stats.maxCount << "\n";
    out << "empirical_rate: " << format_double(result.stats.empiricalRate) << "\n";
    out << "mean_tail_stage_cost: " << format_double(result.meanTailStageCost) << "\n";
    out << "trace_SW: " << format_double(result.traceSW) << "\n";
    out << "both_infeasible_runs: " << result.bothInfeasibleRuns << "\n";
}

void write_feasible_csv(const std::string& path,
                        const std::vector<std::pair<Method, FeasibleSetResult>>& results) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "x1,x2";
    for (const auto& [m, r] : results) out << ",feasible_" << method_name(m);
    out << "\n";
    if (results.empty()) return;
    const size_t n = results.front().second.x1.size();
    for (size_t i = 0; i < n; ++i) {
        out << format_double(results.front().second.x1[i]) << ","
            << format_double(results.front().second.x2[i]);
        for (const auto& [m, r] : results) out << "," << (r.feasible[i] ? 1 : 0);
        out << "\n";
    }
}

}  // namespace dsmpc
