#pragma once

#include "dsmpc/controller.hpp"
#include "dsmpc/scenario.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dsmpc {

enum class Termination { Completed, BothInfeasibleAt };

struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<Vector> states;    // x_0..x_T (shorter on early termination)
    std::vector<Vector> inputs;    // u_0..u_{T-1}
    std::vector<Vector> nominals;  // xbar used at each solved step
    std::vector<Strategy> strategies;
    std::vector<double> costs;     // selected optimal cost per step
    std::vector<std::vector<bool>> violations;  // [step][state constraint]
    Termination termination = Termination::Completed;
    int terminationStep = -1;
};

struct ViolationStats {
    // perStepCounts[i][k]: runs violating state constraint i at step k
    std::vector<std::vector<int>> perStepCounts;
    std::vector<int> anyCounts;  // runs violating any state constraint at step k
    int maxCount = 0;
    double empiricalRate = 0.0;
    int runs = 0;
};

struct MonteCarloResult {
    std::vector<RunRecord> records;
    ViolationStats stats;
    std::vector<double> meanStageCost;  // over runs, per step
    double meanTailStageCost = 0.0;     // averaged over the final 20 steps
    double traceSW = 0.0;
    int bothInfeasibleRuns = 0;
};

RunRecord simulate_run(const Controller& controller, const Scenario& scenario,
                       std::uint64_t seed);

MonteCarloResult monte_carlo(const Scenario& scenario, Method method, int runs,
                             std::uint64_t baseSeed, int jobs,
                             OcpForm form = OcpForm::Conic);

struct GridSpec {
    double x1min, x1max, step1;
    double x2min, x2max, step2;
};

struct FeasibleSetResult {
    GridSpec grid;
    std::vector<double> x1;  // flattened grid coordinates
    std::vector<double> x2;
    std::vector<bool> feasible;
    double area = 0.0;
    int feasibleCount = 0;
};

/// Strategy-1 feasibility of the stage-0 program over a 2-D grid of
/// initial nominal states. Requires a 2-state scenario.
FeasibleSetResult feasible_set_scan(const Scenario& scenario, Method method,
                                    const GridSpec& grid);

GridSpec parse_grid_spec(const std::string& text);  // "a:b:step,c:d:step"

// CSV / report emission (17 significant digits, round-trip exact)
void write_runs_csv(const std::string& path, const Scenario& scenario,
                    const std::vector<RunRecord>& records);
void write_stats_csv(const std::string& path, const ViolationStats& stats);
void write_summary(const std::string& path, const MonteCarloResult& result,
                   const Scenario& scenario, Method method);
void write_feasible_csv(const std::string& path,
                        const std::vector<std::pair<Method, FeasibleSetResult>>& results);

std::string format_double(double v);  // %.17g

}  // namespace dsmpc
