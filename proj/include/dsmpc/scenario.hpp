#pragma once

#include "dsmpc/linalg.hpp"
#include "dsmpc/noise.hpp"
#include "dsmpc/tightening.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dsmpc {

struct Scenario {
    std::string name;
    SystemModel model;
    CostSpec cost;
    std::vector<TwoSidedConstraint> stateConstraints;
    std::vector<TwoSidedConstraint> inputConstraints;
    NoiseSpec noise;
    int simHorizon = 50;
    Vector x0;
    std::optional<Matrix> K_override;
    std::optional<Matrix> S_override;

    void validate() const;
    SynthesisArtifacts synthesize() const;
};

/// Parses the versioned scenario document (schema: 1).
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& jsonText);
std::string scenario_to_json(const Scenario& sc);

struct BuiltinScenarios {
    Scenario buck_boost;
    Scenario two_mass_spring;
};

BuiltinScenarios builtin_scenarios();

Method parse_method(const std::string& name);  // "dr" | "gauss" | "cantelli"
std::string method_name(Method m);

}  // namespace dsmpc
