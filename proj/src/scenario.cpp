#include "dsmpc/scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace dsmpc {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (int i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::invalid_argument("scenario: " + what + " must be a nested array");
    const int r = static_cast<int>(j.size());
    const int c = static_cast<int>(j[0].size());
    Matrix M(r, c);
    for (int i = 0; i < r; ++i) {
        if (static_cast<int>(j[i].size()) != c)
            throw std::invalid_argument("scenario: ragged matrix in " + what);
        for (int k = 0; k < c; ++k) M(i, k) = j[i][k].get<double>();
    }
    return M;
}

Vector vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array())
        throw std::invalid_argument("scenario: " + what + " must be an array");
    Vector v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
    return v;
}

json vector_to_json(const Vector& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

std::vector<TwoSidedConstraint> constraints_from_json(const json& j,
                                                      ConstraintKind kind,
                                                      const std::string& what) {
    std::vector<TwoSidedConstraint> out;
    for (const auto& cj : j) {
        TwoSidedConstraint c;
        c.direction = vector_from_json(cj.at("direction"), what + ".direction");
        c.bound = cj.at("bound").get<double>();
        c.epsilon = cj.at("epsilon").get<double>();
        c.kind = kind;
        c.validate();
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

void Scenario::validate() const {
    model.validate();
    cost.validate(model.nx(), model.nu());
    noise.validate();
    if (noise.covariance.rows() != model.nw())
        throw std::invalid_argument("noise covariance dimension must match the model's noise channel");
    if (x0.size() != model.nx())
        throw std::invalid_argument("x0 dimension must match the state dimension");
    if (simHorizon < 1) throw std::invalid_argument("simulation horizon must be >= 1");
    for (const auto& c : stateConstraints) {
        c.validate();
        if (c.direction.size() != model.nx())
            throw std::invalid_argument("state constraint direction dimension mismatch");
    }
    for (const auto& c : inputConstraints) {
        c.validate();
        if (c.direction.size() != model.nu())
            throw std::invalid_argument("input constraint direction dimension mismatch");
    }
}

SynthesisArtifacts Scenario::synthesize() const {
    return dsmpc::synthesize(model, cost, K_override ? &*K_override : nullptr,
                             S_override ? &*S_override : nullptr);
}

Scenario parse_scenario(const std::string& jsonText) {
    json j = json::parse(jsonText);
    if (!j.contains("schema") || j["schema"].get<int>() != 1)
        throw std::invalid_argument("scenario: missing or unsupported schema version");
    Scenario sc;
    sc.name = j.value("name", "scenario");
    const auto& mj = j.at("model");
    sc.model.A = matrix_from_json(mj.at("A"), "model.A");
    sc.model.B = matrix_from_json(mj.at("B"), "model.B");
    sc.model.E = mj.contains("E") ? matrix_from_json(mj.at("E"), "model.E")
                                  : Matrix(Matrix::Identity(sc.model.A.rows(), sc.model.A.rows()));
    sc.model.Wd = matrix_from_json(mj.at("Wd"), "model.Wd");
    const auto& cj = j.at("cost");
    sc.cost.Q = matrix_from_json(cj.at("Q"), "cost.Q");
    sc.cost.R = matrix_from_json(cj.at("R"), "cost.R");
    sc.cost.N = cj.at("N").get<int>();
    const auto& nj = j.at("noise");
    const std::string fam = nj.at("family").get<std::string>();
    if (fam == "gaussian")
        sc.noise.family = NoiseFamily::Gaussian;
    else if (fam == "laplace")
        sc.noise.family = NoiseFamily::Laplace;
    else
        throw std::invalid_argument("scenario: unknown noise family '" + fam + "'");
    sc.noise.covariance = matrix_from_json(nj.at("covariance"), "noise.covariance");
    if (j.contains("constraints")) {
        const auto& kj = j.at("constraints");
        if (kj.contains("state"))
            sc.stateConstraints =
                constraints_from_json(kj.at("state"), ConstraintKind::State, "state");
        if (kj.contains("input"))
            sc.inputConstraints =
                constraints_from_json(kj.at("input"), ConstraintKind::Input, "input");
    }
    sc.simHorizon = j.value("sim_horizon", 50);
    sc.x0 = j.contains("x0") ? vector_from_json(j.at("x0"), "x0")
                             : Vector(Vector::Zero(sc.model.A.rows()));
    if (j.contains("overrides")) {
        const auto& oj = j.at("overrides");
        if (oj.contains("K")) sc.K_override = matrix_from_json(oj.at("K"), "overrides.K");
        if (oj.contains("S")) sc.S_override = matrix_from_json(oj.at("S"), "overrides.S");
    }
    sc.validate();
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string scenario_to_json(const Scenario& sc) {
    json j;
    j["schema"] = 1;
    j["name"] = sc.name;
    j["model"]["A"] = matrix_to_json(sc.model.A);
    j["model"]["B"] = matrix_to_json(sc.model.B);
    j["model"]["E"] = matrix_to_json(sc.model.E);
    j["model"]["Wd"] = matrix_to_json(sc.model.Wd);
    j["cost"]["Q"] = matrix_to_json(sc.cost.Q);
    j["cost"]["R"] = matrix_to_json(sc.cost.R);
    j["cost"]["N"] = sc.cost.N;
    j["noise"]["family"] =
        sc.noise.family == NoiseFamily::Gaussian ? "gaussian" : "laplace";
    j["noise"]["covariance"] = matrix_to_json(sc.noise.covariance);
    auto consToJson = [](const std::vector<TwoSidedConstraint>& cs) {
        json a = json::array();
        for (const auto& c : cs) {
            json cj;
            cj["direction"] = vector_to_json(c.direction);
            cj["bound"] = c.bound;
            cj["epsilon"] = c.epsilon;
            a.push_back(cj);
        }
        return a;
    };
    j["constraints"]["state"] = consToJson(sc.stateConstraints);
    j["constraints"]["input"] = consToJson(sc.inputConstraints);
    j["sim_horizon"] = sc.simHorizon;
    j["x0"] = vector_to_json(sc.x0);
    if (sc.K_override) j["overrides"]["K"] = matrix_to_json(*sc.K_override);
    if (sc.S_override) j["overrides"]["S"] = matrix_to_json(*sc.S_override);
    return j.dump(2);
}

BuiltinScenarios builtin_scenarios() {
    BuiltinScenarios out;

    {
        Scenario& sc = out.buck_boost;
        sc.name = "buck_boost";
        sc.model.A = Matrix{{1.0, 0.0075}, {-0.143, 0.996}};
        sc.model.B = Matrix{{4.798}, {0.115}};
        sc.model.E = Matrix::Identity(2, 2);
        sc.model.Wd = 0.03 * Matrix::Identity(2, 2);
        sc.cost.Q = Vector{{1.0, 10.0}}.asDiagonal();
        sc.cost.R = Matrix{{1.0}};
        sc.cost.N = 8;
        sc.noise.family = NoiseFamily::Gaussian;
        sc.noise.covariance = 0.03 * Matrix::Identity(2, 2);
        TwoSidedConstraint c1{Vector{{1.0, 0.0}}, 2.0, 0.2, ConstraintKind::State};
        TwoSidedConstraint c2{Vector{{0.0, 1.0}}, 3.0, 0.2, ConstraintKind::State};
        TwoSidedConstraint cu{Vector{{1.0}}, 0.2, 0.01, ConstraintKind::Input};
        sc.stateConstraints = {c1, c2};
        sc.inputConstraints = {cu};
        sc.simHorizon = 50;
        sc.x0 = Vector{{1.0, 2.0}};
        sc.K_override = Matrix{{-0.28, 0.49}};
        sc.S_override = Matrix{{1.90, -5.05}, {-5.05, 39.54}};
    }

    {
        Scenario& sc = out.two_mass_spring;
        sc.name = "two_mass_spring";
        const double Ts = 0.1, ks = 1.25, m1 = 1.0, m2 = 1.0;
        Matrix Ac = Matrix::Zero(4, 4);
        Ac(0, 2) = 1.0;
        Ac(1, 3) = 1.0;
        Ac(2, 0) = -ks / m1;
        Ac(2, 1) = ks / m1;
        Ac(3, 0) = ks / m2;
        Ac(3, 1) = -ks / m2;
        sc.model.A = Matrix::Identity(4, 4) + Ts * Ac;
        sc.model.B = Matrix::Zero(4, 1);
        sc.model.B(2, 0) = Ts / m1;
        sc.model.E = Matrix::Zero(4, 2);
        sc.model.E(2, 0) = Ts / m1;
        sc.model.E(3, 1) = Ts / m2;
        sc.model.Wd = 0.07 * Matrix::Identity(2, 2);
        Vector qdiag{{1.0, 1.0, 4.0, 6.0}};
        sc.cost.Q = qdiag.asDiagonal();
        sc.cost.R = Matrix{{1.0}};
        sc.cost.N = 7;
        sc.noise.family = NoiseFamily::Laplace;
        sc.noise.covariance = 0.07 * Matrix::Identity(2, 2);
        TwoSidedConstraint c3{Vector{{0.0, 0.0, 1.0, 0.0}}, 0.12, 0.2,
                              ConstraintKind::State};
        TwoSidedConstraint c4{Vector{{0.0, 0.0, 0.0, 1.0}}, 0.12, 0.2,
                              ConstraintKind::State};
        TwoSidedConstraint cu{Vector{{1.0}}, 0.5, 0.01, ConstraintKind::Input};
        sc.stateConstraints = {c3, c4};
        sc.inputConstraints = {cu};
        sc.simHorizon = 50;
        sc.x0 = Vector{{0.5, 0.5, 0.0, 0.0}};
    }

    out.buck_boost.validate();
    out.two_mass_spring.validate();
    return out;
}

Method parse_method(const std::string& name) {
    if (name == "dr") return Method::DR;
    if (name == "gauss" || name == "gaussian") return Method::Gaussian;
    if (name == "cantelli") return Method::Cantelli;
    throw std::invalid_argument("unknown method '" + name + "' (expected dr|gauss|cantelli)");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::DR: return "dr";
        case Method::Gaussian: return "gauss";
        case Method::Cantelli: return "cantelli";
    }
    return "?";
}

}  // namespace dsmpc
