#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tailrisk/csv.hpp"
#include "tailrisk/empirical.hpp"
#include "tailrisk/extrapolation.hpp"
#include "tailrisk/importance_sampling.hpp"
#include "tailrisk/loss.hpp"
#include "tailrisk/matrix.hpp"
#include "tailrisk/models.hpp"
#include "tailrisk/optimizer.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ExperimentKind { rmse_gradient, rmse_cvar, variance_study, portfolio };

inline std::string experiment_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::rmse_gradient: return "rmse_gradient";
        case ExperimentKind::rmse_cvar: return "rmse_cvar";
        case ExperimentKind::variance_study: return "variance_study";
        case ExperimentKind::portfolio: return "portfolio";
    }
    return "?";
}

/// Model specification: a sampler family plus its parameters, or a CSV path.
struct ModelSpec {
    enum class Kind { pareto, t_copula_pareto, csv };
    Kind kind = Kind::pareto;
    std::vector<double> alphas;      // one per column, or a single value with d
    std::vector<double> scales;      // defaults to 1s
    double dof = 4.0;                // t-copula driver; heavy-tailed but finite-variance
    std::optional<Matrix> correlation;
    std::optional<double> equicorrelation;
    std::string path;                // csv
    std::size_t d = 0;

    std::string name() const {
        switch (kind) {
            case Kind::pareto: return "pareto";
            case Kind::t_copula_pareto: return "t_copula_pareto";
            case Kind::csv: return "csv";
        }
        return "?";
    }
};

struct ThetaSpec {
    bool uniform = true;
    std::vector<double> values;

    std::vector<double> resolve(std::size_t d) const {
        if (uniform) return std::vector<double>(d, 1.0 / static_cast<double>(d));
        if (values.size() != d)
            throw ConfigError("theta dimension does not match the model dimension");
        return values;
    }
};

struct LossSpec {
    LossModel::Kind kind = LossModel::Kind::linear;
    double c1 = 1.0;
    double rho = 0.0;
    double u0 = 0.0;

    LossModel build() const {
        switch (kind) {
            case LossModel::Kind::linear: return LossModel::linear();
            case LossModel::Kind::squared: return LossModel::squared();
            case LossModel::Kind::power: return LossModel::power(c1, rho, u0);
        }
        throw ConfigError("unknown loss kind");
    }
};

struct BenchmarkSpec {
    enum class Kind { simulated, closed_form };
    Kind kind = Kind::simulated;
    std::size_t samples = 1'000'000;  // N1
};

struct OptimizerSpec {
    double step_size = 0.0;
    std::size_t max_iters = 300;
    double grad_tolerance = 0.0;
    std::size_t multi_starts = 5;
    bool sqrt_decay = false;
};

/// Config for one experiment run; mirrors the JSON schema field-for-field.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::rmse_cvar;
    ModelSpec model;
    LossSpec loss;
    ThetaSpec theta;
    double beta = 0.01;
    double beta0 = 0.0;                    // 0 = resolve default (20*beta linear, 8*beta squared, 0.1 portfolio)
    std::vector<double> beta0_candidates;  // when present, cross-validated once per run
    std::size_t cv_folds = 5;
    std::vector<double> betas;             // variance_study grid; defaults to {beta}
    std::vector<std::size_t> sample_sizes{250, 500, 1000, 2000};
    std::size_t replications = 200;
    std::uint64_t seed = 1;
    std::string output;
    BenchmarkSpec benchmark;
    std::size_t evaluation_samples = 100'000;  // portfolio reference size N
    OptimizerSpec optimizer;
};

/// One aggregate cell of a benchmark table plus the raw per-replication
/// scalars it was reduced from (kept in memory only; the CSV holds the
/// aggregates).
struct BenchmarkCell {
    double beta = 0.0;
    double beta0 = 0.0;
    std::size_t n = 0;
    std::string method;
    std::size_t replications = 0;
    double rmse = 0.0;      // sqrt(mean(e_r^2)) of per-replication relative errors
    double mean = 0.0;      // see README: relative errors for rmse/portfolio, estimates for variance_study
    double variance = 0.0;
    std::vector<double> raw;
    std::string note;       // per-cell failure note; empty when the cell is healthy
};

struct BenchmarkResult {
    ExperimentConfig config;
    std::vector<BenchmarkCell> cells;
    double benchmark_value = 0.0;  // scalar benchmark when the experiment uses one
    double resolved_beta0 = 0.0;
};

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------
namespace detail {
using nlohmann::json;

inline void reject_unknown_keys(const json& obj, const char* where,
                                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
    }
}

inline ModelSpec parse_model(const json& j) {
    if (!j.is_object()) throw ConfigError("'model' must be an object");
    reject_unknown_keys(j, "model",
                        {"kind", "alphas", "scales", "dof", "correlation", "equicorrelation",
                         "path", "d"});
    ModelSpec m;
    const std::string kind = j.value("kind", "pareto");
    if (kind == "pareto") m.kind = ModelSpec::Kind::pareto;
    else if (kind == "t_copula_pareto") m.kind = ModelSpec::Kind::t_copula_pareto;
    else if (kind == "csv") m.kind = ModelSpec::Kind::csv;
    else throw ConfigError("model.kind must be pareto | t_copula_pareto | csv");

    if (j.contains("d")) m.d = j.at("d").get<std::size_t>();
    if (j.contains("alphas")) {
        const auto& a = j.at("alphas");
        if (a.is_number()) {
            if (m.d == 0) throw ConfigError("scalar model.alphas requires model.d");
            m.alphas.assign(m.d, a.get<double>());
        } else {
            m.alphas = a.get<std::vector<double>>();
        }
    }
    if (j.contains("scales")) {
        const auto& s = j.at("scales");
        if (s.is_number()) m.scales.assign(std::max(m.d, m.alphas.size()), s.get<double>());
        else m.scales = s.get<std::vector<double>>();
    }
    if (j.contains("dof")) m.dof = j.at("dof").get<double>();
    if (j.contains("equicorrelation")) m.equicorrelation = j.at("equicorrelation").get<double>();
    if (j.contains("correlation")) {
        const auto rows = j.at("correlation").get<std::vector<std::vector<double>>>();
        const std::size_t d = rows.size();
        Matrix r(d, d);
        for (std::size_t i = 0; i < d; ++i) {
            if (rows[i].size() != d) throw ConfigError("model.correlation must be square");
            for (std::size_t k = 0; k < d; ++k) r(i, k) = rows[i][k];
        }
        m.correlation = std::move(r);
    }
    if (j.contains("path")) m.path = j.at("path").get<std::string>();

    if (m.kind == ModelSpec::Kind::csv) {
        if (m.path.empty()) throw ConfigError("model.kind=csv requires model.path");
    } else {
        if (m.alphas.empty()) throw ConfigError("model requires alphas");
        if (m.d == 0) m.d = m.alphas.size();
        if (m.d != m.alphas.size()) throw ConfigError("model.d does not match alphas length");
    }
    return m;
}

inline LossSpec parse_loss(const json& j) {
    LossSpec l;
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "linear") l.kind = LossModel::Kind::linear;
        else if (s == "squared") l.kind = LossModel::Kind::squared;
        else throw ConfigError("loss must be linear | squared | {kind: power, ...}");
        return l;
    }
    if (!j.is_object()) throw ConfigError("'loss' must be a string or object");
    reject_unknown_keys(j, "loss", {"kind", "c1", "rho", "u0"});
    const std::string s = j.value("kind", "linear");
    if (s == "linear") l.kind = LossModel::Kind::linear;
    else if (s == "squared") l.kind = LossModel::Kind::squared;
    else if (s == "power") l.kind = LossModel::Kind::power;
    else throw ConfigError("loss.kind must be linear | squared | power");
    l.c1 = j.value("c1", 1.0);
    l.rho = j.value("rho", 0.0);
    l.u0 = j.value("u0", 0.0);
    return l;
}

inline json model_to_json(const ModelSpec& m) {
    json j;
    j["kind"] = m.name();
    if (m.kind == ModelSpec::Kind::csv) {
        j["path"] = m.path;
        return j;
    }
    j["alphas"] = m.alphas;
    j["d"] = m.d;
    if (!m.scales.empty()) j["scales"] = m.scales;
    if (m.kind == ModelSpec::Kind::t_copula_pareto) {
        j["dof"] = m.dof;
        if (m.equicorrelation) j["equicorrelation"] = *m.equicorrelation;
        if (m.correlation) {
            std::vector<std::vector<double>> rows(m.correlation->rows());
            for (std::size_t i = 0; i < m.correlation->rows(); ++i)
                rows[i].assign(m.correlation->row(i).begin(), m.correlation->row(i).end());
            j["correlation"] = rows;
        }
    }
    return j;
}
}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    using detail::reject_unknown_keys;
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown_keys(j, "config",
                        {"experiment", "model", "loss", "theta", "levels", "betas",
                         "sample_sizes", "replications", "seed", "output", "benchmark",
                         "evaluation_samples", "optimizer"});
    ExperimentConfig c;
    const std::string kind = j.value("experiment", "");
    if (kind == "rmse_gradient") c.kind = ExperimentKind::rmse_gradient;
    else if (kind == "rmse_cvar") c.kind = ExperimentKind::rmse_cvar;
    else if (kind == "variance_study") c.kind = ExperimentKind::variance_study;
    else if (kind == "portfolio") c.kind = ExperimentKind::portfolio;
    else throw ConfigError("experiment must be rmse_gradient | rmse_cvar | variance_study | portfolio");

    if (!j.contains("model")) throw ConfigError("config requires 'model'");
    c.model = detail::parse_model(j.at("model"));
    if (j.contains("loss")) c.loss = detail::parse_loss(j.at("loss"));
    if (j.contains("theta")) {
        const auto& t = j.at("theta");
        if (t.is_string()) {
            if (t.get<std::string>() != "uniform")
                throw ConfigError("theta must be \"uniform\" or an array");
        } else {
            c.theta.uniform = false;
            c.theta.values = t.get<std::vector<double>>();
        }
    }
    if (!j.contains("levels")) throw ConfigError("config requires 'levels'");
    {
        const auto& lv = j.at("levels");
        reject_unknown_keys(lv, "levels", {"beta", "beta0", "beta0_candidates", "cv_folds"});
        if (!lv.contains("beta")) throw ConfigError("levels requires beta");
        c.beta = lv.at("beta").get<double>();
        if (lv.contains("beta0")) c.beta0 = lv.at("beta0").get<double>();
        if (lv.contains("beta0_candidates"))
            c.beta0_candidates = lv.at("beta0_candidates").get<std::vector<double>>();
        if (lv.contains("cv_folds")) c.cv_folds = lv.at("cv_folds").get<std::size_t>();
    }
    if (j.contains("betas")) c.betas = j.at("betas").get<std::vector<double>>();
    if (j.contains("sample_sizes"))
        c.sample_sizes = j.at("sample_sizes").get<std::vector<std::size_t>>();
    if (j.contains("replications")) c.replications = j.at("replications").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    if (j.contains("benchmark")) {
        const auto& b = j.at("benchmark");
        reject_unknown_keys(b, "benchmark", {"kind", "samples"});
        const std::string bk = b.value("kind", "simulated");
        if (bk == "simulated") c.benchmark.kind = BenchmarkSpec::Kind::simulated;
        else if (bk == "closed_form") c.benchmark.kind = BenchmarkSpec::Kind::closed_form;
        else throw ConfigError("benchmark.kind must be simulated | closed_form");
        if (b.contains("samples")) c.benchmark.samples = b.at("samples").get<std::size_t>();
    }
    if (j.contains("evaluation_samples"))
        c.evaluation_samples = j.at("evaluation_samples").get<std::size_t>();
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        reject_unknown_keys(o, "optimizer",
                            {"step_size", "max_iters", "grad_tolerance", "multi_starts",
                             "sqrt_decay"});
        c.optimizer.step_size = o.value("step_size", 0.0);
        c.optimizer.max_iters = o.value("max_iters", std::size_t{300});
        c.optimizer.grad_tolerance = o.value("grad_tolerance", 0.0);
        c.optimizer.multi_starts = o.value("multi_starts", std::size_t{5});
        c.optimizer.sqrt_decay = o.value("sqrt_decay", false);
    }

    if (!(c.beta > 0.0) || !(c.beta < 1.0)) throw ConfigError("levels.beta must be in (0,1)");
    if (c.replications < 1) throw ConfigError("replications must be >= 1");
    for (std::size_t n : c.sample_sizes)
        if (n < 1) throw ConfigError("sample_sizes must be positive");
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError(CsvError::Kind::io, "cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON in ") + path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["experiment"] = experiment_name(c.kind);
    j["model"] = detail::model_to_json(c.model);
    nlohmann::json loss;
    loss["kind"] = (c.loss.kind == LossModel::Kind::linear)    ? "linear"
                   : (c.loss.kind == LossModel::Kind::squared) ? "squared"
                                                               : "power";
    if (c.loss.kind == LossModel::Kind::power) {
        loss["c1"] = c.loss.c1;
        loss["rho"] = c.loss.rho;
        loss["u0"] = c.loss.u0;
    }
    j["loss"] = loss;
    if (c.theta.uniform) j["theta"] = "uniform";
    else j["theta"] = c.theta.values;
    nlohmann::json lv;
    lv["beta"] = c.beta;
    if (c.beta0 > 0.0) lv["beta0"] = c.beta0;
    if (!c.beta0_candidates.empty()) {
        lv["beta0_candidates"] = c.beta0_candidates;
        lv["cv_folds"] = c.cv_folds;
    }
    j["levels"] = lv;
    if (!c.betas.empty()) j["betas"] = c.betas;
    j["sample_sizes"] = c.sample_sizes;
    j["replications"] = c.replications;
    j["seed"] = c.seed;
    if (!c.output.empty()) j["output"] = c.output;
    nlohmann::json b;
    b["kind"] = c.benchmark.kind == BenchmarkSpec::Kind::simulated ? "simulated" : "closed_form";
    b["samples"] = c.benchmark.samples;
    j["benchmark"] = b;
    if (c.kind == ExperimentKind::portfolio) {
        j["evaluation_samples"] = c.evaluation_samples;
        nlohmann::json o;
        o["step_size"] = c.optimizer.step_size;
        o["max_iters"] = c.optimizer.max_iters;
        o["grad_tolerance"] = c.optimizer.grad_tolerance;
        o["multi_starts"] = c.optimizer.multi_starts;
        o["sqrt_decay"] = c.optimizer.sqrt_decay;
        j["optimizer"] = o;
    }
    return j;
}

}  // namespace tailrisk
