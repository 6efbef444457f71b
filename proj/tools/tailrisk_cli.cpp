// Command-line front end: single estimates, RMSE comparisons, variance
// studies and portfolio experiments driven by JSON configs.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tailrisk/tailrisk.hpp"

namespace {

using namespace tailrisk;

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("cannot parse number list: " + csv);
        }
    }
    if (out.empty()) throw ConfigError("empty number list");
    return out;
}

struct EstimateOptions {
    std::string csv_path;
    std::string model = "pareto";
    std::string alphas;
    std::string scales;
    double dof = 4.0;
    double equicorrelation = 0.0;
    std::size_t d = 0;
    std::size_t n = 10000;
    double beta = 0.01;
    double beta0 = 0.0;
    std::string method = "sample_average";
    std::string theta = "uniform";
    std::string loss = "linear";
    double c1 = 1.0;
    double rho = 0.0;
    double u0 = 0.0;
    std::uint64_t seed = 1;
};

nlohmann::json report_to_json(const EstimateReport& rep) {
    nlohmann::json j;
    j["var"] = rep.var;
    j["cvar"] = rep.cvar;
    if (rep.gradient) j["gradient"] = *rep.gradient;
    if (rep.xi_hat) j["xi_hat"] = *rep.xi_hat;
    j["method"] = method_name(rep.method);
    j["beta"] = rep.levels.beta;
    j["beta0"] = rep.levels.beta0;
    j["n"] = rep.n;
    return j;
}

LossModel build_loss(const EstimateOptions& o) {
    if (o.loss == "linear") return LossModel::linear();
    if (o.loss == "squared") return LossModel::squared();
    if (o.loss == "power") return LossModel::power(o.c1, o.rho, o.u0);
    throw ConfigError("--loss must be linear | squared | power");
}

int run_estimate(const EstimateOptions& o, const std::string& out_path) {
    const LossModel loss = build_loss(o);

    std::optional<detail::BuiltModel> model;
    Matrix samples;
    if (!o.csv_path.empty()) {
        samples = load_returns_csv(o.csv_path);
    } else {
        if (o.alphas.empty()) throw ConfigError("estimate needs --csv or --alphas");
        ModelSpec spec;
        spec.kind = o.model == "pareto"            ? ModelSpec::Kind::pareto
                    : o.model == "t_copula_pareto" ? ModelSpec::Kind::t_copula_pareto
                                                   : throw ConfigError(
                                                         "--model must be pareto | t_copula_pareto");
        spec.alphas = parse_double_list(o.alphas);
        if (o.d > 0 && spec.alphas.size() == 1) spec.alphas.assign(o.d, spec.alphas[0]);
        spec.d = spec.alphas.size();
        if (!o.scales.empty()) spec.scales = parse_double_list(o.scales);
        spec.dof = o.dof;
        if (o.equicorrelation != 0.0) spec.equicorrelation = o.equicorrelation;
        model.emplace(detail::build_model(spec));
        samples = model->sample(o.n, o.seed);
    }

    std::vector<double> theta;
    if (o.theta == "uniform")
        theta.assign(samples.cols(), 1.0 / static_cast<double>(samples.cols()));
    else
        theta = parse_double_list(o.theta);
    if (theta.size() != samples.cols()) throw ConfigError("--theta dimension mismatch");

    const double beta0 = o.beta0 > 0.0 ? o.beta0 : o.beta;
    const TailLevels levels(o.beta, beta0);

    EstimateReport rep;
    if (o.method == "sample_average") {
        rep = estimate_sample_average(samples, theta, loss, o.beta);
    } else if (o.method == "extrapolated") {
        rep = estimate_extrapolated(samples, theta, loss, levels);
    } else if (o.method == "importance_sampling") {
        if (!model)
            throw ConfigError("importance_sampling needs a model spec (the CSV path has no density)");
        WeightedLossSample ws;
        if (const auto* m = model->pareto())
            ws = is_weighted_sample(*m, theta, loss, o.n, levels, o.seed);
        else
            ws = is_weighted_sample(*model->t_copula(), theta, loss, o.n, levels, o.seed);
        rep = is_cvar(ws, levels);
    } else {
        throw ConfigError("--method must be sample_average | importance_sampling | extrapolated");
    }

    const std::string text = report_to_json(rep).dump(2);
    std::cout << text << '\n';
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw CsvError(CsvError::Kind::io, "cannot open output file: " + out_path);
        out << text << '\n';
    }
    return 0;
}

int run_config_experiment(const std::string& config_path, const std::string& out_path,
                          std::optional<std::uint64_t> seed_override,
                          std::optional<ExperimentKind> required_kind) {
    if (config_path.empty()) throw ConfigError("this subcommand requires --config <file.json>");
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (required_kind && cfg.kind != *required_kind &&
        !(*required_kind == ExperimentKind::rmse_cvar &&
          cfg.kind == ExperimentKind::rmse_gradient))
        throw ConfigError("config experiment kind does not match the subcommand");
    if (seed_override) cfg.seed = *seed_override;
    if (!out_path.empty()) cfg.output = out_path;

    const BenchmarkResult result = run_experiment(cfg);
    if (!cfg.output.empty()) {
        emit_results(result, cfg.output);
        std::cout << "wrote " << cfg.output << " (" << result.cells.size() << " cells)\n";
    } else {
        std::cout << "experiment=" << experiment_name(cfg.kind)
                  << " beta0=" << format_double(result.resolved_beta0) << '\n';
        for (const auto& cell : result.cells)
            std::cout << "n=" << cell.n << " beta=" << format_double(cell.beta) << " "
                      << cell.method << ": rmse=" << format_double(cell.rmse)
                      << " mean=" << format_double(cell.mean)
                      << " variance=" << format_double(cell.variance) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CVaR estimation in heavy tails: sample average, importance sampling and "
                 "tail extrapolation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::uint64_t seed_flag = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "JSON experiment config")->expected(1);
    app.add_option("--out", out_path, "output path (CSV for experiments, JSON for estimate)");
    app.add_option("--seed", seed_flag, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    EstimateOptions eo;
    auto* est = app.add_subcommand("estimate", "one estimate from a CSV file or a model spec");
    est->add_option("--csv", eo.csv_path, "input CSV of observations (rows = samples)");
    est->add_option("--model", eo.model, "pareto | t_copula_pareto");
    est->add_option("--alphas", eo.alphas, "comma-separated tail indices (or one value with --d)");
    est->add_option("--scales", eo.scales, "comma-separated scales (default 1)");
    est->add_option("--dof", eo.dof, "t-copula degrees of freedom");
    est->add_option("--equicorrelation", eo.equicorrelation, "t-copula equicorrelation");
    est->add_option("--d", eo.d, "dimension when --alphas is a single value");
    est->add_option("--n", eo.n, "sample size for model draws");
    est->add_option("--beta", eo.beta, "target tail probability")->required();
    est->add_option("--beta0", eo.beta0, "base tail probability (default: beta)");
    est->add_option("--method", eo.method,
                    "sample_average | importance_sampling | extrapolated");
    est->add_option("--theta", eo.theta, "comma-separated weights or 'uniform'");
    est->add_option("--loss", eo.loss, "linear | squared | power");
    est->add_option("--c1", eo.c1, "power loss c1");
    est->add_option("--rho", eo.rho, "power loss rho");
    est->add_option("--u0", eo.u0, "power loss threshold u0");
    est->add_option("--seed", eo.seed, "sampling seed");

    auto* cmp = app.add_subcommand("compare", "RMSE benchmark (rmse_cvar | rmse_gradient config)");
    auto* var = app.add_subcommand("variance", "IS-vs-SA variance study");
    auto* opt = app.add_subcommand("optimize", "portfolio optimization error curves");
    std::string bench_config;
    auto* bench = app.add_subcommand("bench", "run whatever experiment a config file names");
    bench->add_option("config", bench_config, "JSON experiment config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) std::cerr << "error: usage: " << e.what() << '\n';
        return app.exit(e);
    }

    try {
        const std::optional<std::uint64_t> seed_override =
            seed_given ? std::optional<std::uint64_t>(seed_flag) : std::nullopt;
        if (est->parsed()) {
            if (seed_override) eo.seed = *seed_override;
            return run_estimate(eo, out_path);
        }
        if (cmp->parsed())
            return run_config_experiment(config_path, out_path, seed_override,
                                         ExperimentKind::rmse_cvar);
        if (var->parsed())
            return run_config_experiment(config_path, out_path, seed_override,
                                         ExperimentKind::variance_study);
        if (opt->parsed())
            return run_config_experiment(config_path, out_path, seed_override,
                                         ExperimentKind::portfolio);
        if (bench->parsed())
            return run_config_experiment(bench_config, out_path, seed_override, std::nullopt);
        std::cerr << "error: usage: no subcommand\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 3;
    } catch (const CsvError& e) {
        std::cerr << "error: " << (e.kind() == CsvError::Kind::io ? "io" : "data") << ": "
                  << e.what() << '\n';
        return 4;
    } catch (const std::domain_error& e) {
        std::cerr << "error: domain: " << e.what() << '\n';
        return 5;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: domain: " << e.what() << '\n';
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
}
