#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tailrisk/harness.hpp"

namespace tailrisk {

namespace detail {

// Stream tags keep the dedicated RNG streams (benchmark, reference,
// cross-validation, cells) disjoint from each other.
inline constexpr std::uint64_t kBenchmarkTag = 0xBE5C000000000001ULL;
inline constexpr std::uint64_t kReferenceTag = 0xBE5C000000000002ULL;
inline constexpr std::uint64_t kSelectTag = 0xBE5C000000000003ULL;
inline constexpr std::uint64_t kCellTag = 0xBE5C000000000004ULL;
inline constexpr std::uint64_t kStartTag = 0xBE5C000000000005ULL;

/// A runnable model: a parametric sampler or an ingested CSV table.
class BuiltModel {
public:
    using Variant = std::variant<ParetoModel, TCopulaParetoModel, Matrix>;

    explicit BuiltModel(Variant v) : v_(std::move(v)) {}

    std::size_t dim() const {
        return std::visit(
            [](const auto& m) -> std::size_t {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, Matrix>) return m.cols();
                else return m.dim();
            },
            v_);
    }

    bool has_pdf() const { return !std::holds_alternative<Matrix>(v_); }
    bool is_csv() const { return std::holds_alternative<Matrix>(v_); }
    const Matrix& csv_data() const { return std::get<Matrix>(v_); }
    const ParetoModel* pareto() const { return std::get_if<ParetoModel>(&v_); }
    const TCopulaParetoModel* t_copula() const { return std::get_if<TCopulaParetoModel>(&v_); }

    /// n rows: a fresh model sample, or a seeded contiguous window of the CSV
    /// table (the ingestion analog of resampling historical windows).
    Matrix sample(std::size_t n, std::uint64_t stream) const {
        if (const auto* m = std::get_if<ParetoModel>(&v_)) return sample_matrix(*m, n, stream);
        if (const auto* m = std::get_if<TCopulaParetoModel>(&v_)) return sample_matrix(*m, n, stream);
        const Matrix& full = std::get<Matrix>(v_);
        if (n > full.rows())
            throw ConfigError("csv model: requested sample size exceeds the table rows");
        Rng rng(stream);
        const std::size_t start =
            static_cast<std::size_t>(rng.next_u64() % (full.rows() - n + 1));
        Matrix out(n, full.cols());
        for (std::size_t i = 0; i < n; ++i) {
            const auto src = full.row(start + i);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    void sample_row(Rng& rng, std::span<double> out) const {
        if (const auto* m = std::get_if<ParetoModel>(&v_)) return m->sample_row(rng, out);
        if (const auto* m = std::get_if<TCopulaParetoModel>(&v_)) return m->sample_row(rng, out);
        throw ConfigError("csv model has no sampler");
    }

private:
    Variant v_;
};

inline Matrix build_correlation(const ModelSpec& spec) {
    const std::size_t d = spec.d;
    if (spec.correlation) {
        if (spec.correlation->rows() != d)
            throw ConfigError("model.correlation dimension does not match alphas");
        return *spec.correlation;
    }
    Matrix r(d, d, 0.0);
    const double rho = spec.equicorrelation.value_or(0.0);
    if (!(rho < 1.0) || (d > 1 && !(rho > -1.0 / static_cast<double>(d - 1))))
        throw ConfigError("model.equicorrelation out of the positive-definite range");
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) r(i, j) = (i == j) ? 1.0 : rho;
    return r;
}

inline BuiltModel build_model(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelSpec::Kind::pareto:
            return BuiltModel(ParetoModel(TailIndexVector(spec.alphas), spec.scales));
        case ModelSpec::Kind::t_copula_pareto:
            return BuiltModel(TCopulaParetoModel(build_correlation(spec), spec.dof,
                                                 TailIndexVector(spec.alphas), spec.scales));
        case ModelSpec::Kind::csv:
            return BuiltModel(load_returns_csv(spec.path));
    }
    throw ConfigError("unknown model kind");
}

/// Paper defaults for the base level: 20*beta for linear growth, 8*beta for
/// squared, 0.1 for portfolio runs; capped below 1.
inline double default_beta0(const ExperimentConfig& c) {
    if (c.kind == ExperimentKind::portfolio || c.kind == ExperimentKind::variance_study) return 0.1;
    const double mult = (c.loss.kind == LossModel::Kind::squared) ? 8.0 : 20.0;
    return std::min(mult * c.beta, 0.5);
}

inline double resolve_beta0(const ExperimentConfig& c, const BuiltModel& model,
                            const std::vector<double>& theta, const LossModel& loss) {
    if (!c.beta0_candidates.empty()) {
        const std::size_t n_sel =
            *std::max_element(c.sample_sizes.begin(), c.sample_sizes.end());
        const Matrix sel = model.sample(model.is_csv() ? std::min(n_sel, model.csv_data().rows())
                                                       : n_sel,
                                        derive_stream(c.seed, kSelectTag));
        ExtrapolationConfig ec{TailLevels(c.beta, c.beta0_candidates.back()),
                               c.beta0_candidates, c.cv_folds};
        return select_beta0(sel, theta, loss, c.beta, ec, derive_stream(c.seed, kSelectTag, 1));
    }
    if (c.beta0 > 0.0) {
        if (!(c.beta0 >= c.beta) || !(c.beta0 < 1.0))
            throw ConfigError("levels.beta0 must satisfy beta <= beta0 < 1");
        return c.beta0;
    }
    return default_beta0(c);
}

struct BenchmarkValues {
    double cvar = 0.0;
    std::vector<double> gradient;
};

/// Benchmark estimates from N1 streamed samples (two passes over the same
/// stream keep memory at O(N1) scalars), or closed forms for the
/// one-dimensional Pareto model.
inline BenchmarkValues compute_benchmark(const ExperimentConfig& c, const BuiltModel& model,
                                         const std::vector<double>& theta, const LossModel& loss) {
    BenchmarkValues out;
    if (c.benchmark.kind == BenchmarkSpec::Kind::closed_form) {
        if (!model.pareto() || model.dim() != 1)
            throw ConfigError("benchmark.kind=closed_form requires the 1-d pareto model");
        const double alpha = model.pareto()->alphas.alphas[0];
        const double scale_eff = theta[0] * model.pareto()->scale[0];
        if (c.loss.kind == LossModel::Kind::linear) {
            out.cvar = scale_eff * pareto_cvar_closed_form(alpha, c.beta);
            out.gradient = {out.cvar / theta[0]};
        } else if (c.loss.kind == LossModel::Kind::squared) {
            out.cvar = scale_eff * scale_eff * pareto_cvar_closed_form(alpha / 2.0, c.beta);
            out.gradient = {2.0 * out.cvar / theta[0]};
        } else {
            throw ConfigError("benchmark.kind=closed_form supports linear and squared losses");
        }
        return out;
    }
    if (model.is_csv()) {
        const Matrix& full = model.csv_data();
        const auto ls = compute_loss_sample(full, theta, loss);
        out.cvar = sa_cvar(ls.losses, c.beta);
        out.gradient = sa_cvar_gradient(full, theta, loss, c.beta);
        return out;
    }

    const std::size_t n1 = c.benchmark.samples;
    const std::uint64_t stream = derive_stream(c.seed, kBenchmarkTag);
    const std::size_t d = model.dim();
    std::vector<double> losses(n1);
    std::vector<double> row(d);
    {
        Rng rng(stream);
        for (std::size_t i = 0; i < n1; ++i) {
            model.sample_row(rng, row);
            losses[i] = loss.eval(dot(theta, row));
        }
    }
    const double v = sa_var(losses, c.beta);
    double excess = 0.0;
    for (double l : losses)
        if (l > v) excess += l - v;
    out.cvar = v + excess / (static_cast<double>(n1) * c.beta);

    out.gradient.assign(d, 0.0);
    {
        Rng rng(stream);  // same stream: pass 2 regenerates the same draws
        for (std::size_t i = 0; i < n1; ++i) {
            model.sample_row(rng, row);
            if (losses[i] >= v) {
                const double lder = loss.deriv(dot(theta, row));
                for (std::size_t k = 0; k < d; ++k) out.gradient[k] += lder * row[k];
            }
        }
        const double denom = static_cast<double>(n1) * c.beta;
        for (double& g : out.gradient) g /= denom;
    }
    return out;
}

inline void aggregate(BenchmarkCell& cell) {
    const auto& raw = cell.raw;
    cell.replications = raw.size();
    if (raw.empty()) {
        cell.rmse = cell.mean = cell.variance = 0.0;
        return;
    }
    double sq = 0.0, mean = 0.0;
    for (double e : raw) {
        sq += e * e;
        mean += e;
    }
    cell.rmse = std::sqrt(sq / static_cast<double>(raw.size()));
    cell.mean = mean / static_cast<double>(raw.size());
    double var = 0.0;
    for (double e : raw) var += (e - cell.mean) * (e - cell.mean);
    cell.variance = raw.size() > 1 ? var / static_cast<double>(raw.size() - 1) : 0.0;
}
}  // namespace detail

/// RMSE-vs-n comparison of the naive sample-average estimator at beta against
/// the extrapolated estimator based at beta0, both scored against one shared
/// benchmark. Cells aggregate per-replication relative errors
/// (signed for CVaR, inf-norm for gradients).
inline BenchmarkResult run_rmse_benchmark(const ExperimentConfig& c) {
    if (c.kind != ExperimentKind::rmse_cvar && c.kind != ExperimentKind::rmse_gradient)
        throw ConfigError("run_rmse_benchmark requires experiment = rmse_cvar | rmse_gradient");
    const auto model = detail::build_model(c.model);
    const auto loss = c.loss.build();
    const auto theta = c.theta.resolve(model.dim());
    const double beta0 = detail::resolve_beta0(c, model, theta, loss);
    const TailLevels levels(c.beta, beta0);
    const bool grad = (c.kind == ExperimentKind::rmse_gradient);

    const auto bench = detail::compute_benchmark(c, model, theta, loss);
    const double bench_norm = grad ? detail::inf_norm(bench.gradient) : std::abs(bench.cvar);
    if (!(bench_norm > 0.0)) throw ConfigError("benchmark value is zero; relative errors undefined");

    BenchmarkResult result;
    result.config = c;
    result.config.model.d = model.dim();
    result.benchmark_value = grad ? bench_norm : bench.cvar;
    result.resolved_beta0 = beta0;

    for (std::size_t ni = 0; ni < c.sample_sizes.size(); ++ni) {
        const std::size_t n = c.sample_sizes[ni];
        BenchmarkCell sa_cell{c.beta, beta0, n, "sample_average", 0, 0, 0, 0, {}, {}};
        BenchmarkCell ex_cell{c.beta, beta0, n, "extrapolated", 0, 0, 0, 0, {}, {}};
        const auto k_hill = static_cast<std::size_t>(std::floor(static_cast<double>(n) * beta0));
        const bool ext_feasible = k_hill >= 1 && k_hill < n;
        if (!ext_feasible) ex_cell.note = "infeasible: floor(n*beta0) outside [1, n)";
        std::size_t failures = 0;
        for (std::size_t r = 0; r < c.replications; ++r) {
            const Matrix x =
                model.sample(n, derive_stream(c.seed, detail::kCellTag + ni, r));
            if (grad) {
                const auto g_sa = sa_cvar_gradient(x, theta, loss, c.beta);
                std::vector<double> e(g_sa.size());
                for (std::size_t k = 0; k < e.size(); ++k) e[k] = g_sa[k] - bench.gradient[k];
                sa_cell.raw.push_back(detail::inf_norm(e) / bench_norm);
            } else {
                const auto ls = compute_loss_sample(x, theta, loss);
                sa_cell.raw.push_back((sa_cvar(ls.losses, c.beta) - bench.cvar) / bench.cvar);
            }
            if (!ext_feasible) continue;
            try {
                const auto rep = estimate_extrapolated(x, theta, loss, levels);
                if (grad) {
                    std::vector<double> e(rep.gradient->size());
                    for (std::size_t k = 0; k < e.size(); ++k)
                        e[k] = (*rep.gradient)[k] - bench.gradient[k];
                    ex_cell.raw.push_back(detail::inf_norm(e) / bench_norm);
                } else {
                    ex_cell.raw.push_back((rep.cvar - bench.cvar) / bench.cvar);
                }
            } catch (const std::exception&) {
                ++failures;  // e.g. Hill positivity on a degenerate window
            }
        }
        if (failures > 0) {
            std::ostringstream msg;
            msg << failures << " replication(s) failed";
            ex_cell.note = msg.str();
        }
        detail::aggregate(sa_cell);
        detail::aggregate(ex_cell);
        result.cells.push_back(std::move(sa_cell));
        result.cells.push_back(std::move(ex_cell));
    }
    return result;
}

/// Paired-seed variance comparison of the IS estimator against the naive
/// sample average across the configured (beta, n) grid. Cell means and
/// variances are of the estimates themselves; the ratio cell carries
/// Var(IS)/Var(SA).
inline BenchmarkResult run_variance_study(const ExperimentConfig& c) {
    if (c.kind != ExperimentKind::variance_study)
        throw ConfigError("run_variance_study requires experiment = variance_study");
    const auto model = detail::build_model(c.model);
    if (!model.has_pdf())
        throw ConfigError("variance_study requires a model with a density oracle; csv has none");
    const auto loss = c.loss.build();
    const auto theta = c.theta.resolve(model.dim());
    const double beta0 = c.beta0 > 0.0 ? c.beta0 : 0.1;

    BenchmarkResult result;
    result.config = c;
    result.config.model.d = model.dim();
    result.resolved_beta0 = beta0;
    const std::vector<double> betas = c.betas.empty() ? std::vector<double>{c.beta} : c.betas;

    std::size_t cell_id = 0;
    for (const double beta : betas) {
        const TailLevels levels(beta, beta0);
        for (const std::size_t n : c.sample_sizes) {
            const std::uint64_t stream = derive_stream(c.seed, detail::kCellTag + cell_id);
            VarianceStudyResult vs;
            if (const auto* m = model.pareto())
                vs = is_variance_study(*m, theta, loss, levels, n, c.replications, stream);
            else
                vs = is_variance_study(*model.t_copula(), theta, loss, levels, n, c.replications,
                                       stream);
            BenchmarkCell sa_cell{beta, beta0, n, "sample_average", 0, 0, 0, 0, vs.raw_sa, {}};
            BenchmarkCell is_cell{beta, beta0, n, "importance_sampling", 0, 0, 0, 0, vs.raw_is, {}};
            detail::aggregate(sa_cell);
            detail::aggregate(is_cell);
            sa_cell.rmse = 0.0;  // no benchmark in this experiment; variance is the object
            is_cell.rmse = 0.0;
            BenchmarkCell ratio_cell{beta, beta0, n, "variance_ratio", c.replications,
                                     0.0, vs.ratio, 0.0, {}, {}};
            result.cells.push_back(std::move(sa_cell));
            result.cells.push_back(std::move(is_cell));
            result.cells.push_back(std::move(ratio_cell));
            ++cell_id;
        }
    }
    return result;
}

/// Portfolio optimization error curves: optimize on n-row training samples
/// with each gradient method, evaluate the weights on a large reference
/// sample, and report relative optimality gaps against the multi-start
/// reference optimum V*.
inline BenchmarkResult run_portfolio_experiment(const ExperimentConfig& c) {
    if (c.kind != ExperimentKind::portfolio)
        throw ConfigError("run_portfolio_experiment requires experiment = portfolio");
    const auto model = detail::build_model(c.model);
    if (c.loss.kind != LossModel::Kind::linear)
        throw ConfigError("portfolio requires the linear loss");
    const auto loss = c.loss.build();
    const std::size_t d = model.dim();
    if (d < 2) throw ConfigError("portfolio requires d >= 2");
    const double beta0 = detail::resolve_beta0(c, model, c.theta.resolve(d), loss);
    const TailLevels levels(c.beta, beta0);

    const Matrix reference =
        model.is_csv() ? model.csv_data()
                       : model.sample(c.evaluation_samples, derive_stream(c.seed, detail::kReferenceTag));

    auto make_config = [&](std::uint64_t start_seed, bool random_start) {
        OptimizerConfig oc;
        oc.step_size = c.optimizer.step_size;
        oc.max_iters = c.optimizer.max_iters;
        oc.grad_tolerance = c.optimizer.grad_tolerance;
        oc.sqrt_decay = c.optimizer.sqrt_decay;
        oc.seed = start_seed;
        oc.random_start = random_start;
        return oc;
    };

    // Reference optimum V*: multi-start projected descent with SA gradients.
    double v_star = 0.0;
    {
        PortfolioProblem ref_problem{reference, c.beta, loss, Method::sample_average, levels};
        bool first = true;
        for (std::size_t s = 0; s < std::max<std::size_t>(c.optimizer.multi_starts, 1); ++s) {
            const auto res = minimize_cvar(
                ref_problem, make_config(derive_stream(c.seed, detail::kStartTag, s), s > 0));
            const double v = evaluate_solution(res.theta_star, reference, c.beta);
            if (first || v < v_star) v_star = v;
            first = false;
        }
    }
    if (!(v_star > 0.0)) throw ConfigError("portfolio reference optimum is not positive");

    BenchmarkResult result;
    result.config = c;
    result.config.model.d = d;
    result.benchmark_value = v_star;
    result.resolved_beta0 = beta0;

    for (std::size_t ni = 0; ni < c.sample_sizes.size(); ++ni) {
        const std::size_t n = c.sample_sizes[ni];
        BenchmarkCell sa_cell{c.beta, beta0, n, "sample_average", 0, 0, 0, 0, {}, {}};
        BenchmarkCell ex_cell{c.beta, beta0, n, "extrapolated", 0, 0, 0, 0, {}, {}};
        std::size_t failures = 0;
        for (std::size_t r = 0; r < c.replications; ++r) {
            const Matrix train = model.sample(n, derive_stream(c.seed, detail::kCellTag + ni, r));
            for (BenchmarkCell* cell : {&sa_cell, &ex_cell}) {
                const Method method = (cell == &sa_cell) ? Method::sample_average
                                                         : Method::extrapolated;
                try {
                    PortfolioProblem prob{train, c.beta, loss, method, levels};
                    const auto res = minimize_cvar(prob, make_config(0, false));
                    const double v = evaluate_solution(res.theta_star, reference, c.beta);
                    cell->raw.push_back(std::abs(v - v_star) / v_star);
                } catch (const std::exception&) {
                    ++failures;
                }
            }
        }
        if (failures > 0) {
            std::ostringstream msg;
            msg << failures << " optimization(s) failed";
            ex_cell.note = msg.str();
        }
        detail::aggregate(sa_cell);
        detail::aggregate(ex_cell);
        result.cells.push_back(std::move(sa_cell));
        result.cells.push_back(std::move(ex_cell));
    }
    return result;
}

/// Dispatch on the config's experiment kind.
inline BenchmarkResult run_experiment(const ExperimentConfig& c) {
    switch (c.kind) {
        case ExperimentKind::rmse_cvar:
        case ExperimentKind::rmse_gradient: return run_rmse_benchmark(c);
        case ExperimentKind::variance_study: return run_variance_study(c);
        case ExperimentKind::portfolio: return run_portfolio_experiment(c);
    }
    throw ConfigError("unknown experiment kind");
}

/// Writes one CSV row per cell (stable column order) plus a sibling .json
/// file echoing the full config. Deterministic: identical inputs emit
/// byte-identical files.
inline void emit_results(const BenchmarkResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CsvError(CsvError::Kind::io, "cannot open output file: " + path);
    out << "experiment,model,d,loss,beta,beta0,n,method,replications,rmse,mean,variance,seed\n";
    const auto& c = result.config;
    const std::string model_name = c.model.name();
    const std::string loss_name = c.loss.build().name();
    const std::size_t d = c.model.d;
    for (const auto& cell : result.cells) {
        out << experiment_name(c.kind) << ',' << model_name << ',' << d << ',' << loss_name << ','
            << format_double(cell.beta) << ',' << format_double(cell.beta0) << ',' << cell.n << ','
            << cell.method << ',' << cell.replications << ',' << format_double(cell.rmse) << ','
            << format_double(cell.mean) << ',' << format_double(cell.variance) << ',' << c.seed
            << '\n';
    }
    if (!out) throw CsvError(CsvError::Kind::io, "failed writing output file: " + path);
    out.close();

    std::filesystem::path sidecar(path);
    sidecar.replace_extension(".json");
    std::ofstream js(sidecar, std::ios::binary);
    if (!js) throw CsvError(CsvError::Kind::io, "cannot open sidecar file: " + sidecar.string());
    js << experiment_config_to_json(c).dump(2) << '\n';
    if (!js) throw CsvError(CsvError::Kind::io, "failed writing sidecar file: " + sidecar.string());
}

}  // namespace tailrisk
