#include "hosf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "hosf/error.hpp"
#include "hosf/tensor_io.hpp"

namespace hosf {
namespace {

constexpr std::uint64_t kNoiseStream = 0x9E3779B97F4A7C15ULL;

char const* method_name(ExpectationMethod m)
{
    switch (m)
    {
        case ExpectationMethod::analytic: return "analytic";
        case ExpectationMethod::quadrature: return "quadrature";
        case ExpectationMethod::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

bool known_feature(std::string const& s)
{
    return s == "identity" || s == "tanh" || s == "logistic" || s == "relu";
}

std::vector<double> parse_link(Json const& j)
{
    if (j.is_string())
    {
        auto const name = j.get<std::string>();
        if (name == "cube")
            return {0.0, 0.0, 0.0, 1.0};
        if (name == "square")
            return {0.0, 0.0, 1.0};
        if (name == "linear")
            return {0.0, 1.0};
        throw FormatError("unknown link \"" + name + "\"");
    }
    try
    {
        return j.get<std::vector<double>>();
    }
    catch (Json::exception const& e)
    {
        throw FormatError(std::string("link: ") + e.what());
    }
}

template<class T>
T get_or(Json const& j, char const* key, T fallback)
{
    if (!j.contains(key))
        return fallback;
    try
    {
        return j.at(key).get<T>();
    }
    catch (Json::exception const& e)
    {
        throw FormatError(std::string("field \"") + key + "\": " + e.what());
    }
}

double dot(std::span<double const> a, std::span<double const> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double mean_loglik(DensityModel const& model, SampleMatrix const& x)
{
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i)
    {
        try
        {
            s += log_density(model, x.row(i)).value;
        }
        catch (DegeneratePointError const&)
        {
            s += std::log(kDensityFloor);
        }
    }
    return s / static_cast<double>(x.rows);
}

// Runs one stage with timing; library errors surface as StageError with the
// report built so far.
template<class F>
void run_stage(PipelineReport& report, char const* name, F&& body)
{
    auto const t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
        std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        report.timings.push_back({name, dt.count()});
    };
    try
    {
        body();
    }
    catch (StageError const&)
    {
        throw;
    }
    catch (ValidationError const& e)
    {
        finish();
        report.failed_stage = name;
        report.error = e.what();
        throw StageError(name, e.what(), false, report);
    }
    catch (NumericError const& e)
    {
        finish();
        report.failed_stage = name;
        report.error = e.what();
        throw StageError(name, e.what(), true, report);
    }
    finish();
}

DecompositionResult decompose_matrix(DenseTensor const& m, std::size_t k)
{
    DecompositionResult r;
    std::size_t const d = m.dim(0);
    auto pairs = matrix_decompose(m, std::min(k, d));
    DenseTensor fit({d, d});
    for (auto& p : pairs)
    {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                fit[i * d + j] += p.value * p.vector[i] * p.vector[j];
        r.components.push_back({p.value, std::move(p.vector)});
    }
    r.residual_fro = (m - fit).frobenius_norm();
    r.candidates_kept = r.components.size();
    return r;
}

DecompositionResult decompose_vector(DenseTensor const& v)
{
    DecompositionResult r;
    double const norm = v.frobenius_norm();
    r.candidates_kept = 1;
    if (norm == 0.0)
    {
        r.residual_fro = 0.0;
        r.candidates_kept = 0;
        return r;
    }
    Component c{norm, {}};
    for (double x : v.values())
        c.vector.push_back(x / norm);
    canonicalize(c, 1);
    r.components.push_back(std::move(c));
    return r;
}

}  // namespace

PolyFunction PlantedLabels::label_function(std::size_t d) const
{
    PolyFunction g = PolyFunction::constant(d, 0.0);
    for (auto const& u : components)
    {
        if (u.size() != d)
            throw ShapeError("planted component has the wrong dimension");
        for (std::size_t k = 0; k < link.size(); ++k)
            if (link[k] != 0.0)
                g = g + PolyFunction::power_of_linear(u, static_cast<unsigned>(k), link[k]);
    }
    return g;
}

PolyFunction ExperimentConfig::label_function() const
{
    if (label_poly)
        return *label_poly;
    if (planted)
        return planted->label_function(model.dim());
    return PolyFunction::constant(model.dim(), 0.0);
}

void ExperimentConfig::validate() const
{
    std::size_t const d = model.dim();
    if (order < 1 || order > 3)
        throw ValidationError("order must be 1, 2 or 3");
    if (n_labeled < 1)
        throw ValidationError("n_labeled must be positive");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
        throw ValidationError("noise_sd must be finite and non-negative");
    if (label_poly && planted)
        throw ValidationError("give either a label polynomial or planted components, not both");
    if (label_poly)
    {
        if (label_poly->input_dim() != d)
            throw ShapeError("label polynomial input dimension does not match the model");
        if (!label_poly->scalar_output())
            throw ValidationError("the pipeline needs scalar labels");
    }
    if (planted)
    {
        if (planted->link.size() > PolyFunction::kMaxDegree + 1)
            throw ValidationError("link degree above 6");
        for (auto const& u : planted->components)
        {
            if (u.size() != d)
                throw ShapeError("planted component has the wrong dimension");
            if (std::abs(std::sqrt(dot(u, u)) - 1.0) > 1e-9)
                throw ValidationError("planted components must have unit norm");
        }
    }
    if (target_model && target_model->dim() != d)
        throw ShapeError("target model dimension does not match the source model");
    if (!known_feature(features))
        throw ValidationError("unknown feature map \"" + features + "\"");
    decomp.validate();
}

ExperimentConfig ExperimentConfig::from_json(Json const& j)
{
    if (!j.is_object())
        throw FormatError("experiment config must be an object");
    if (!j.contains("model"))
        throw FormatError("missing field \"model\"");
    ExperimentConfig cfg;
    cfg.model = model_from_json(j.at("model"));
    if (j.contains("target_model"))
        cfg.target_model = model_from_json(j.at("target_model"));
    if (j.contains("labels"))
    {
        auto const& l = j.at("labels");
        auto const type = get_or<std::string>(l, "type", "");
        if (type == "poly")
        {
            if (!l.contains("g"))
                throw FormatError("poly labels need \"g\"");
            cfg.label_poly = poly_from_json(l.at("g"));
        }
        else if (type == "planted")
        {
            PlantedLabels p;
            p.components = get_or<std::vector<std::vector<double>>>(l, "components", {});
            p.link = l.contains("link") ? parse_link(l.at("link")) : std::vector<double>{0, 0, 0, 1};
            cfg.planted = std::move(p);
        }
        else if (type != "none")
        {
            throw FormatError("labels.type must be poly, planted or none");
        }
    }
    cfg.noise_sd = get_or(j, "noise_sd", cfg.noise_sd);
    cfg.n_labeled = get_or(j, "n_labeled", cfg.n_labeled);
    cfg.n_unlabeled = get_or(j, "n_unlabeled", cfg.n_unlabeled);
    cfg.order = get_or(j, "order", cfg.order);
    cfg.seed = get_or(j, "seed", cfg.seed);
    cfg.exact_moments = get_or(j, "exact_moments", cfg.exact_moments);
    cfg.whiten = get_or(j, "whiten", cfg.whiten);
    cfg.features = get_or(j, "features", cfg.features);
    cfg.workers = get_or(j, "workers", cfg.workers);

    cfg.decomp.seed = cfg.seed;
    cfg.decomp.workers = cfg.workers;
    cfg.decomp.k = cfg.planted && !cfg.planted->components.empty() ? cfg.planted->components.size() : 1;
    if (j.contains("decomp"))
    {
        auto const& dj = j.at("decomp");
        cfg.decomp.k = get_or(dj, "k", cfg.decomp.k);
        cfg.decomp.inits = get_or(dj, "inits", cfg.decomp.inits);
        cfg.decomp.iterations = get_or(dj, "iterations", cfg.decomp.iterations);
        cfg.decomp.nu = get_or(dj, "nu", cfg.decomp.nu);
        cfg.decomp.tol = get_or(dj, "tol", cfg.decomp.tol);
        cfg.decomp.seed = get_or(dj, "seed", cfg.decomp.seed);
        cfg.decomp.workers = get_or(dj, "workers", cfg.decomp.workers);
        auto const init = get_or<std::string>(dj, "init", "random");
        if (init == "random")
            cfg.decomp.init = InitMethod::random;
        else if (init == "svd")
            cfg.decomp.init = InitMethod::svd;
        else
            throw FormatError("decomp.init must be random or svd");
    }
    return cfg;
}

Json ExperimentConfig::to_json() const
{
    Json j;
    j["model"] = model_to_json(model);
    if (target_model)
        j["target_model"] = model_to_json(*target_model);
    if (label_poly)
        j["labels"] = {{"type", "poly"}, {"g", poly_to_json(*label_poly)}};
    else if (planted)
        j["labels"] = {{"type", "planted"}, {"components", planted->components}, {"link", planted->link}};
    j["noise_sd"] = noise_sd;
    j["n_labeled"] = n_labeled;
    j["n_unlabeled"] = n_unlabeled;
    j["order"] = order;
    j["seed"] = seed;
    j["exact_moments"] = exact_moments;
    j["whiten"] = whiten;
    j["features"] = features;
    j["workers"] = workers;
    j["decomp"] = {{"k", decomp.k},
                   {"inits", decomp.inits},
                   {"iterations", decomp.iterations},
                   {"nu", decomp.nu},
                   {"tol", decomp.tol},
                   {"seed", decomp.seed},
                   {"workers", decomp.workers},
                   {"init", decomp.init == InitMethod::svd ? "svd" : "random"}};
    return j;
}

//---------------------------------------------------------------------------//

double PipelineReport::max_recovery_error() const
{
    double m = 0.0;
    for (double e : recovery_errors)
        m = std::max(m, e);
    return m;
}

Json PipelineReport::to_json() const
{
    Json j;
    j["order"] = order;
    j["n_labeled"] = n_labeled;
    j["exact_moments"] = exact_moments;
    j["moment_se"] = {{"max", moment_se_max}, {"mean", moment_se_mean}};
    if (stein)
        j["stein"] = {{"oracle", method_name(stein->oracle)},
                      {"max_abs_gap", stein->max_abs_gap},
                      {"max_gap_in_se", std::isfinite(stein->max_gap_in_se) ? Json(stein->max_gap_in_se)
                                                                            : Json("inf")},
                      {"passes", stein->passes()}};
    j["decomposition"] = decomposition_to_json(decomposition);
    j["partial_decomposition"] = partial_decomposition;
    if (!recovery_errors.empty())
    {
        j["recovery_errors"] = recovery_errors;
        j["max_recovery_error"] = max_recovery_error();
    }
    j["no_signal"] = no_signal;
    if (transfer)
        j["transfer"] = {{"source_weights", transfer->source_weights},
                         {"refit_weights", transfer->refit_weights},
                         {"source_mean_loglik", transfer->source_mean_loglik},
                         {"target_mean_loglik", transfer->target_mean_loglik},
                         {"low_likelihood", transfer->low_likelihood}};
    if (failed_stage)
        j["failed_stage"] = *failed_stage;
    if (error)
        j["error"] = *error;
    return j;
}

std::string PipelineReport::summary() const
{
    std::ostringstream os;
    os.precision(6);
    os << "order " << order << ", n = " << n_labeled << (exact_moments ? " (exact moments)" : "") << "\n";
    if (!exact_moments)
        os << "moment standard error: max " << moment_se_max << ", mean " << moment_se_mean << "\n";
    if (stein)
        os << "stein gap: " << stein->max_abs_gap << " abs, " << stein->max_gap_in_se << " se ("
           << method_name(stein->oracle) << ", " << (stein->passes() ? "pass" : "fail") << ")\n";
    os << "components: " << decomposition.components.size()
       << (partial_decomposition ? " (partial)" : "") << ", residual " << decomposition.residual_fro << "\n";
    for (std::size_t i = 0; i < decomposition.components.size(); ++i)
        os << "  w" << i + 1 << " = " << decomposition.components[i].weight << "\n";
    if (!recovery_errors.empty())
        os << "max recovery error: " << max_recovery_error() << "\n";
    if (no_signal)
        os << "no signal: component weights are within noise\n";
    if (transfer)
    {
        os << "mean log-likelihood: source " << transfer->source_mean_loglik << ", target "
           << transfer->target_mean_loglik << "\n";
        if (transfer->low_likelihood)
            os << "warning: target inputs are poorly explained by the source components\n";
    }
    for (auto const& t : timings)
        os << "time " << t.stage << ": " << t.seconds << " s\n";
    if (failed_stage)
        os << "failed at " << *failed_stage << ": " << error.value_or("") << "\n";
    return os.str();
}

//---------------------------------------------------------------------------//

LabeledDataset synth_generate(ExperimentConfig const& cfg)
{
    cfg.validate();
    auto const& model = cfg.target_model ? *cfg.target_model : cfg.model;
    auto x = draw_samples(model, cfg.n_labeled, cfg.seed);
    return label_samples(std::move(x), cfg.label_function(), cfg.noise_sd, cfg.seed + kNoiseStream);
}

SampleMatrix synth_unlabeled(ExperimentConfig const& cfg)
{
    cfg.validate();
    return draw_samples(cfg.model, cfg.n_unlabeled, cfg.seed + 2 * kNoiseStream);
}

PipelineReport run_pipeline_on(ExperimentConfig const& cfg,
                               DensityModel const& model,
                               LabeledDataset const* data)
{
    cfg.validate();
    if (model.dim() != cfg.model.dim())
        throw ShapeError("pipeline model dimension does not match the config");
    if (!cfg.exact_moments)
    {
        if (data == nullptr)
            throw ValidationError("pipeline needs labeled data unless exact moments are requested");
        if (data->input_dim() != model.dim())
            throw ShapeError("dataset dimension does not match the model");
        if (data->label_dim() != 1)
            throw ValidationError("the pipeline needs scalar labels");
    }

    PipelineReport report;
    report.order = cfg.order;
    report.exact_moments = cfg.exact_moments;
    report.n_labeled = cfg.exact_moments ? 0 : data->size();
    ScoreOrder const m(cfg.order);
    auto const g = cfg.label_function();

    run_stage(report, "moment", [&] {
        if (cfg.exact_moments)
        {
            report.moment = expected_derivative(g, model, m, default_oracle(model));
            return;
        }
        auto est = cross_moment(*data, model, m, cfg.workers);
        double sum = 0.0;
        for (double s : est.std_error.values())
        {
            report.moment_se_max = std::max(report.moment_se_max, s);
            sum += s;
        }
        report.moment_se_mean = sum / static_cast<double>(est.std_error.size());
        report.moment = est.value;
        if (cfg.label_poly || cfg.planted)
        {
            // Stein check against the true label function when an oracle exists.
            std::optional<ExpectationMethod> oracle;
            try
            {
                oracle = default_oracle(model);
            }
            catch (UnsupportedError const&)
            {
            }
            if (oracle)
            {
                SteinReport s;
                s.lhs = std::move(est);
                s.oracle = *oracle;
                s.rhs = expected_derivative(g, model, m, *oracle);
                fill_gaps(s);
                report.stein = std::move(s);
            }
        }
    });

    run_stage(report, "decompose", [&] {
        auto const& t = report.moment;
        if (cfg.order == 1)
        {
            report.decomposition = decompose_vector(t);
        }
        else if (cfg.order == 2)
        {
            report.decomposition = decompose_matrix(t, cfg.decomp.k);
        }
        else
        {
            try
            {
                if (cfg.whiten)
                {
                    DenseTensor m2 = cfg.exact_moments
                                         ? expected_derivative(g, model, ScoreOrder(2), default_oracle(model))
                                         : cross_moment(*data, model, ScoreOrder(2), cfg.workers).value;
                    report.decomposition = decompose_whitened(t, m2, cfg.decomp);
                }
                else
                {
                    report.decomposition = decompose(t, cfg.decomp);
                }
            }
            catch (PartialResultError const& e)
            {
                report.decomposition = e.partial();
                report.partial_decomposition = true;
            }
        }
        if (cfg.order < 3 && report.decomposition.components.size() < cfg.decomp.k)
            report.partial_decomposition = true;
    });

    run_stage(report, "metrics", [&] {
        if (cfg.planted && !cfg.planted->components.empty())
            report.recovery_errors = recovery_errors(report.decomposition.components, cfg.planted->components);
        if (!cfg.exact_moments)
        {
            double wmax = 0.0;
            for (auto const& c : report.decomposition.components)
                wmax = std::max(wmax, std::abs(c.weight));
            report.no_signal = wmax < 5.0 * report.moment_se_max;
        }
    });
    return report;
}

PipelineReport run_pipeline(ExperimentConfig const& cfg)
{
    cfg.validate();
    if (cfg.exact_moments)
        return run_pipeline_on(cfg, cfg.model, nullptr);
    auto const data = synth_generate(cfg);
    return run_pipeline_on(cfg, cfg.model, &data);
}

PipelineReport selftaught_pipeline(SampleMatrix const& source_unlabeled,
                                   LabeledDataset const& target,
                                   ExperimentConfig const& cfg)
{
    cfg.validate();
    auto const* gmm = cfg.model.get_if<GaussianMixture>();
    if (gmm == nullptr)
        throw UnsupportedError("self-taught transfer needs a Gaussian mixture source model");
    if (source_unlabeled.rows == 0)
        throw ValidationError("self-taught transfer needs unlabeled source samples");
    if (source_unlabeled.cols != gmm->dim() || target.input_dim() != gmm->dim())
        throw ShapeError("sample dimension does not match the source model");

    TransferSummary tr;
    tr.source_weights = gmm->weights();
    tr.source_mean_loglik = mean_loglik(cfg.model, source_unlabeled);
    tr.refit_weights = selftaught_refit_weights(*gmm, target.x);
    auto const transferred = DensityModel::mixture(gmm->with_weights(tr.refit_weights));
    tr.target_mean_loglik = mean_loglik(transferred, target.x);
    tr.low_likelihood = tr.source_mean_loglik - tr.target_mean_loglik > kLowLikelihoodGap;

    ExperimentConfig run = cfg;
    run.exact_moments = false;
    try
    {
        auto report = run_pipeline_on(run, transferred, &target);
        report.transfer = std::move(tr);
        return report;
    }
    catch (StageError const& e)
    {
        auto partial = e.partial();
        partial.transfer = tr;
        throw StageError(e.stage(), e.partial().error.value_or(e.what()), e.numeric(), std::move(partial));
    }
}

std::vector<double> recovery_errors(std::vector<Component> const& estimated,
                                    std::vector<std::vector<double>> const& planted)
{
    struct Pair
    {
        double overlap;
        std::size_t est;
        std::size_t truth;
    };
    std::vector<Pair> pairs;
    for (std::size_t e = 0; e < estimated.size(); ++e)
        for (std::size_t t = 0; t < planted.size(); ++t)
        {
            if (estimated[e].vector.size() != planted[t].size())
                throw ShapeError("recovery_errors: dimension mismatch");
            pairs.push_back({std::abs(dot(estimated[e].vector, planted[t])), e, t});
        }
    std::stable_sort(pairs.begin(), pairs.end(), [](Pair const& a, Pair const& b) {
        return a.overlap > b.overlap;
    });
    std::vector<double> err(planted.size(), 2.0);
    std::vector<bool> used_est(estimated.size(), false);
    std::vector<bool> used_truth(planted.size(), false);
    for (auto const& p : pairs)
    {
        if (used_est[p.est] || used_truth[p.truth])
            continue;
        used_est[p.est] = used_truth[p.truth] = true;
        auto const& v = estimated[p.est].vector;
        auto const& u = planted[p.truth];
        double plus = 0.0;
        double minus = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
        {
            plus += (v[i] - u[i]) * (v[i] - u[i]);
            minus += (v[i] + u[i]) * (v[i] + u[i]);
        }
        err[p.truth] = std::sqrt(std::min(plus, minus));
    }
    return err;
}

std::vector<double> extract_features(DecompositionResult const& components,
                                     std::span<double const> x,
                                     std::string const& sigma)
{
    if (!known_feature(sigma))
        throw ValidationError("unknown feature map \"" + sigma + "\"");
    std::vector<double> out;
    out.reserve(components.components.size());
    for (auto const& c : components.components)
    {
        if (c.vector.size() != x.size())
            throw ShapeError("extract_features: input dimension does not match the components");
        double const s = dot(c.vector, x);
        if (sigma == "identity")
            out.push_back(s);
        else if (sigma == "tanh")
            out.push_back(std::tanh(s));
        else if (sigma == "logistic")
            out.push_back(1.0 / (1.0 + std::exp(-s)));
        else
            out.push_back(std::max(s, 0.0));
    }
    return out;
}

void write_pipeline_outputs(PipelineReport const& report, std::filesystem::path const& dir)
{
    std::filesystem::create_directories(dir);
    save_json(dir / "report.json", report.to_json());
    save_text(dir / "report.txt", report.summary());
    save_json(dir / "components.json", decomposition_to_json(report.decomposition));
    if (report.moment.size() > 0)
        save_stn1(dir / "moment.stn1", report.moment);
}

}  // namespace hosf
