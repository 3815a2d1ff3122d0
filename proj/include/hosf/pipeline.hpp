#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hosf/decomp.hpp"
#include "hosf/density.hpp"
#include "hosf/io.hpp"
#include "hosf/moments.hpp"
#include "hosf/poly.hpp"

namespace hosf {

/// Labels y = Σ_j link(u_j · x) with a polynomial link given by coefficients.
struct PlantedLabels
{
    std::vector<std::vector<double>> components;
    std::vector<double> link;  // link(s) = Σ_k link[k] s^k

    PolyFunction label_function(std::size_t d) const;
};

struct ExperimentConfig
{
    DensityModel model = DensityModel::standard_gaussian(1);
    /// Only for self-taught runs: law of the target inputs.
    std::optional<DensityModel> target_model;
    std::optional<PolyFunction> label_poly;
    std::optional<PlantedLabels> planted;
    double noise_sd = 0.1;
    std::size_t n_labeled = 1000;
    std::size_t n_unlabeled = 0;
    std::size_t order = 3;
    DecompConfig decomp;
    std::uint64_t seed = 0;
    bool exact_moments = false;
    bool whiten = false;
    std::string features = "identity";
    std::size_t workers = 0;

    /// Label function G; a zero function when no labels are planted.
    PolyFunction label_function() const;
    void validate() const;

    static ExperimentConfig from_json(Json const& j);
    Json to_json() const;
};

struct StageTiming
{
    std::string stage;
    double seconds = 0.0;
};

struct TransferSummary
{
    std::vector<double> source_weights;
    std::vector<double> refit_weights;
    double source_mean_loglik = 0.0;
    double target_mean_loglik = 0.0;
    bool low_likelihood = false;
};

struct PipelineReport
{
    std::size_t order = 0;
    std::size_t n_labeled = 0;
    bool exact_moments = false;
    double moment_se_max = 0.0;
    double moment_se_mean = 0.0;
    std::optional<SteinReport> stein;
    DecompositionResult decomposition;
    bool partial_decomposition = false;
    std::vector<double> recovery_errors;
    bool no_signal = false;
    std::optional<TransferSummary> transfer;
    DenseTensor moment;
    /// Wall-clock per stage; left out of the JSON report to keep it reproducible.
    std::vector<StageTiming> timings;
    /// Set on a partial report when a stage failed.
    std::optional<std::string> failed_stage;
    std::optional<std::string> error;

    double max_recovery_error() const;
    Json to_json() const;
    std::string summary() const;
};

/// A pipeline stage failed; `partial()` holds what the earlier stages produced.
class StageError : public Error
{
  public:
    StageError(std::string const& stage, std::string const& what, bool numeric, PipelineReport partial)
        : Error(stage + ": " + what), stage_(stage), numeric_(numeric), partial_(std::move(partial))
    {
    }
    std::string const& stage() const noexcept { return stage_; }
    bool numeric() const noexcept { return numeric_; }
    PipelineReport const& partial() const noexcept { return partial_; }

  private:
    std::string stage_;
    bool numeric_;
    PipelineReport partial_;
};

/// Low target likelihood is flagged when the per-sample gap exceeds this many nats.
inline constexpr double kLowLikelihoodGap = 1.0;

/// Inputs drawn from the model, labels G(x) + σ_y ε.
LabeledDataset synth_generate(ExperimentConfig const& cfg);

/// Unlabeled source inputs drawn from cfg.model.
SampleMatrix synth_unlabeled(ExperimentConfig const& cfg);

/// Score -> cross-moment -> (whiten) -> decompose -> recovery metrics.
PipelineReport run_pipeline(ExperimentConfig const& cfg);

/// Same stages on a given dataset and model.
PipelineReport run_pipeline_on(ExperimentConfig const& cfg,
                               DensityModel const& model,
                               LabeledDataset const* data);

/// Freeze the source mixture components, refit weights on target inputs, then run the pipeline.
PipelineReport selftaught_pipeline(SampleMatrix const& source_unlabeled,
                                   LabeledDataset const& target,
                                   ExperimentConfig const& cfg);

/// Min-over-sign distance after greedy matching by |<u, v>|; unmatched truths score 2.
std::vector<double> recovery_errors(std::vector<Component> const& estimated,
                                    std::vector<std::vector<double>> const& planted);

/// [σ(u_j · x)] for σ in identity, tanh, logistic, relu.
std::vector<double> extract_features(DecompositionResult const& components,
                                     std::span<double const> x,
                                     std::string const& sigma);

/// Write report.json, report.txt, components.json and moment.stn1 under `dir`.
void write_pipeline_outputs(PipelineReport const& report, std::filesystem::path const& dir);

}  // namespace hosf
