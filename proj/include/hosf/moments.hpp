#pragma once

#include <cstddef>
#include <cstdint>

#include "hosf/density.hpp"
#include "hosf/poly.hpp"
#include "hosf/samples.hpp"
#include "hosf/tensor.hpp"

namespace hosf {

/// Paired inputs X (N x d) and labels Y (N x p).
struct LabeledDataset
{
    SampleMatrix x;
    SampleMatrix y;

    LabeledDataset() = default;
    /// Throws ValidationError on row mismatch, empty data or non-finite values.
    LabeledDataset(SampleMatrix inputs, SampleMatrix labels);

    std::size_t size() const noexcept { return x.rows; }
    std::size_t input_dim() const noexcept { return x.cols; }
    std::size_t label_dim() const noexcept { return y.cols; }

    friend bool operator==(LabeledDataset const&, LabeledDataset const&) = default;
};

/// Empirical mean of a tensor statistic with entrywise standard errors.
struct MomentEstimate
{
    DenseTensor value;
    DenseTensor std_error;
    std::size_t n = 0;
};

enum class ExpectationMethod
{
    analytic,
    quadrature,
    monte_carlo,
};

struct ExpectationOptions
{
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    /// Zero picks the hardware thread count.
    std::size_t workers = 0;
    std::size_t quadrature_nodes = 40;
};

/*!
 * (1/N) Σ y_i ⊗ S_m(x_i) with entrywise standard errors.
 *
 * Scalar labels (p == 1) give an order-m tensor, otherwise the label mode
 * comes first. The result is bit-identical for any worker count.
 */
MomentEstimate cross_moment(LabeledDataset const& data,
                            DensityModel const& model,
                            ScoreOrder m,
                            std::size_t workers = 0);

/// E[∇^(m) G(x)] with the same layout as PolyFunction::derivative.
DenseTensor expected_derivative(PolyFunction const& g,
                                DensityModel const& model,
                                ScoreOrder m,
                                ExpectationMethod method,
                                ExpectationOptions const& options = {});

/// Largest entrywise |E[G⊗S_m]_MC - E[∇^(m)G]| in absolute and standard-error units.
struct SteinReport
{
    MomentEstimate lhs;
    DenseTensor rhs;
    ExpectationMethod oracle = ExpectationMethod::analytic;
    double max_abs_gap = 0.0;
    double max_gap_in_se = 0.0;

    bool passes(double se_gate = 5.0) const { return max_gap_in_se <= se_gate; }
};

/// Compare an estimate against an oracle value entrywise.
void fill_gaps(SteinReport& report);

/// Analytic when the model allows it, otherwise quadrature.
ExpectationMethod default_oracle(DensityModel const& model);

SteinReport stein_residual(DensityModel const& model,
                           PolyFunction const& g,
                           ScoreOrder m,
                           std::size_t n_samples,
                           std::uint64_t seed,
                           std::size_t workers = 0);

/*!
 * Parametric identity for x ~ N(μ0, I) and G(x; μ) = G0(x - μ):
 *   E[G ⊗ S_m(x; μ)] = E[∇_μ^(m) G] = (-1)^m E[∇^(m) G0(z)].
 * Uses the same draws as stein_residual on the standard Gaussian.
 */
SteinReport parametric_stein_residual(std::span<double const> mu0,
                                      PolyFunction const& g0,
                                      ScoreOrder m,
                                      std::size_t n_samples,
                                      std::uint64_t seed,
                                      std::size_t workers = 0);

/// Labels y_i = G(x_i) + σ_y ε_i for given inputs.
LabeledDataset label_samples(SampleMatrix x,
                             PolyFunction const& g,
                             double noise_sd,
                             std::uint64_t seed);

}  // namespace hosf
