#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "hosf/poly.hpp"
#include "hosf/samples.hpp"
#include "hosf/tensor.hpp"

namespace hosf {

/// Densities below this value are treated as degenerate points.
inline constexpr double kDensityFloor = 1e-300;

/// Order m of a score function, 1 <= m <= 4.
class ScoreOrder
{
  public:
    static constexpr std::size_t kMax = 4;

    explicit ScoreOrder(std::size_t m);
    std::size_t value() const noexcept { return m_; }

  private:
    std::size_t m_;
};

//---------------------------------------------------------------------------//
// Model variants
//---------------------------------------------------------------------------//

struct StandardGaussian
{
    std::size_t dim = 1;
};

/*!
 * Mixture of axis-aligned Gaussians, p(x) = Σ_h p(h) N(x; μ_h, diag σ_h²).
 *
 * With unit variances this is x = A h + z for one-hot h and A = [μ_1 ...].
 */
class GaussianMixture
{
  public:
    /// Shared identity covariance.
    GaussianMixture(std::vector<double> weights,
                    std::vector<std::vector<double>> means);
    /// Per-component diagonal covariance given as variances.
    GaussianMixture(std::vector<double> weights,
                    std::vector<std::vector<double>> means,
                    std::vector<std::vector<double>> variances);

    std::size_t dim() const noexcept { return means_.front().size(); }
    std::size_t components() const noexcept { return weights_.size(); }
    std::vector<double> const& weights() const noexcept { return weights_; }
    std::vector<std::vector<double>> const& means() const noexcept { return means_; }
    std::vector<std::vector<double>> const& variances() const noexcept
    {
        return variances_;
    }
    bool identity_covariance() const noexcept { return identity_; }

    /// log N(x; μ_h, Σ_h) for component h.
    double component_log_density(std::size_t h, std::span<double const> x) const;
    /// Same components with replaced mixing weights.
    GaussianMixture with_weights(std::vector<double> weights) const;

  private:
    std::vector<double> weights_;
    std::vector<std::vector<double>> means_;
    std::vector<std::vector<double>> variances_;
    std::vector<double> log_norm_;
    bool identity_ = true;
};

/// p(x) ∝ exp(-E(x)) with a polynomial energy; the normalizer is unknown.
struct ExpFamily
{
    PolyFunction energy;
    std::size_t dim() const noexcept { return energy.input_dim(); }
};

class DensityModel;

/// Law of t = A x + b for x drawn from a base model.
struct AffineOf
{
    std::shared_ptr<DensityModel const> base;
    DenseTensor matrix;
    DenseTensor inverse;
    std::vector<double> shift;
    double log_abs_det = 0.0;
};

class DensityModel
{
  public:
    using Variant = std::variant<StandardGaussian, GaussianMixture, ExpFamily, AffineOf>;

    static DensityModel standard_gaussian(std::size_t d);
    static DensityModel mixture(GaussianMixture gmm);
    static DensityModel exp_family(PolyFunction energy);
    /// Throws ValidationError unless A is square, matching and well conditioned.
    static DensityModel affine(DensityModel base,
                               DenseTensor const& a,
                               std::span<double const> b);

    std::size_t dim() const;
    Variant const& variant() const noexcept { return v_; }

    template<class T>
    T const* get_if() const noexcept
    {
        return std::get_if<T>(&v_);
    }

  private:
    explicit DensityModel(Variant v) : v_(std::move(v)) {}
    Variant v_;
};

//---------------------------------------------------------------------------//
// Density evaluation and scores
//---------------------------------------------------------------------------//

struct LogDensity
{
    double value = 0.0;
    /// False for ExpFamily, where `value` is -E(x) up to an unknown constant.
    bool normalized = true;
};

LogDensity log_density(DensityModel const& model, std::span<double const> x);

/// ∇^(n) log p(x) for n = 1..max_order, each an order-n symmetric tensor.
struct LogDerivatives
{
    std::vector<DenseTensor> by_order;  // index n-1 holds order n
    std::vector<bool> vanishes;         // identically zero for this model
};

LogDerivatives log_density_derivatives(DensityModel const& model,
                                       std::span<double const> x,
                                       std::size_t max_order);

/*!
 * Higher-order score S_m(x) built from the recursion
 *   S_m = -S_{m-1} ⊗ ∇log p - ∇S_{m-1},  S_0 = 1,
 * with every derivative taken analytically through the log-density
 * derivatives of the model.
 */
DenseTensor score(DensityModel const& model, std::span<double const> x, ScoreOrder m);

/// S_m(x) = (-1)^m ∇^(m)p(x) / p(x) from analytic derivatives of p.
DenseTensor score_explicit(DensityModel const& model,
                           std::span<double const> x,
                           ScoreOrder m);

/// Multivariate probabilists' Hermite tensor H_m(x).
DenseTensor hermite(std::span<double const> x, ScoreOrder m);

/// p(h | x) for every component.
std::vector<double> gmm_posterior(GaussianMixture const& gmm, std::span<double const> x);

/*!
 * Parametric score S_m(x; μ) = (-1)^m ∇_μ^(m) p(x; μ) / p(x; μ) for
 * x ~ N(μ, I), via the parametric recursion. Equals (-1)^m H_m(x - μ).
 */
DenseTensor parametric_score_gaussian_mean(std::span<double const> x,
                                           std::span<double const> mu,
                                           ScoreOrder m);

/// Score of t = A x + b at the point t, for x distributed as `model`.
DenseTensor transform_score_affine(DensityModel const& model,
                                   DenseTensor const& a,
                                   std::span<double const> b,
                                   std::span<double const> t,
                                   ScoreOrder m);

struct RefitOptions
{
    std::size_t max_iterations = 10000;
    double tolerance = 1e-12;
};

/*!
 * Re-estimate mixing weights on target samples with component parameters
 * held fixed (weights-only EM). Samples degenerate under every component are
 * skipped; if none remain a FitError is raised.
 */
std::vector<double> selftaught_refit_weights(GaussianMixture const& components,
                                             SampleMatrix const& target,
                                             RefitOptions const& options = {});

//---------------------------------------------------------------------------//
// Sampling
//---------------------------------------------------------------------------//

/// Draw n rows from the model; ExpFamily has no sampler.
SampleMatrix draw_samples(DensityModel const& model, std::size_t n, std::uint64_t seed);

}  // namespace hosf
