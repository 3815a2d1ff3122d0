#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hosf/error.hpp"
#include "hosf/tensor.hpp"

namespace hosf {

enum class InitMethod
{
    random,
    svd,
};

struct DecompConfig
{
    std::size_t k = 1;
    /// Number of starts L; zero means max(50, 10 k).
    std::size_t inits = 0;
    std::size_t iterations = 100;
    double nu = 0.5;
    double tol = 1e-10;
    std::uint64_t seed = 0;
    InitMethod init = InitMethod::random;
    /// Zero picks the hardware thread count.
    std::size_t workers = 0;

    std::size_t starts() const noexcept;
    /// Throws ValidationError when a field is out of range.
    void validate() const;
};

struct Component
{
    double weight = 0.0;
    std::vector<double> vector;

    friend bool operator==(Component const&, Component const&) = default;
};

struct StartDiagnostics
{
    std::size_t iterations = 0;
    bool converged = false;
    bool breakdown = false;

    friend bool operator==(StartDiagnostics const&, StartDiagnostics const&) = default;
};

struct DecompositionResult
{
    std::vector<Component> components;
    double residual_fro = 0.0;
    std::size_t candidates_kept = 0;
    std::vector<StartDiagnostics> per_start;

    friend bool operator==(DecompositionResult const&, DecompositionResult const&) = default;
};

/// Fewer than k distinct components were found; `partial` holds them.
class PartialResultError : public NumericError
{
  public:
    PartialResultError(std::string const& what, DecompositionResult partial)
        : NumericError(what), partial_(std::move(partial))
    {
    }
    DecompositionResult const& partial() const noexcept { return partial_; }

  private:
    DecompositionResult partial_;
};

struct PowerResult
{
    std::vector<double> u;
    double lambda = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/*!
 * Iterate u <- T(I,u,u)/‖T(I,u,u)‖ from u0 for at most n steps, stopping
 * once successive iterates agree to `tol` up to sign. Slightly asymmetric
 * input is symmetrized first.
 */
PowerResult power_iteration(DenseTensor const& t,
                            std::span<double const> u0,
                            std::size_t n,
                            double tol = 1e-10);

/*!
 * Greedy clustering of candidate vectors: repeatedly refine the candidate
 * with the largest |T(u,u,u)|, emit the refined center and drop every
 * candidate within |<u, center>| > ν/2 of it, the chosen one included.
 * A center that duplicates an earlier one is not emitted again.
 */
std::vector<std::vector<double>> cluster(std::vector<std::vector<double>> candidates,
                                         DenseTensor const& t,
                                         std::size_t n,
                                         double nu,
                                         double tol = 1e-10);

/// Starting vector for start `start_index`; seeded from cfg.seed + start_index.
std::vector<double> initialize(DenseTensor const& t, DecompConfig const& cfg, std::size_t start_index);

/// Multi-start power iteration followed by clustering; keeps the top k centers.
DecompositionResult decompose(DenseTensor const& t, DecompConfig const& cfg);

/// Flip v so its largest-magnitude entry is positive; the weight absorbs the sign.
void canonicalize(Component& c, std::size_t order = 3);

/// ‖T - Σ w_j v_j^{⊗3}‖_F.
double cp_residual(DenseTensor const& t, std::span<Component const> comps);

struct Whitening
{
    DenseTensor w;       // d x k, W^T M2 W = I
    DenseTensor w_pinv;  // k x d, maps back: x ≈ W_pinv^T y
};

/// Top-k eigen-whitening of a symmetric PSD matrix.
Whitening whiten(DenseTensor const& m2, std::size_t k);

/// T(W, W, W).
DenseTensor whiten_tensor(DenseTensor const& t, Whitening const& wh);

/// Map components of a whitened tensor back to the original space.
std::vector<Component> unwhiten(std::span<Component const> comps, Whitening const& wh);

/// whiten -> decompose -> unwhiten, with the residual taken in the original space.
DecompositionResult decompose_whitened(DenseTensor const& t, DenseTensor const& m2, DecompConfig const& cfg);

struct EigenPair
{
    double value = 0.0;
    std::vector<double> vector;
};

/// Top-k eigenpairs of a symmetric matrix by |eigenvalue|, sign-canonical vectors.
std::vector<EigenPair> matrix_decompose(DenseTensor const& m, std::size_t k);

}  // namespace hosf
