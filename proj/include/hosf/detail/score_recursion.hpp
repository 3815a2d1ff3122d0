#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hosf/tensor.hpp"

namespace hosf::detail {

/*!
 * One term of S_m written over log-density derivatives:
 *
 *   coef * transpose(ℓ_{a_1} ⊗ ... ⊗ ℓ_{a_t}, π)
 *
 * where ℓ_a = ∇^(a) log p. Mode k of the term is raw mode out_to_raw[k] of
 * the concatenated product.
 */
struct RecursionTerm
{
    double coef = 1.0;
    std::vector<std::size_t> factors;
    std::vector<std::size_t> out_to_raw;

    friend bool operator==(RecursionTerm const&, RecursionTerm const&) = default;
};

/// Symbolic expansion of S_m via S_m = -S_{m-1} ⊗ ℓ_1 - ∇S_{m-1}.
std::vector<RecursionTerm> const& score_recursion_terms(std::size_t m);

/// Apply one recursion step to a list of terms.
std::vector<RecursionTerm> recursion_step(std::vector<RecursionTerm> const& prev);

/*!
 * Evaluate S_m from log-derivative values ℓ_1..ℓ_m (index n-1 holds ℓ_n).
 * Terms containing a factor flagged in `vanishes` are skipped.
 */
DenseTensor evaluate_score_recursion(std::size_t m,
                                     std::size_t d,
                                     std::span<DenseTensor const> ell,
                                     std::vector<bool> const& vanishes);

/// Reference evaluation through tensor_product and transpose.
DenseTensor evaluate_score_recursion_reference(std::size_t m,
                                               std::span<DenseTensor const> ell);

}  // namespace hosf::detail
