#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hosf/density.hpp"
#include "hosf/tensor.hpp"

namespace hosf {

/// Gauss-Hermite rule for the standard normal weight; weights sum to 1.
struct QuadratureRule
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline constexpr std::size_t kQuadratureNodes = 40;
inline constexpr std::size_t kQuadratureMaxDim = 3;

/// n-point rule from the eigen-decomposition of the Jacobi matrix.
QuadratureRule gauss_hermite(std::size_t n);

/*!
 * E[F(x)] under a Gaussian, mixture, or affine image of either, by a tensor
 * product rule with `nodes` points per dimension. Requires dim <= 3.
 */
DenseTensor quadrature_expectation(DensityModel const& model,
                                   std::function<DenseTensor(std::span<double const>)> const& f,
                                   std::size_t nodes = kQuadratureNodes);

}  // namespace hosf
