#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hosf/tensor.hpp"

namespace hosf {

/// One monomial c * Π x_i^{e_i} contributing to output `output`.
struct PolyTerm
{
    std::size_t output = 0;
    double coef = 0.0;
    std::vector<unsigned> exponents;
};

//---------------------------------------------------------------------------//
/*!
 * Vector-valued polynomial G: R^d -> R^p with analytic derivatives.
 *
 * A single output (p == 1) is treated as a scalar function, so its value has
 * order 0 and its m-th derivative has order m. Otherwise the output mode
 * comes first and the derivative has order 1 + m.
 */
class PolyFunction
{
  public:
    static constexpr unsigned kMaxDegree = 6;

    PolyFunction(std::size_t input_dim,
                 std::size_t output_dim,
                 std::vector<PolyTerm> terms);

    /// Scalar c * (u.x)^power expanded into monomials.
    static PolyFunction power_of_linear(std::span<double const> u,
                                        unsigned power,
                                        double coef = 1.0);
    /// The identity map x -> x.
    static PolyFunction identity(std::size_t d);
    /// Scalar constant.
    static PolyFunction constant(std::size_t d, double value);

    /// Stack outputs of several functions on the same input.
    static PolyFunction stack(std::span<PolyFunction const> parts);
    /// Sum of scalar-or-vector functions with identical output dims.
    PolyFunction operator+(PolyFunction const& other) const;

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept { return output_dim_; }
    bool scalar_output() const noexcept { return output_dim_ == 1; }
    std::size_t output_order() const noexcept { return scalar_output() ? 0 : 1; }
    std::vector<PolyTerm> const& terms() const noexcept { return terms_; }
    unsigned degree() const noexcept { return degree_; }

    /// G(x) as a tensor of order output_order().
    DenseTensor value(std::span<double const> x) const;
    /// Writes the p outputs into `out` without allocating.
    void evaluate(std::span<double const> x, std::span<double> out) const;

    /// ∇^(m) G(x): output mode(s) first, then m derivative modes.
    DenseTensor derivative(std::span<double const> x, std::size_t m) const;

  private:
    std::size_t input_dim_;
    std::size_t output_dim_;
    std::vector<PolyTerm> terms_;
    unsigned degree_ = 0;
    // Sparse (variable, exponent) view of each term for fast evaluation.
    std::vector<std::vector<std::pair<std::size_t, unsigned>>> sparse_;
};

/*!
 * Differentiate monomial x^e along the multi-index `idx`.
 *
 * Returns the multiplier; `e` is updated in place. A zero multiplier means
 * the derivative vanishes.
 */
double differentiate_monomial(std::vector<unsigned>& e,
                              std::span<std::size_t const> idx);

}  // namespace hosf
