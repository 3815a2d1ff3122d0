#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace hosf {

/// Default cap on the number of scalars a single tensor may hold.
inline constexpr std::size_t kDefaultElementBudget = 100'000'000;

//---------------------------------------------------------------------------//
/*!
 * Dense real tensor of arbitrary order stored row-major (last index fastest).
 *
 * Order 0 is a scalar holding one element. Values are treated as immutable
 * by every free function in this header: operations allocate fresh outputs.
 */
class DenseTensor
{
  public:
    using Dims = std::vector<std::size_t>;

    /// Scalar zero.
    DenseTensor();
    explicit DenseTensor(Dims dims,
                         std::size_t budget = kDefaultElementBudget);
    DenseTensor(Dims dims, std::vector<double> data);

    static DenseTensor scalar(double value);
    static DenseTensor vector(std::span<double const> values);
    static DenseTensor matrix(std::size_t rows,
                              std::size_t cols,
                              std::vector<double> row_major);
    static DenseTensor identity(std::size_t d);
    /// Tensor of shape d^order filled with zeros.
    static DenseTensor cube(std::size_t d, std::size_t order);

    std::size_t order() const noexcept { return dims_.size(); }
    Dims const& dims() const noexcept { return dims_; }
    std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double const> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    std::vector<double> const& values() const noexcept { return data_; }

    double operator[](std::size_t flat) const { return data_[flat]; }
    double& operator[](std::size_t flat) { return data_[flat]; }

    double at(std::span<std::size_t const> index) const;
    double& at(std::span<std::size_t const> index);
    double at(std::initializer_list<std::size_t> index) const;
    double& at(std::initializer_list<std::size_t> index);

    std::size_t flat_index(std::span<std::size_t const> index) const;

    /// Matrix convenience accessors (order 2 only, unchecked order).
    double operator()(std::size_t i, std::size_t j) const
    {
        return data_[i * dims_[1] + j];
    }
    double& operator()(std::size_t i, std::size_t j)
    {
        return data_[i * dims_[1] + j];
    }

    DenseTensor& operator+=(DenseTensor const& other);
    DenseTensor& operator-=(DenseTensor const& other);
    DenseTensor& operator*=(double factor);

    double frobenius_norm() const;
    double max_abs() const;
    bool all_finite() const;

    friend bool operator==(DenseTensor const&, DenseTensor const&) = default;

  private:
    Dims dims_;
    std::vector<double> data_;
};

DenseTensor operator+(DenseTensor lhs, DenseTensor const& rhs);
DenseTensor operator-(DenseTensor lhs, DenseTensor const& rhs);
DenseTensor operator*(double factor, DenseTensor rhs);

/// Largest entrywise absolute difference; shapes must match.
double max_abs_diff(DenseTensor const& a, DenseTensor const& b);

//---------------------------------------------------------------------------//
/*!
 * Bijection on tensor modes, stored zero-based.
 *
 * Mode i of a transposed tensor corresponds to mode entries()[i] of the input.
 */
class Permutation
{
  public:
    explicit Permutation(std::vector<std::size_t> zero_based);

    static Permutation identity(std::size_t order);
    /// Build from the 1..r convention used in the notation of the theory.
    static Permutation from_one_based(std::vector<std::size_t> one_based);

    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t operator[](std::size_t i) const { return entries_[i]; }
    std::vector<std::size_t> const& entries() const noexcept
    {
        return entries_;
    }
    Permutation inverse() const;

  private:
    std::vector<std::size_t> entries_;
};

//---------------------------------------------------------------------------//
// Multilinear algebra
//---------------------------------------------------------------------------//

DenseTensor tensor_product(DenseTensor const& a,
                           DenseTensor const& b,
                           std::size_t budget = kDefaultElementBudget);

/// Contract mode `mode` of T against the rows of matrix M (dims[mode] x k).
DenseTensor mode_product(DenseTensor const& t,
                         std::size_t mode,
                         DenseTensor const& m);

/// T(M_1, ..., M_r): contract every mode of T against a matrix.
DenseTensor multilinear_form(DenseTensor const& t,
                             std::span<DenseTensor const> mats);
DenseTensor multilinear_form(DenseTensor const& t,
                             DenseTensor const& m1,
                             DenseTensor const& m2,
                             DenseTensor const& m3);

/// T(I, v, w) for an order-3 tensor: combination of mode-1 fibers.
std::vector<double> contract_fibers(DenseTensor const& t,
                                    std::span<double const> v,
                                    std::span<double const> w);

/// T(u, u, u) for an order-3 tensor.
double contract_all(DenseTensor const& t, std::span<double const> u);

DenseTensor transpose(DenseTensor const& t, Permutation const& pi);

/// Σ_j w_j v_j^{⊗m}; the result is exactly symmetric.
DenseTensor rank1_sum(std::span<double const> weights,
                      std::span<std::vector<double> const> vectors,
                      std::size_t order);

/// Largest |T(i) - T(σ(i))| over all mode permutations σ.
double symmetry_defect(DenseTensor const& t);
/// Average over all mode permutations; requires all dims equal.
DenseTensor symmetrize(DenseTensor const& t);

//---------------------------------------------------------------------------//
// Finite differences
//---------------------------------------------------------------------------//

using TensorFunction = std::function<DenseTensor(std::span<double const>)>;

/*!
 * Central-difference estimate of the m-th derivative of F at x.
 *
 * Each differentiation appends its index as the last mode. Higher orders
 * nest first-order differences with per-coordinate steps
 * h_i = rel_step * (1 + |x_i|), fixed at the base point.
 */
DenseTensor numeric_gradient(TensorFunction const& f,
                             std::span<double const> x,
                             std::size_t order,
                             double rel_step = 1e-4);

}  // namespace hosf
