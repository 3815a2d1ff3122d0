#include "hosf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "hosf/detail/symmetric.hpp"
#include "hosf/error.hpp"

namespace hosf {
namespace {

std::size_t checked_size(DenseTensor::Dims const& dims, std::size_t budget)
{
    std::size_t n = 1;
    for (auto d : dims)
    {
        if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d)
            throw SizeLimitError("tensor size overflows size_t");
        n *= d;
    }
    if (n > budget)
        throw SizeLimitError("tensor with " + std::to_string(n)
                             + " elements exceeds budget of "
                             + std::to_string(budget));
    return n;
}

void require_finite(DenseTensor const& t, char const* op)
{
    if (!t.all_finite())
        throw NumericError(std::string(op) + ": non-finite entry in result");
}

void require_same_shape(DenseTensor const& a, DenseTensor const& b, char const* op)
{
    if (a.dims() != b.dims())
        throw ShapeError(std::string(op) + ": shape mismatch");
}

std::vector<std::size_t> strides_of(DenseTensor::Dims const& dims)
{
    std::vector<std::size_t> s(dims.size(), 1);
    for (std::size_t k = dims.size(); k-- > 1;)
        s[k - 1] = s[k] * dims[k];
    return s;
}

}  // namespace

//---------------------------------------------------------------------------//
// DenseTensor
//---------------------------------------------------------------------------//

DenseTensor::DenseTensor() : data_(1, 0.0) {}

DenseTensor::DenseTensor(Dims dims, std::size_t budget)
    : dims_(std::move(dims)), data_(checked_size(dims_, budget), 0.0)
{
}

DenseTensor::DenseTensor(Dims dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data))
{
    if (data_.size() != checked_size(dims_, kDefaultElementBudget))
        throw ShapeError("data length does not match product of dims");
}

DenseTensor DenseTensor::scalar(double value)
{
    return DenseTensor({}, std::vector<double>{value});
}

DenseTensor DenseTensor::vector(std::span<double const> values)
{
    return DenseTensor({values.size()},
                       std::vector<double>(values.begin(), values.end()));
}

DenseTensor DenseTensor::matrix(std::size_t rows,
                                std::size_t cols,
                                std::vector<double> row_major)
{
    return DenseTensor({rows, cols}, std::move(row_major));
}

DenseTensor DenseTensor::identity(std::size_t d)
{
    DenseTensor out({d, d});
    for (std::size_t i = 0; i < d; ++i)
        out(i, i) = 1.0;
    return out;
}

DenseTensor DenseTensor::cube(std::size_t d, std::size_t order)
{
    return DenseTensor(Dims(order, d));
}

std::size_t DenseTensor::flat_index(std::span<std::size_t const> index) const
{
    if (index.size() != dims_.size())
        throw ShapeError("index arity does not match tensor order");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < index.size(); ++k)
    {
        if (index[k] >= dims_[k])
            throw ShapeError("index out of range");
        flat = flat * dims_[k] + index[k];
    }
    return flat;
}

double DenseTensor::at(std::span<std::size_t const> index) const
{
    return data_[flat_index(index)];
}

double& DenseTensor::at(std::span<std::size_t const> index)
{
    return data_[flat_index(index)];
}

double DenseTensor::at(std::initializer_list<std::size_t> index) const
{
    return at(std::span<std::size_t const>(index.begin(), index.size()));
}

double& DenseTensor::at(std::initializer_list<std::size_t> index)
{
    return at(std::span<std::size_t const>(index.begin(), index.size()));
}

DenseTensor& DenseTensor::operator+=(DenseTensor const& other)
{
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += other.data_[i];
    return *this;
}

DenseTensor& DenseTensor::operator-=(DenseTensor const& other)
{
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] -= other.data_[i];
    return *this;
}

DenseTensor& DenseTensor::operator*=(double factor)
{
    for (auto& v : data_)
        v *= factor;
    return *this;
}

double DenseTensor::frobenius_norm() const
{
    double s = 0.0;
    for (double v : data_)
        s += v * v;
    return std::sqrt(s);
}

double DenseTensor::max_abs() const
{
    double m = 0.0;
    for (double v : data_)
        m = std::max(m, std::abs(v));
    return m;
}

bool DenseTensor::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

DenseTensor operator+(DenseTensor lhs, DenseTensor const& rhs)
{
    lhs += rhs;
    return lhs;
}

DenseTensor operator-(DenseTensor lhs, DenseTensor const& rhs)
{
    lhs -= rhs;
    return lhs;
}

DenseTensor operator*(double factor, DenseTensor rhs)
{
    rhs *= factor;
    return rhs;
}

double max_abs_diff(DenseTensor const& a, DenseTensor const& b)
{
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

//---------------------------------------------------------------------------//
// Permutation
//---------------------------------------------------------------------------//

Permutation::Permutation(std::vector<std::size_t> zero_based)
    : entries_(std::move(zero_based))
{
    std::vector<bool> seen(entries_.size(), false);
    for (auto e : entries_)
    {
        if (e >= entries_.size() || seen[e])
            throw ValidationError("permutation is not a bijection");
        seen[e] = true;
    }
}

Permutation Permutation::identity(std::size_t order)
{
    std::vector<std::size_t> e(order);
    std::iota(e.begin(), e.end(), std::size_t{0});
    return Permutation(std::move(e));
}

Permutation Permutation::from_one_based(std::vector<std::size_t> one_based)
{
    for (auto& e : one_based)
    {
        if (e == 0)
            throw ValidationError("one-based permutation contains 0");
        --e;
    }
    return Permutation(std::move(one_based));
}

Permutation Permutation::inverse() const
{
    std::vector<std::size_t> inv(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i)
        inv[entries_[i]] = i;
    return Permutation(std::move(inv));
}

//---------------------------------------------------------------------------//
// Products and contractions
//---------------------------------------------------------------------------//

DenseTensor tensor_product(DenseTensor const& a,
                           DenseTensor const& b,
                           std::size_t budget)
{
    DenseTensor::Dims dims = a.dims();
    dims.insert(dims.end(), b.dims().begin(), b.dims().end());
    DenseTensor out(std::move(dims), budget);
    std::size_t const nb = b.size();
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        double const ai = a[i];
        double* row = out.data().data() + i * nb;
        for (std::size_t j = 0; j < nb; ++j)
            row[j] = ai * b[j];
    }
    require_finite(out, "tensor_product");
    return out;
}

DenseTensor mode_product(DenseTensor const& t,
                         std::size_t mode,
                         DenseTensor const& m)
{
    if (mode >= t.order())
        throw ShapeError("mode_product: mode out of range");
    if (m.order() != 2 || m.dim(0) != t.dim(mode))
        throw ShapeError("mode_product: matrix rows must equal the mode dimension");

    std::size_t const rows = m.dim(0);
    std::size_t const cols = m.dim(1);
    std::size_t outer = 1;
    for (std::size_t k = 0; k < mode; ++k)
        outer *= t.dim(k);
    std::size_t inner = 1;
    for (std::size_t k = mode + 1; k < t.order(); ++k)
        inner *= t.dim(k);

    DenseTensor::Dims dims = t.dims();
    dims[mode] = cols;
    DenseTensor out(std::move(dims));
    auto src = t.data();
    auto dst = out.data();
    for (std::size_t o = 0; o < outer; ++o)
    {
        for (std::size_t j = 0; j < rows; ++j)
        {
            double const* s = src.data() + (o * rows + j) * inner;
            for (std::size_t c = 0; c < cols; ++c)
            {
                double const mjc = m(j, c);
                if (mjc == 0.0)
                    continue;
                double* d = dst.data() + (o * cols + c) * inner;
                for (std::size_t i = 0; i < inner; ++i)
                    d[i] += mjc * s[i];
            }
        }
    }
    return out;
}

DenseTensor multilinear_form(DenseTensor const& t,
                             std::span<DenseTensor const> mats)
{
    if (mats.size() != t.order())
        throw ShapeError("multilinear_form: need one matrix per mode");
    DenseTensor out = t;
    for (std::size_t k = 0; k < mats.size(); ++k)
        out = mode_product(out, k, mats[k]);
    require_finite(out, "multilinear_form");
    return out;
}

DenseTensor multilinear_form(DenseTensor const& t,
                             DenseTensor const& m1,
                             DenseTensor const& m2,
                             DenseTensor const& m3)
{
    if (t.order() != 3)
        throw ShapeError("multilinear_form: expected an order-3 tensor");
    DenseTensor const mats[] = {m1, m2, m3};
    return multilinear_form(t, std::span<DenseTensor const>(mats));
}

std::vector<double> contract_fibers(DenseTensor const& t,
                                    std::span<double const> v,
                                    std::span<double const> w)
{
    if (t.order() != 3)
        throw ShapeError("contract_fibers: expected an order-3 tensor");
    std::size_t const d0 = t.dim(0), d1 = t.dim(1), d2 = t.dim(2);
    if (v.size() != d1 || w.size() != d2)
        throw ShapeError("contract_fibers: vector length mismatch");
    std::vector<double> out(d0, 0.0);
    auto data = t.data();
    for (std::size_t i = 0; i < d0; ++i)
    {
        double acc = 0.0;
        for (std::size_t j = 0; j < d1; ++j)
        {
            double const* fiber = data.data() + (i * d1 + j) * d2;
            double s = 0.0;
            for (std::size_t l = 0; l < d2; ++l)
                s += fiber[l] * w[l];
            acc += v[j] * s;
        }
        out[i] = acc;
    }
    return out;
}

double contract_all(DenseTensor const& t, std::span<double const> u)
{
    auto const f = contract_fibers(t, u, u);
    if (u.size() != f.size())
        throw ShapeError("contract_all: vector length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        s += u[i] * f[i];
    return s;
}

DenseTensor transpose(DenseTensor const& t, Permutation const& pi)
{
    if (pi.size() != t.order())
        throw ValidationError("transpose: permutation length != tensor order");
    std::size_t const r = t.order();
    DenseTensor::Dims dims(r);
    for (std::size_t i = 0; i < r; ++i)
        dims[i] = t.dim(pi[i]);
    DenseTensor out(dims);

    // Walk the output in row-major order; step through the input with
    // strides permuted accordingly.
    auto const in_strides = strides_of(t.dims());
    std::vector<std::size_t> step(r);
    for (std::size_t i = 0; i < r; ++i)
        step[i] = in_strides[pi[i]];

    std::size_t flat_in = 0;
    std::size_t flat_out = 0;
    detail::for_each_index(dims, [&](std::span<std::size_t const> idx) {
        flat_in = 0;
        for (std::size_t i = 0; i < r; ++i)
            flat_in += idx[i] * step[i];
        out[flat_out++] = t[flat_in];
    });
    return out;
}

DenseTensor rank1_sum(std::span<double const> weights,
                      std::span<std::vector<double> const> vectors,
                      std::size_t order)
{
    if (vectors.empty())
        throw ValidationError("rank1_sum: empty component list");
    if (weights.size() != vectors.size())
        throw ValidationError("rank1_sum: weights and vectors differ in count");
    std::size_t const d = vectors.front().size();
    for (auto const& v : vectors)
        if (v.size() != d)
            throw ShapeError("rank1_sum: vectors differ in length");

    auto out = detail::fill_symmetric(d, order, [&](std::span<std::size_t const> idx) {
        double s = 0.0;
        for (std::size_t j = 0; j < vectors.size(); ++j)
        {
            double p = weights[j];
            for (auto i : idx)
                p *= vectors[j][i];
            s += p;
        }
        return s;
    });
    require_finite(out, "rank1_sum");
    return out;
}

double symmetry_defect(DenseTensor const& t)
{
    std::size_t const r = t.order();
    if (r < 2)
        return 0.0;
    for (auto d : t.dims())
        if (d != t.dim(0))
            throw ShapeError("symmetry_defect: tensor is not cubical");
    std::size_t const d = t.dim(0);
    double worst = 0.0;
    std::vector<std::size_t> idx(r, 0);
    std::vector<std::size_t> perm(r);
    do
    {
        double const base = t.at(idx);
        perm = idx;
        while (std::next_permutation(perm.begin(), perm.end()))
            worst = std::max(worst, std::abs(t.at(perm) - base));
    } while (detail::next_sorted_index(idx, d));
    return worst;
}

DenseTensor symmetrize(DenseTensor const& t)
{
    std::size_t const r = t.order();
    if (r < 2)
        return t;
    for (auto d : t.dims())
        if (d != t.dim(0))
            throw ShapeError("symmetrize: tensor is not cubical");
    std::vector<std::size_t> perm(r);
    return detail::fill_symmetric(t.dim(0), r, [&](std::span<std::size_t const> idx) {
        perm.assign(idx.begin(), idx.end());
        double s = 0.0;
        std::size_t count = 0;
        do
        {
            s += t.at(perm);
            ++count;
        } while (std::next_permutation(perm.begin(), perm.end()));
        return s / static_cast<double>(count);
    });
}

//---------------------------------------------------------------------------//
// Finite differences
//---------------------------------------------------------------------------//

namespace {

DenseTensor central_difference(TensorFunction const& f,
                               std::span<double const> x,
                               std::span<double const> steps)
{
    std::size_t const d = x.size();
    std::vector<double> xp(x.begin(), x.end());
    std::vector<DenseTensor> slices;
    slices.reserve(d);
    for (std::size_t j = 0; j < d; ++j)
    {
        double const h = steps[j];
        xp[j] = x[j] + h;
        DenseTensor plus = f(xp);
        xp[j] = x[j] - h;
        DenseTensor minus = f(xp);
        xp[j] = x[j];
        if (!plus.all_finite() || !minus.all_finite())
            throw NumericError("numeric_gradient: non-finite function value");
        plus -= minus;
        plus *= 1.0 / (2.0 * h);
        slices.push_back(std::move(plus));
    }
    // Differentiation index goes last.
    DenseTensor::Dims dims = slices.front().dims();
    dims.push_back(d);
    DenseTensor out(dims);
    std::size_t const n = slices.front().size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            out[i * d + j] = slices[j][i];
    return out;
}

}  // namespace

DenseTensor numeric_gradient(TensorFunction const& f,
                             std::span<double const> x,
                             std::size_t order,
                             double rel_step)
{
    if (x.empty())
        throw ShapeError("numeric_gradient: empty point");
    if (!(rel_step > 0.0))
        throw ValidationError("numeric_gradient: step must be positive");
    std::vector<double> steps(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        steps[i] = rel_step * (1.0 + std::abs(x[i]));

    TensorFunction current = f;
    for (std::size_t k = 0; k < order; ++k)
    {
        current = [prev = std::move(current), steps](std::span<double const> p) {
            return central_difference(prev, p, steps);
        };
    }
    DenseTensor out = current(x);
    if (!out.all_finite())
        throw NumericError("numeric_gradient: non-finite result");
    return out;
}

}  // namespace hosf
