#include "hosf/poly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hosf/detail/symmetric.hpp"
#include "hosf/error.hpp"

namespace hosf {
namespace {

double monomial_value(std::vector<std::pair<std::size_t, unsigned>> const& sparse,
                      std::span<double const> x)
{
    double v = 1.0;
    for (auto [var, e] : sparse)
    {
        double const xi = x[var];
        for (unsigned k = 0; k < e; ++k)
            v *= xi;
    }
    return v;
}

double monomial_value(std::vector<unsigned> const& e, std::span<double const> x)
{
    double v = 1.0;
    for (std::size_t i = 0; i < e.size(); ++i)
        for (unsigned k = 0; k < e[i]; ++k)
            v *= x[i];
    return v;
}

// Enumerate exponent vectors with |alpha| = n over d variables.
void for_each_composition(std::size_t d,
                          unsigned n,
                          std::vector<unsigned>& alpha,
                          std::size_t pos,
                          auto&& visit)
{
    if (pos + 1 == d)
    {
        alpha[pos] = n;
        visit(alpha);
        return;
    }
    for (unsigned k = 0; k <= n; ++k)
    {
        alpha[pos] = k;
        for_each_composition(d, n - k, alpha, pos + 1, visit);
    }
}

double factorial(unsigned n)
{
    double f = 1.0;
    for (unsigned k = 2; k <= n; ++k)
        f *= k;
    return f;
}

}  // namespace

double differentiate_monomial(std::vector<unsigned>& e,
                              std::span<std::size_t const> idx)
{
    double mult = 1.0;
    for (auto i : idx)
    {
        if (e[i] == 0)
            return 0.0;
        mult *= e[i];
        --e[i];
    }
    return mult;
}

PolyFunction::PolyFunction(std::size_t input_dim,
                           std::size_t output_dim,
                           std::vector<PolyTerm> terms)
    : input_dim_(input_dim), output_dim_(output_dim), terms_(std::move(terms))
{
    if (input_dim_ == 0 || output_dim_ == 0)
        throw ValidationError("PolyFunction: dimensions must be positive");
    sparse_.reserve(terms_.size());
    for (auto const& t : terms_)
    {
        if (t.output >= output_dim_)
            throw ValidationError("PolyFunction: term output index out of range");
        if (t.exponents.size() != input_dim_)
            throw ShapeError("PolyFunction: exponent vector length != input dim");
        if (!std::isfinite(t.coef))
            throw ValidationError("PolyFunction: non-finite coefficient");
        unsigned const deg
            = std::accumulate(t.exponents.begin(), t.exponents.end(), 0u);
        if (deg > kMaxDegree)
            throw ValidationError("PolyFunction: total degree exceeds 6");
        degree_ = std::max(degree_, deg);
        std::vector<std::pair<std::size_t, unsigned>> sp;
        for (std::size_t i = 0; i < t.exponents.size(); ++i)
            if (t.exponents[i] != 0)
                sp.emplace_back(i, t.exponents[i]);
        sparse_.push_back(std::move(sp));
    }
}

PolyFunction PolyFunction::power_of_linear(std::span<double const> u,
                                           unsigned power,
                                           double coef)
{
    std::size_t const d = u.size();
    if (d == 0)
        throw ValidationError("power_of_linear: empty direction");
    std::vector<PolyTerm> terms;
    std::vector<unsigned> alpha(d, 0);
    double const nfact = factorial(power);
    for_each_composition(d, power, alpha, 0, [&](std::vector<unsigned> const& a) {
        double c = coef * nfact;
        for (std::size_t i = 0; i < d; ++i)
        {
            c /= factorial(a[i]);
            c *= std::pow(u[i], static_cast<int>(a[i]));
        }
        if (c != 0.0)
            terms.push_back({0, c, a});
    });
    return PolyFunction(d, 1, std::move(terms));
}

PolyFunction PolyFunction::identity(std::size_t d)
{
    std::vector<PolyTerm> terms;
    for (std::size_t i = 0; i < d; ++i)
    {
        std::vector<unsigned> e(d, 0);
        e[i] = 1;
        terms.push_back({i, 1.0, std::move(e)});
    }
    return PolyFunction(d, d, std::move(terms));
}

PolyFunction PolyFunction::constant(std::size_t d, double value)
{
    return PolyFunction(d, 1, {{0, value, std::vector<unsigned>(d, 0)}});
}

PolyFunction PolyFunction::stack(std::span<PolyFunction const> parts)
{
    if (parts.empty())
        throw ValidationError("PolyFunction::stack: nothing to stack");
    std::size_t const d = parts.front().input_dim();
    std::vector<PolyTerm> terms;
    std::size_t offset = 0;
    for (auto const& p : parts)
    {
        if (p.input_dim() != d)
            throw ShapeError("PolyFunction::stack: input dims differ");
        for (auto t : p.terms())
        {
            t.output += offset;
            terms.push_back(std::move(t));
        }
        offset += p.output_dim();
    }
    return PolyFunction(d, offset, std::move(terms));
}

PolyFunction PolyFunction::operator+(PolyFunction const& other) const
{
    if (other.input_dim_ != input_dim_ || other.output_dim_ != output_dim_)
        throw ShapeError("PolyFunction::operator+: dimension mismatch");
    auto terms = terms_;
    terms.insert(terms.end(), other.terms_.begin(), other.terms_.end());
    return PolyFunction(input_dim_, output_dim_, std::move(terms));
}

void PolyFunction::evaluate(std::span<double const> x, std::span<double> out) const
{
    if (x.size() != input_dim_ || out.size() != output_dim_)
        throw ShapeError("PolyFunction::evaluate: dimension mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < terms_.size(); ++k)
        out[terms_[k].output] += terms_[k].coef * monomial_value(sparse_[k], x);
}

DenseTensor PolyFunction::value(std::span<double const> x) const
{
    DenseTensor out(scalar_output() ? DenseTensor::Dims{}
                                    : DenseTensor::Dims{output_dim_});
    evaluate(x, out.data());
    return out;
}

DenseTensor PolyFunction::derivative(std::span<double const> x, std::size_t m) const
{
    if (x.size() != input_dim_)
        throw ShapeError("PolyFunction::derivative: dimension mismatch");
    std::size_t const d = input_dim_;
    DenseTensor::Dims dims;
    if (!scalar_output())
        dims.push_back(output_dim_);
    dims.insert(dims.end(), m, d);
    DenseTensor out(dims);

    std::size_t slice = 1;
    for (std::size_t k = 0; k < m; ++k)
        slice *= d;

    std::vector<unsigned> e;
    for (std::size_t o = 0; o < output_dim_; ++o)
    {
        auto part = detail::fill_symmetric(d, m, [&](std::span<std::size_t const> idx) {
            double s = 0.0;
            for (auto const& t : terms_)
            {
                if (t.output != o)
                    continue;
                e = t.exponents;
                double const mult = differentiate_monomial(e, idx);
                if (mult != 0.0)
                    s += t.coef * mult * monomial_value(e, x);
            }
            return s;
        });
        std::copy(part.data().begin(), part.data().end(),
                  out.data().begin() + static_cast<std::ptrdiff_t>(o * slice));
    }
    return out;
}

}  // namespace hosf
