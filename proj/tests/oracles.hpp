#pragma once

// Independent reference computations and random generators used by tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "hosf/density.hpp"
#include "hosf/poly.hpp"
#include "hosf/tensor.hpp"

namespace oracle {

using hosf::DenseTensor;

class Rng
{
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double normal() { return normal_(eng_); }
    double uniform(double lo, double hi)
    {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }
    std::size_t index(std::size_t n)
    {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_);
    }

    std::vector<double> normal_vector(std::size_t d)
    {
        std::vector<double> v(d);
        for (auto& x : v)
            x = normal();
        return v;
    }
    std::vector<double> unit_vector(std::size_t d)
    {
        auto v = normal_vector(d);
        double n = 0.0;
        for (double x : v)
            n += x * x;
        n = std::sqrt(n);
        for (auto& x : v)
            x /= n;
        return v;
    }
    /// k orthonormal vectors in R^d by Gram-Schmidt on Gaussian draws.
    std::vector<std::vector<double>> orthonormal(std::size_t d, std::size_t k)
    {
        std::vector<std::vector<double>> out;
        while (out.size() < k)
        {
            auto v = normal_vector(d);
            for (int pass = 0; pass < 2; ++pass)
                for (auto const& q : out)
                {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < d; ++i)
                        dot += v[i] * q[i];
                    for (std::size_t i = 0; i < d; ++i)
                        v[i] -= dot * q[i];
                }
            double n = 0.0;
            for (double x : v)
                n += x * x;
            n = std::sqrt(n);
            if (n < 1e-6)
                continue;
            for (auto& x : v)
                x /= n;
            out.push_back(std::move(v));
        }
        return out;
    }
    DenseTensor tensor(std::vector<std::size_t> dims)
    {
        DenseTensor t(std::move(dims));
        for (auto& x : t.data())
            x = normal();
        return t;
    }
    DenseTensor matrix(std::size_t r, std::size_t c) { return tensor({r, c}); }

    /// Random polynomial of total degree <= max_degree with `terms` monomials per output.
    hosf::PolyFunction poly(std::size_t d,
                            std::size_t p,
                            unsigned max_degree,
                            std::size_t terms = 4)
    {
        std::vector<hosf::PolyTerm> out;
        for (std::size_t o = 0; o < p; ++o)
            for (std::size_t t = 0; t < terms; ++t)
            {
                std::vector<unsigned> e(d, 0);
                unsigned const deg = static_cast<unsigned>(index(max_degree + 1));
                for (unsigned k = 0; k < deg; ++k)
                    ++e[index(d)];
                out.push_back({o, uniform(-1.0, 1.0), e});
            }
        return hosf::PolyFunction(d, p, out);
    }

    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Richardson-extrapolated central differences: combines steps h and h/2.
inline DenseTensor richardson_gradient(hosf::TensorFunction const& f,
                                       std::span<double const> x,
                                       std::size_t order,
                                       double rel_step = 1e-3)
{
    DenseTensor coarse = hosf::numeric_gradient(f, x, order, rel_step);
    DenseTensor fine = hosf::numeric_gradient(f, x, order, rel_step / 2);
    fine *= 4.0 / 3.0;
    coarse *= 1.0 / 3.0;
    return fine - coarse;
}

/// a ⊗ b by an explicit double loop over flat indices.
inline DenseTensor outer_loop(DenseTensor const& a, DenseTensor const& b)
{
    auto dims = a.dims();
    dims.insert(dims.end(), b.dims().begin(), b.dims().end());
    DenseTensor out(dims);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            out[i * b.size() + j] = a[i] * b[j];
    return out;
}

/// Σ_{j1 j2 j3} T(j1,j2,j3) M1(j1,i1) M2(j2,i2) M3(j3,i3) by six nested loops.
inline DenseTensor multilinear_loop(DenseTensor const& t,
                                    DenseTensor const& m1,
                                    DenseTensor const& m2,
                                    DenseTensor const& m3)
{
    std::size_t const d = t.dim(0);
    std::size_t const k1 = m1.dim(1), k2 = m2.dim(1), k3 = m3.dim(1);
    DenseTensor out({k1, k2, k3});
    for (std::size_t a = 0; a < k1; ++a)
        for (std::size_t b = 0; b < k2; ++b)
            for (std::size_t c = 0; c < k3; ++c)
            {
                double s = 0.0;
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                        for (std::size_t l = 0; l < d; ++l)
                            s += t.at({i, j, l}) * m1(i, a) * m2(j, b) * m3(l, c);
                out.at({a, b, c}) = s;
            }
    return out;
}

/// Symmetrized delta tensor: entry (i_1..i_m, j_1..j_m) = Σ_σ Π δ(i_a, j_σ(a)).
inline DenseTensor symmetrized_delta(std::size_t d, std::size_t m)
{
    std::vector<std::size_t> dims(2 * m, d);
    DenseTensor out(dims);
    std::vector<std::size_t> idx(2 * m, 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat)
    {
        std::size_t rem = flat;
        for (std::size_t k = 2 * m; k-- > 0;)
        {
            idx[k] = rem % d;
            rem /= d;
        }
        std::vector<std::size_t> perm(m);
        for (std::size_t a = 0; a < m; ++a)
            perm[a] = a;
        double s = 0.0;
        do
        {
            bool match = true;
            for (std::size_t a = 0; a < m && match; ++a)
                match = idx[a] == idx[m + perm[a]];
            s += match ? 1.0 : 0.0;
        } while (std::next_permutation(perm.begin(), perm.end()));
        out[flat] = s;
    }
    return out;
}

inline double dot(std::span<double const> a, std::span<double const> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

/// min over sign of ‖a - b‖.
inline double sign_matched_distance(std::span<double const> a, std::span<double const> b)
{
    double plus = 0.0, minus = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        plus += (a[i] - b[i]) * (a[i] - b[i]);
        minus += (a[i] + b[i]) * (a[i] + b[i]);
    }
    return std::sqrt(std::min(plus, minus));
}

inline double phi(double z)
{
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline hosf::GaussianMixture random_gmm(oracle::Rng& rng, std::size_t d, std::size_t k, bool diagonal)
{
    std::vector<double> w(k);
    double total = 0.0;
    for (auto& v : w)
    {
        v = rng.uniform(0.2, 1.0);
        total += v;
    }
    for (auto& v : w)
        v /= total;
    double check = 0.0;
    for (std::size_t h = 0; h + 1 < k; ++h)
        check += w[h];
    w[k - 1] = 1.0 - check;
    std::vector<std::vector<double>> means, vars;
    for (std::size_t h = 0; h < k; ++h)
    {
        means.push_back(rng.normal_vector(d));
        std::vector<double> var(d, 1.0);
        if (diagonal)
            for (auto& v : var)
                v = rng.uniform(0.5, 2.0);
        vars.push_back(var);
    }
    return hosf::GaussianMixture(w, means, vars);
}

inline double gmm_density_direct(hosf::GaussianMixture const& gmm, std::span<double const> x)
{
    double s = 0.0;
    for (std::size_t h = 0; h < gmm.components(); ++h)
    {
        double c = gmm.weights()[h];
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            double const sd = std::sqrt(gmm.variances()[h][i]);
            c *= phi((x[i] - gmm.means()[h][i]) / sd) / sd;
        }
        s += c;
    }
    return s;
}

/// (-1)^m ∇^m p / p with p given directly, via Richardson finite differences.
inline DenseTensor fd_score(std::function<double(std::span<double const>)> const& density,
                            std::span<double const> x,
                            std::size_t m)
{
    hosf::TensorFunction f = [&](std::span<double const> p) { return DenseTensor::scalar(density(p)); };
    auto g = richardson_gradient(f, x, m, 2e-3);
    g *= (m % 2 == 1 ? -1.0 : 1.0) / density(x);
    return g;
}

}  // namespace oracle
