#include "hosf/density.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "hosf/detail/partitions.hpp"
#include "hosf/detail/score_recursion.hpp"
#include "hosf/detail/symmetric.hpp"
#include "hosf/error.hpp"

namespace hosf {
namespace {

double const kLogFloor = std::log(kDensityFloor);
double const kLog2Pi = std::log(2.0 * std::numbers::pi);

void require_point(std::span<double const> x, std::size_t d, char const* op)
{
    if (x.size() != d)
        throw ShapeError(std::string(op) + ": point has dimension "
                         + std::to_string(x.size()) + ", model has "
                         + std::to_string(d));
    for (double v : x)
        if (!std::isfinite(v))
            throw ValidationError(std::string(op) + ": non-finite coordinate");
}

double log_sum_exp(std::span<double const> v)
{
    double const m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m))
        return m;
    double s = 0.0;
    for (double a : v)
        s += std::exp(a - m);
    return m + std::log(s);
}

// log p(h) + log N_h(x) for every component.
std::vector<double> joint_log_terms(GaussianMixture const& gmm, std::span<double const> x)
{
    std::vector<double> out(gmm.components());
    for (std::size_t h = 0; h < out.size(); ++h)
        out[h] = std::log(gmm.weights()[h]) + gmm.component_log_density(h, x);
    return out;
}

std::vector<double> softmax_from_logs(std::vector<double> const& logs, double lse)
{
    std::vector<double> r(logs.size());
    for (std::size_t h = 0; h < logs.size(); ++h)
        r[h] = std::exp(logs[h] - lse);
    return r;
}

std::vector<double> affine_preimage(AffineOf const& aff, std::span<double const> t)
{
    std::size_t const d = aff.shift.size();
    std::vector<double> x(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
    {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            s += aff.inverse(i, j) * (t[j] - aff.shift[j]);
        x[i] = s;
    }
    return x;
}

// Pull an order-n tensor in x-coordinates back to t = A x + b coordinates.
DenseTensor pull_back(DenseTensor const& tx, DenseTensor const& inverse)
{
    std::vector<DenseTensor> mats(tx.order(), inverse);
    return multilinear_form(tx, mats);
}

double hermite_entry(std::span<double const> z, std::span<std::size_t const> idx)
{
    auto delta = [](std::size_t a, std::size_t b) { return a == b ? 1.0 : 0.0; };
    switch (idx.size())
    {
        case 1:
            return z[idx[0]];
        case 2: {
            auto const i = idx[0], j = idx[1];
            return z[i] * z[j] - delta(i, j);
        }
        case 3: {
            auto const i = idx[0], j = idx[1], k = idx[2];
            return z[i] * z[j] * z[k] - z[i] * delta(j, k) - z[j] * delta(i, k)
                   - z[k] * delta(i, j);
        }
        case 4: {
            auto const i = idx[0], j = idx[1], k = idx[2], l = idx[3];
            double const quartic = z[i] * z[j] * z[k] * z[l];
            double const quadratic = z[i] * z[j] * delta(k, l) + z[i] * z[k] * delta(j, l)
                                     + z[i] * z[l] * delta(j, k) + z[j] * z[k] * delta(i, l)
                                     + z[j] * z[l] * delta(i, k) + z[k] * z[l] * delta(i, j);
            double const constant = delta(i, j) * delta(k, l) + delta(i, k) * delta(j, l)
                                    + delta(i, l) * delta(j, k);
            return quartic - quadratic + constant;
        }
        default:
            throw ValidationError("hermite: unsupported order");
    }
}

// ∇^(n) log p for a Gaussian mixture. Component moments ∇^k N_h / N_h come
// from the exponential Faà di Bruno sum over pairings of the quadratic
// exponent; the log-derivatives are their mixed cumulants.
LogDerivatives gmm_log_derivatives(GaussianMixture const& gmm,
                                   std::span<double const> x,
                                   std::size_t max_order)
{
    std::size_t const d = gmm.dim();
    std::size_t const k = gmm.components();
    auto const logs = joint_log_terms(gmm, x);
    auto const resp = softmax_from_logs(logs, log_sum_exp(logs));

    // grad and diagonal Hessian of log N_h.
    std::vector<std::vector<double>> grad(k, std::vector<double>(d));
    std::vector<std::vector<double>> hess(k, std::vector<double>(d));
    for (std::size_t h = 0; h < k; ++h)
        for (std::size_t i = 0; i < d; ++i)
        {
            double const inv_var = 1.0 / gmm.variances()[h][i];
            grad[h][i] = -(x[i] - gmm.means()[h][i]) * inv_var;
            hess[h][i] = -inv_var;
        }

    std::vector<DenseTensor> moments;
    moments.reserve(max_order);
    for (std::size_t n = 1; n <= max_order; ++n)
    {
        auto const& parts = detail::set_partitions(n);
        moments.push_back(detail::fill_symmetric(d, n, [&](std::span<std::size_t const> idx) {
            double s = 0.0;
            for (std::size_t h = 0; h < k; ++h)
            {
                double mh = 0.0;
                for (auto const& part : parts)
                {
                    double prod = 1.0;
                    for (auto const& block : part)
                    {
                        if (block.size() == 1)
                            prod *= grad[h][idx[block[0]]];
                        else if (block.size() == 2 && idx[block[0]] == idx[block[1]])
                            prod *= hess[h][idx[block[0]]];
                        else
                        {
                            prod = 0.0;
                            break;
                        }
                    }
                    mh += prod;
                }
                s += resp[h] * mh;
            }
            return s;
        }));
    }

    LogDerivatives out;
    for (std::size_t n = 1; n <= max_order; ++n)
    {
        auto const& parts = detail::set_partitions(n);
        std::vector<std::size_t> sub;
        out.by_order.push_back(detail::fill_symmetric(d, n, [&](std::span<std::size_t const> idx) {
            double s = 0.0;
            for (auto const& part : parts)
            {
                // (-1)^{b-1} (b-1)!
                double coef = 1.0;
                for (std::size_t b = 1; b < part.size(); ++b)
                    coef *= -static_cast<double>(b);
                double prod = coef;
                for (auto const& block : part)
                {
                    sub.clear();
                    for (auto pos : block)
                        sub.push_back(idx[pos]);
                    prod *= moments[block.size() - 1].at(sub);
                }
                s += prod;
            }
            return s;
        }));
        out.vanishes.push_back(false);
    }
    return out;
}

}  // namespace

//---------------------------------------------------------------------------//
// ScoreOrder
//---------------------------------------------------------------------------//

ScoreOrder::ScoreOrder(std::size_t m) : m_(m)
{
    if (m < 1 || m > kMax)
        throw ValidationError("score order must lie in 1..4, got " + std::to_string(m));
}

//---------------------------------------------------------------------------//
// GaussianMixture
//---------------------------------------------------------------------------//

GaussianMixture::GaussianMixture(std::vector<double> weights,
                                 std::vector<std::vector<double>> means)
    : GaussianMixture(weights,
                      means,
                      std::vector<std::vector<double>>(
                          means.size(),
                          std::vector<double>(means.empty() ? 0 : means.front().size(), 1.0)))
{
}

GaussianMixture::GaussianMixture(std::vector<double> weights,
                                 std::vector<std::vector<double>> means,
                                 std::vector<std::vector<double>> variances)
    : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances))
{
    if (weights_.empty())
        throw ValidationError("GaussianMixture: no components");
    if (means_.size() != weights_.size() || variances_.size() != weights_.size())
        throw ValidationError("GaussianMixture: component counts disagree");
    double total = 0.0;
    for (double w : weights_)
    {
        if (!(w > 0.0) || !std::isfinite(w))
            throw ValidationError("GaussianMixture: weights must be positive");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ValidationError("GaussianMixture: weights must sum to 1");
    std::size_t const d = means_.front().size();
    if (d == 0)
        throw ValidationError("GaussianMixture: zero dimension");
    for (std::size_t h = 0; h < weights_.size(); ++h)
    {
        if (means_[h].size() != d || variances_[h].size() != d)
            throw ShapeError("GaussianMixture: component dimensions disagree");
        double ln = 0.0;
        for (std::size_t i = 0; i < d; ++i)
        {
            double const v = variances_[h][i];
            if (!(v > 0.0) || !std::isfinite(v) || !std::isfinite(means_[h][i]))
                throw ValidationError("GaussianMixture: bad mean or variance");
            identity_ = identity_ && v == 1.0;
            ln -= 0.5 * (kLog2Pi + std::log(v));
        }
        log_norm_.push_back(ln);
    }
}

double GaussianMixture::component_log_density(std::size_t h, std::span<double const> x) const
{
    double q = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        double const r = x[i] - means_[h][i];
        q += r * r / variances_[h][i];
    }
    return log_norm_[h] - 0.5 * q;
}

GaussianMixture GaussianMixture::with_weights(std::vector<double> weights) const
{
    return GaussianMixture(std::move(weights), means_, variances_);
}

//---------------------------------------------------------------------------//
// DensityModel
//---------------------------------------------------------------------------//

DensityModel DensityModel::standard_gaussian(std::size_t d)
{
    if (d == 0)
        throw ValidationError("standard_gaussian: zero dimension");
    return DensityModel(StandardGaussian{d});
}

DensityModel DensityModel::mixture(GaussianMixture gmm)
{
    return DensityModel(std::move(gmm));
}

DensityModel DensityModel::exp_family(PolyFunction energy)
{
    if (!energy.scalar_output())
        throw ValidationError("exp_family: energy must be scalar-valued");
    return DensityModel(ExpFamily{std::move(energy)});
}

DensityModel DensityModel::affine(DensityModel base,
                                  DenseTensor const& a,
                                  std::span<double const> b)
{
    std::size_t const d = base.dim();
    if (a.order() != 2 || a.dim(0) != d || a.dim(1) != d)
        throw ShapeError("affine: matrix must be d x d");
    if (b.size() != d)
        throw ShapeError("affine: shift must have length d");
    if (!a.all_finite())
        throw ValidationError("affine: non-finite matrix entry");

    Eigen::MatrixXd m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            m(i, j) = a(i, j);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    auto const& sv = svd.singularValues();
    double const smax = sv(0);
    double const smin = sv(sv.size() - 1);
    if (!(smin > 0.0) || smax / smin >= 1e12)
        throw ValidationError("affine: matrix is singular or ill-conditioned");

    Eigen::MatrixXd inv = svd.matrixV() * sv.cwiseInverse().asDiagonal()
                          * svd.matrixU().transpose();
    DenseTensor inverse({d, d});
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            inverse(i, j) = inv(i, j);

    AffineOf aff;
    aff.base = std::make_shared<DensityModel const>(std::move(base));
    aff.matrix = a;
    aff.inverse = std::move(inverse);
    aff.shift.assign(b.begin(), b.end());
    aff.log_abs_det = sv.array().log().sum();
    return DensityModel(std::move(aff));
}

std::size_t DensityModel::dim() const
{
    return std::visit(
        [](auto const& m) -> std::size_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StandardGaussian>)
                return m.dim;
            else if constexpr (std::is_same_v<T, AffineOf>)
                return m.shift.size();
            else
                return m.dim();
        },
        v_);
}

//---------------------------------------------------------------------------//
// Densities and derivatives
//---------------------------------------------------------------------------//

LogDensity log_density(DensityModel const& model, std::span<double const> x)
{
    require_point(x, model.dim(), "log_density");
    LogDensity out = std::visit(
        [&](auto const& m) -> LogDensity {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StandardGaussian>)
            {
                double q = 0.0;
                for (double v : x)
                    q += v * v;
                return {-0.5 * q - 0.5 * static_cast<double>(m.dim) * kLog2Pi, true};
            }
            else if constexpr (std::is_same_v<T, GaussianMixture>)
            {
                auto const logs = joint_log_terms(m, x);
                return {log_sum_exp(logs), true};
            }
            else if constexpr (std::is_same_v<T, ExpFamily>)
            {
                double e = 0.0;
                m.energy.evaluate(x, std::span<double>(&e, 1));
                return {-e, false};
            }
            else
            {
                auto const pre = affine_preimage(m, x);
                auto base = log_density(*m.base, pre);
                base.value -= m.log_abs_det;
                return base;
            }
        },
        model.variant());
    if (!(out.value >= kLogFloor))
        throw DegeneratePointError("density below 1e-300: score undefined");
    return out;
}

LogDerivatives log_density_derivatives(DensityModel const& model,
                                       std::span<double const> x,
                                       std::size_t max_order)
{
    require_point(x, model.dim(), "log_density_derivatives");
    std::size_t const d = model.dim();
    return std::visit(
        [&](auto const& m) -> LogDerivatives {
            using T = std::decay_t<decltype(m)>;
            LogDerivatives out;
            if constexpr (std::is_same_v<T, StandardGaussian>)
            {
                for (std::size_t n = 1; n <= max_order; ++n)
                {
                    if (n == 1)
                    {
                        DenseTensor g({d});
                        for (std::size_t i = 0; i < d; ++i)
                            g[i] = -x[i];
                        out.by_order.push_back(std::move(g));
                    }
                    else if (n == 2)
                    {
                        out.by_order.push_back(-1.0 * DenseTensor::identity(d));
                    }
                    else
                    {
                        out.by_order.push_back(DenseTensor::cube(d, n));
                    }
                    out.vanishes.push_back(n > 2);
                }
                return out;
            }
            else if constexpr (std::is_same_v<T, GaussianMixture>)
            {
                return gmm_log_derivatives(m, x, max_order);
            }
            else if constexpr (std::is_same_v<T, ExpFamily>)
            {
                for (std::size_t n = 1; n <= max_order; ++n)
                {
                    out.by_order.push_back(-1.0 * m.energy.derivative(x, n));
                    out.vanishes.push_back(n > m.energy.degree());
                }
                return out;
            }
            else
            {
                auto const pre = affine_preimage(m, x);
                auto base = log_density_derivatives(*m.base, pre, max_order);
                for (std::size_t n = 0; n < max_order; ++n)
                {
                    if (!base.vanishes[n])
                        base.by_order[n] = pull_back(base.by_order[n], m.inverse);
                }
                return base;
            }
        },
        model.variant());
}

DenseTensor score(DensityModel const& model, std::span<double const> x, ScoreOrder m)
{
    (void)log_density(model, x);
    auto const ell = log_density_derivatives(model, x, m.value());
    return detail::evaluate_score_recursion(m.value(), model.dim(), ell.by_order, ell.vanishes);
}

DenseTensor hermite(std::span<double const> x, ScoreOrder m)
{
    return detail::fill_symmetric(x.size(), m.value(), [&](std::span<std::size_t const> idx) {
        return hermite_entry(x, idx);
    });
}

DenseTensor score_explicit(DensityModel const& model, std::span<double const> x, ScoreOrder m)
{
    (void)log_density(model, x);
    std::size_t const order = m.value();
    return std::visit(
        [&](auto const& mdl) -> DenseTensor {
            using T = std::decay_t<decltype(mdl)>;
            if constexpr (std::is_same_v<T, StandardGaussian>)
            {
                return hermite(x, m);
            }
            else if constexpr (std::is_same_v<T, GaussianMixture>)
            {
                std::size_t const d = mdl.dim();
                std::size_t const k = mdl.components();
                auto const resp = gmm_posterior(mdl, x);
                std::vector<std::vector<double>> z(k, std::vector<double>(d));
                std::vector<std::vector<double>> inv_sd(k, std::vector<double>(d));
                for (std::size_t h = 0; h < k; ++h)
                    for (std::size_t i = 0; i < d; ++i)
                    {
                        double const sd = std::sqrt(mdl.variances()[h][i]);
                        z[h][i] = (x[i] - mdl.means()[h][i]) / sd;
                        inv_sd[h][i] = 1.0 / sd;
                    }
                return detail::fill_symmetric(d, order, [&](std::span<std::size_t const> idx) {
                    double s = 0.0;
                    for (std::size_t h = 0; h < k; ++h)
                    {
                        double scale = resp[h];
                        for (auto i : idx)
                            scale *= inv_sd[h][i];
                        s += scale * hermite_entry(z[h], idx);
                    }
                    return s;
                });
            }
            else if constexpr (std::is_same_v<T, ExpFamily>)
            {
                throw UnsupportedError(
                    "score_explicit: exponential family has no normalized density");
            }
            else
            {
                auto const pre = affine_preimage(mdl, x);
                return symmetrize(pull_back(score_explicit(*mdl.base, pre, m), mdl.inverse));
            }
        },
        model.variant());
}

std::vector<double> gmm_posterior(GaussianMixture const& gmm, std::span<double const> x)
{
    require_point(x, gmm.dim(), "gmm_posterior");
    auto const logs = joint_log_terms(gmm, x);
    double const lse = log_sum_exp(logs);
    if (!(lse >= kLogFloor))
        throw DegeneratePointError("gmm_posterior: density below 1e-300");
    return softmax_from_logs(logs, lse);
}

DenseTensor parametric_score_gaussian_mean(std::span<double const> x,
                                           std::span<double const> mu,
                                           ScoreOrder m)
{
    std::size_t const d = mu.size();
    require_point(x, d, "parametric_score_gaussian_mean");
    // Derivatives of log N(x; μ, I) with respect to μ.
    std::vector<DenseTensor> ell;
    std::vector<bool> vanishes;
    for (std::size_t n = 1; n <= m.value(); ++n)
    {
        if (n == 1)
        {
            DenseTensor g({d});
            for (std::size_t i = 0; i < d; ++i)
                g[i] = x[i] - mu[i];
            ell.push_back(std::move(g));
        }
        else if (n == 2)
        {
            ell.push_back(-1.0 * DenseTensor::identity(d));
        }
        else
        {
            ell.push_back(DenseTensor::cube(d, n));
        }
        vanishes.push_back(n > 2);
    }
    return detail::evaluate_score_recursion(m.value(), d, ell, vanishes);
}

DenseTensor transform_score_affine(DensityModel const& model,
                                   DenseTensor const& a,
                                   std::span<double const> b,
                                   std::span<double const> t,
                                   ScoreOrder m)
{
    return score(DensityModel::affine(model, a, b), t, m);
}

std::vector<double> selftaught_refit_weights(GaussianMixture const& components,
                                             SampleMatrix const& target,
                                             RefitOptions const& options)
{
    std::size_t const k = components.components();
    if (target.rows == 0)
        throw FitError("selftaught_refit_weights: no target samples");
    if (target.cols != components.dim())
        throw ShapeError("selftaught_refit_weights: sample dimension mismatch");

    std::vector<double> log_comp;  // usable rows x k
    for (std::size_t i = 0; i < target.rows; ++i)
    {
        auto const x = target.row(i);
        std::vector<double> row(k);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t h = 0; h < k; ++h)
        {
            row[h] = components.component_log_density(h, x);
            best = std::max(best, row[h]);
        }
        if (best >= kLogFloor)
            log_comp.insert(log_comp.end(), row.begin(), row.end());
    }
    std::size_t const n = log_comp.size() / k;
    if (n == 0)
        throw FitError("selftaught_refit_weights: every sample is degenerate");

    std::vector<double> w(k, 1.0 / static_cast<double>(k));
    std::vector<double> logs(k), next(k);
    for (std::size_t it = 0; it < options.max_iterations; ++it)
    {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
        {
            for (std::size_t h = 0; h < k; ++h)
                logs[h] = std::log(w[h]) + log_comp[i * k + h];
            double const lse = log_sum_exp(logs);
            for (std::size_t h = 0; h < k; ++h)
                next[h] += std::exp(logs[h] - lse);
        }
        double change = 0.0;
        for (std::size_t h = 0; h < k; ++h)
        {
            next[h] /= static_cast<double>(n);
            change = std::max(change, std::abs(next[h] - w[h]));
        }
        w = next;
        if (change < options.tolerance)
            break;
    }
    // Keep weights strictly positive and exactly normalized.
    double total = 0.0;
    for (auto& v : w)
    {
        v = std::max(v, 1e-300);
        total += v;
    }
    for (auto& v : w)
        v /= total;
    return w;
}

//---------------------------------------------------------------------------//
// Sampling
//---------------------------------------------------------------------------//

namespace {

void draw_into(DensityModel const& model, SampleMatrix& out, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::visit(
        [&](auto const& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StandardGaussian>)
            {
                for (double& v : out.data)
                    v = normal(rng);
            }
            else if constexpr (std::is_same_v<T, GaussianMixture>)
            {
                std::discrete_distribution<std::size_t> pick(m.weights().begin(),
                                                             m.weights().end());
                for (std::size_t i = 0; i < out.rows; ++i)
                {
                    std::size_t const h = pick(rng);
                    auto row = out.row(i);
                    for (std::size_t j = 0; j < out.cols; ++j)
                        row[j] = m.means()[h][j] + std::sqrt(m.variances()[h][j]) * normal(rng);
                }
            }
            else if constexpr (std::is_same_v<T, ExpFamily>)
            {
                throw UnsupportedError("draw_samples: no sampler for exponential family");
            }
            else
            {
                draw_into(*m.base, out, rng);
                std::vector<double> x(out.cols);
                for (std::size_t i = 0; i < out.rows; ++i)
                {
                    auto row = out.row(i);
                    std::copy(row.begin(), row.end(), x.begin());
                    for (std::size_t r = 0; r < out.cols; ++r)
                    {
                        double s = m.shift[r];
                        for (std::size_t c = 0; c < out.cols; ++c)
                            s += m.matrix(r, c) * x[c];
                        row[r] = s;
                    }
                }
            }
        },
        model.variant());
}

}  // namespace

SampleMatrix draw_samples(DensityModel const& model, std::size_t n, std::uint64_t seed)
{
    SampleMatrix out(n, model.dim());
    std::mt19937_64 rng(seed);
    draw_into(model, out, rng);
    return out;
}

}  // namespace hosf
