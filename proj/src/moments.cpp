#include "hosf/moments.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "hosf/detail/reduce.hpp"
#include "hosf/detail/symmetric.hpp"
#include "hosf/error.hpp"
#include "hosf/quadrature.hpp"

namespace hosf {
namespace {

DenseTensor::Dims moment_dims(std::size_t p, std::size_t d, std::size_t m)
{
    DenseTensor::Dims dims;
    if (p != 1)
        dims.push_back(p);
    dims.insert(dims.end(), m, d);
    return dims;
}

void require_finite(SampleMatrix const& s, char const* what)
{
    for (double v : s.data)
        if (!std::isfinite(v))
            throw ValidationError(std::string(what) + " contains non-finite values");
}

// Mean of y_i ⊗ score(x_i) over rows, reduced deterministically.
template<class ScoreFn>
MomentEstimate labeled_moment(SampleMatrix const& x,
                              SampleMatrix const& y,
                              std::size_t d,
                              std::size_t m,
                              std::size_t workers,
                              ScoreFn&& score_at)
{
    std::size_t const p = y.cols;
    auto const dims = moment_dims(p, d, m);
    DenseTensor value(dims);
    std::size_t const slice = value.size() / p;

    auto acc = detail::chunked_moments(x.rows, value.size(), workers, [&](std::size_t i, std::span<double> out) {
        DenseTensor s;
        try
        {
            s = score_at(x.row(i));
        }
        catch (DegeneratePointError const& e)
        {
            throw DegeneratePointError(e.what(), i);
        }
        auto const yi = y.row(i);
        for (std::size_t o = 0; o < p; ++o)
            for (std::size_t j = 0; j < slice; ++j)
                out[o * slice + j] = yi[o] * s[j];
    });

    MomentEstimate est{std::move(value), DenseTensor(dims), acc.n};
    std::copy(acc.mean.begin(), acc.mean.end(), est.value.data().begin());
    if (acc.n > 1)
    {
        double const n = static_cast<double>(acc.n);
        for (std::size_t j = 0; j < acc.m2.size(); ++j)
            est.std_error[j] = std::sqrt(std::max(acc.m2[j], 0.0) / (n - 1.0) / n);
    }
    return est;
}

// E[z^k] for z ~ N(0, 1).
double standard_normal_moment(unsigned k)
{
    if (k % 2 == 1)
        return 0.0;
    double r = 1.0;
    for (unsigned j = k; j > 1; j -= 2)
        r *= static_cast<double>(j - 1);
    return r;
}

double binomial(unsigned n, unsigned k)
{
    double r = 1.0;
    for (unsigned j = 1; j <= k; ++j)
        r = r * static_cast<double>(n - k + j) / static_cast<double>(j);
    return r;
}

// Per-piece tables E[x_i^k] for k <= kMaxDegree.
struct MomentTable
{
    double weight;
    std::vector<std::vector<double>> by_coord;
};

std::vector<MomentTable> gaussian_moment_tables(DensityModel const& model)
{
    auto table = [](double w, std::vector<double> const& mean, std::vector<double> const& var) {
        MomentTable t{w, {}};
        for (std::size_t i = 0; i < mean.size(); ++i)
        {
            double const sd = std::sqrt(var[i]);
            std::vector<double> row(PolyFunction::kMaxDegree + 1, 0.0);
            for (unsigned e = 0; e <= PolyFunction::kMaxDegree; ++e)
                for (unsigned k = 0; k <= e; k += 2)
                    row[e] += binomial(e, k) * std::pow(mean[i], e - k) * std::pow(sd, k)
                              * standard_normal_moment(k);
            t.by_coord.push_back(std::move(row));
        }
        return t;
    };
    if (auto const* g = model.get_if<StandardGaussian>())
        return {table(1.0, std::vector<double>(g->dim, 0.0), std::vector<double>(g->dim, 1.0))};
    if (auto const* mix = model.get_if<GaussianMixture>())
    {
        std::vector<MomentTable> out;
        for (std::size_t h = 0; h < mix->components(); ++h)
            out.push_back(table(mix->weights()[h], mix->means()[h], mix->variances()[h]));
        return out;
    }
    throw UnsupportedError("analytic expectation needs a Gaussian or Gaussian-mixture model");
}

DenseTensor analytic_derivative(PolyFunction const& g, DensityModel const& model, std::size_t m)
{
    auto const tables = gaussian_moment_tables(model);
    std::size_t const d = g.input_dim();
    std::size_t const p = g.output_dim();
    DenseTensor out(moment_dims(p, d, m));
    std::size_t const slice = out.size() / p;
    std::vector<unsigned> e;
    for (std::size_t o = 0; o < p; ++o)
    {
        auto const part = detail::fill_symmetric(d, m, [&](std::span<std::size_t const> idx) {
            double s = 0.0;
            for (auto const& term : g.terms())
            {
                if (term.output != o)
                    continue;
                e = term.exponents;
                double const mult = differentiate_monomial(e, idx);
                if (mult == 0.0)
                    continue;
                double expect = 0.0;
                for (auto const& t : tables)
                {
                    double prod = t.weight;
                    for (std::size_t i = 0; i < d && prod != 0.0; ++i)
                        prod *= t.by_coord[i][e[i]];
                    expect += prod;
                }
                s += term.coef * mult * expect;
            }
            return s;
        });
        std::copy(part.data().begin(), part.data().end(), out.data().begin() + o * slice);
    }
    return out;
}

}  // namespace

LabeledDataset::LabeledDataset(SampleMatrix inputs, SampleMatrix labels)
    : x(std::move(inputs)), y(std::move(labels))
{
    if (x.rows == 0)
        throw ValidationError("dataset: no rows");
    if (x.rows != y.rows)
        throw ShapeError("dataset: input and label row counts differ");
    if (x.cols == 0 || y.cols == 0)
        throw ShapeError("dataset: zero input or label width");
    require_finite(x, "dataset inputs");
    require_finite(y, "dataset labels");
}

MomentEstimate cross_moment(LabeledDataset const& data,
                            DensityModel const& model,
                            ScoreOrder m,
                            std::size_t workers)
{
    std::size_t const d = model.dim();
    if (data.input_dim() != d)
        throw ShapeError("cross_moment: data dimension " + std::to_string(data.input_dim())
                         + " does not match model dimension " + std::to_string(d));
    return labeled_moment(data.x, data.y, d, m.value(), workers, [&](std::span<double const> xi) {
        return score(model, xi, m);
    });
}

DenseTensor expected_derivative(PolyFunction const& g,
                                DensityModel const& model,
                                ScoreOrder m,
                                ExpectationMethod method,
                                ExpectationOptions const& options)
{
    if (g.input_dim() != model.dim())
        throw ShapeError("expected_derivative: G and model dimensions differ");
    std::size_t const order = m.value();
    switch (method)
    {
        case ExpectationMethod::analytic:
            return analytic_derivative(g, model, order);
        case ExpectationMethod::quadrature:
            return quadrature_expectation(
                model,
                [&](std::span<double const> x) { return g.derivative(x, order); },
                options.quadrature_nodes);
        case ExpectationMethod::monte_carlo: {
            auto const xs = draw_samples(model, options.samples, options.seed);
            DenseTensor out(moment_dims(g.output_dim(), g.input_dim(), order));
            auto acc = detail::chunked_moments(xs.rows, out.size(), options.workers,
                                               [&](std::size_t i, std::span<double> row) {
                                                   auto const v = g.derivative(xs.row(i), order);
                                                   std::copy(v.data().begin(), v.data().end(), row.begin());
                                               });
            std::copy(acc.mean.begin(), acc.mean.end(), out.data().begin());
            return out;
        }
    }
    throw ValidationError("expected_derivative: unknown method");
}

ExpectationMethod default_oracle(DensityModel const& model)
{
    if (model.get_if<StandardGaussian>() || model.get_if<GaussianMixture>())
        return ExpectationMethod::analytic;
    if (auto const* aff = model.get_if<AffineOf>())
    {
        bool const gaussian_base = aff->base->get_if<StandardGaussian>()
                                   || aff->base->get_if<GaussianMixture>();
        if (gaussian_base && model.dim() <= kQuadratureMaxDim)
            return ExpectationMethod::quadrature;
    }
    throw UnsupportedError("no exact oracle for E[∇^m G] under this model");
}

void fill_gaps(SteinReport& report)
{
    auto const& est = report.lhs;
    if (est.value.dims() != report.rhs.dims())
        throw ShapeError("stein gap: estimate and oracle shapes differ");
    report.max_abs_gap = 0.0;
    report.max_gap_in_se = 0.0;
    for (std::size_t j = 0; j < est.value.size(); ++j)
    {
        double const gap = std::abs(est.value[j] - report.rhs[j]);
        double const se = est.std_error[j];
        double ratio = 0.0;
        if (se > 0.0)
            ratio = gap / se;
        else if (gap > 1e-12)
            ratio = std::numeric_limits<double>::infinity();
        report.max_abs_gap = std::max(report.max_abs_gap, gap);
        report.max_gap_in_se = std::max(report.max_gap_in_se, ratio);
    }
}

LabeledDataset label_samples(SampleMatrix x,
                             PolyFunction const& g,
                             double noise_sd,
                             std::uint64_t seed)
{
    if (g.input_dim() != x.cols)
        throw ShapeError("label_samples: G input dimension does not match samples");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
        throw ValidationError("label_samples: noise level must be finite and non-negative");
    std::size_t const p = g.output_dim();
    SampleMatrix y(x.rows, p);
    for (std::size_t i = 0; i < x.rows; ++i)
        g.evaluate(x.row(i), y.row(i));
    if (noise_sd > 0.0)
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, noise_sd);
        for (double& v : y.data)
            v += normal(rng);
    }
    return LabeledDataset(std::move(x), std::move(y));
}

SteinReport stein_residual(DensityModel const& model,
                           PolyFunction const& g,
                           ScoreOrder m,
                           std::size_t n_samples,
                           std::uint64_t seed,
                           std::size_t workers)
{
    if (g.input_dim() != model.dim())
        throw ShapeError("stein_residual: G and model dimensions differ");
    SteinReport report;
    report.oracle = default_oracle(model);
    auto const data = label_samples(draw_samples(model, n_samples, seed), g, 0.0, seed);
    report.lhs = cross_moment(data, model, m, workers);
    report.rhs = expected_derivative(g, model, m, report.oracle);
    fill_gaps(report);
    return report;
}

SteinReport parametric_stein_residual(std::span<double const> mu0,
                                      PolyFunction const& g0,
                                      ScoreOrder m,
                                      std::size_t n_samples,
                                      std::uint64_t seed,
                                      std::size_t workers)
{
    std::size_t const d = mu0.size();
    if (g0.input_dim() != d)
        throw ShapeError("parametric_stein_residual: G0 and mean dimensions differ");
    auto const standard = DensityModel::standard_gaussian(d);
    SampleMatrix x = draw_samples(standard, n_samples, seed);
    SampleMatrix y(x.rows, g0.output_dim());
    std::vector<double> centered(d);
    for (std::size_t i = 0; i < x.rows; ++i)
    {
        auto row = x.row(i);
        for (std::size_t j = 0; j < d; ++j)
            row[j] += mu0[j];
        for (std::size_t j = 0; j < d; ++j)
            centered[j] = row[j] - mu0[j];
        g0.evaluate(centered, y.row(i));
    }

    SteinReport report;
    report.oracle = ExpectationMethod::analytic;
    report.lhs = labeled_moment(x, y, d, m.value(), workers, [&](std::span<double const> xi) {
        return parametric_score_gaussian_mean(xi, mu0, m);
    });
    report.rhs = expected_derivative(g0, standard, m, ExpectationMethod::analytic);
    if (m.value() % 2 == 1)
        report.rhs *= -1.0;
    fill_gaps(report);
    return report;
}

}  // namespace hosf
