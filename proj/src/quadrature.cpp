#include "hosf/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "hosf/detail/symmetric.hpp"
#include "hosf/error.hpp"

namespace hosf {

QuadratureRule gauss_hermite(std::size_t n)
{
    if (n == 0)
        throw ValidationError("gauss_hermite: need at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 1; k < n; ++k)
    {
        double const b = std::sqrt(static_cast<double>(k));
        jacobi(k - 1, k) = b;
        jacobi(k, k - 1) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        rule.nodes[i] = eig.eigenvalues()(i);
        double const v = eig.eigenvectors()(0, i);
        rule.weights[i] = v * v;
    }
    // Nodes are symmetric about zero; enforce it exactly.
    for (std::size_t i = 0; i < n / 2; ++i)
    {
        double const x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
        double const w = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1)
        rule.nodes[n / 2] = 0.0;
    return rule;
}

namespace {

// Gaussian pieces of the model: weight, mean, standard deviations.
struct GaussianPiece
{
    double weight;
    std::vector<double> mean;
    std::vector<double> sd;
};

std::vector<GaussianPiece> gaussian_pieces(DensityModel const& model)
{
    if (auto const* g = model.get_if<StandardGaussian>())
        return {GaussianPiece{1.0, std::vector<double>(g->dim, 0.0), std::vector<double>(g->dim, 1.0)}};
    if (auto const* mix = model.get_if<GaussianMixture>())
    {
        std::vector<GaussianPiece> out;
        for (std::size_t h = 0; h < mix->components(); ++h)
        {
            GaussianPiece p{mix->weights()[h], mix->means()[h], {}};
            for (double v : mix->variances()[h])
                p.sd.push_back(std::sqrt(v));
            out.push_back(std::move(p));
        }
        return out;
    }
    throw UnsupportedError("quadrature: model has no Gaussian quadrature rule");
}

}  // namespace

DenseTensor quadrature_expectation(DensityModel const& model,
                                   std::function<DenseTensor(std::span<double const>)> const& f,
                                   std::size_t nodes)
{
    std::size_t const d = model.dim();
    if (d > kQuadratureMaxDim)
        throw ValidationError("quadrature: dimension above 3, use the analytic path");

    AffineOf const* aff = model.get_if<AffineOf>();
    auto const pieces = gaussian_pieces(aff ? *aff->base : model);
    auto const rule = gauss_hermite(nodes);

    DenseTensor total;
    bool first = true;
    std::vector<double> x(d), t(d);
    for (auto const& piece : pieces)
    {
        detail::for_each_index(std::vector<std::size_t>(d, nodes), [&](std::span<std::size_t const> idx) {
            double w = piece.weight;
            for (std::size_t i = 0; i < d; ++i)
            {
                w *= rule.weights[idx[i]];
                x[i] = piece.mean[i] + piece.sd[i] * rule.nodes[idx[i]];
            }
            std::span<double const> point = x;
            if (aff)
            {
                for (std::size_t r = 0; r < d; ++r)
                {
                    double s = aff->shift[r];
                    for (std::size_t c = 0; c < d; ++c)
                        s += aff->matrix(r, c) * x[c];
                    t[r] = s;
                }
                point = t;
            }
            DenseTensor v = f(point);
            if (first)
            {
                total = DenseTensor(v.dims());
                first = false;
            }
            for (std::size_t j = 0; j < v.size(); ++j)
                total[j] += w * v[j];
        });
    }
    return total;
}

}  // namespace hosf
