#include "hosf/decomp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hosf/detail/reduce.hpp"

namespace hosf {
namespace {

double norm(std::span<double const> v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

double dot(std::span<double const> a, std::span<double const> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

// min over sign of ‖a - b‖.
double sign_free_distance(std::span<double const> a, std::span<double const> b)
{
    double plus = 0.0, minus = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        plus += (a[i] - b[i]) * (a[i] - b[i]);
        minus += (a[i] + b[i]) * (a[i] + b[i]);
    }
    return std::sqrt(std::min(plus, minus));
}

std::size_t cube_dim(DenseTensor const& t, char const* op)
{
    if (t.order() != 3 || t.dim(1) != t.dim(0) || t.dim(2) != t.dim(0) || t.dim(0) == 0)
        throw ShapeError(std::string(op) + ": need a cubical order-3 tensor");
    return t.dim(0);
}

// Symmetric copy of t, or a ValidationError when it is clearly asymmetric.
DenseTensor symmetric_input(DenseTensor const& t, double reject_above)
{
    double const defect = symmetry_defect(t);
    if (defect == 0.0)
        return t;
    double const scale = t.max_abs();
    if (defect > reject_above * scale)
        throw ValidationError("decompose: tensor is not symmetric (symmetrize it first)");
    return symmetrize(t);
}

PowerResult run_power(DenseTensor const& t,
                      std::span<double const> u0,
                      std::size_t n,
                      double tol,
                      double t_norm)
{
    PowerResult r;
    r.u.assign(u0.begin(), u0.end());
    double const floor = 1e-14 * t_norm;
    for (std::size_t it = 0; it < n; ++it)
    {
        auto next = contract_fibers(t, r.u, r.u);
        double const len = norm(next);
        if (!(len > floor) || len == 0.0)
            throw BreakdownError("power iteration: T(I,u,u) vanished");
        for (auto& x : next)
            x /= len;
        double const step = sign_free_distance(next, r.u);
        r.u = std::move(next);
        r.iterations = it + 1;
        if (step < tol)
        {
            r.converged = true;
            break;
        }
    }
    r.lambda = contract_all(t, r.u);
    return r;
}

std::vector<std::vector<double>> run_cluster(std::vector<std::vector<double>> candidates,
                                             DenseTensor const& t,
                                             std::size_t n,
                                             double nu,
                                             double tol,
                                             double t_norm)
{
    std::vector<std::vector<double>> centers;
    double const threshold = nu / 2.0;
    while (!candidates.empty())
    {
        std::size_t best = 0;
        double best_val = -1.0;
        for (std::size_t i = 0; i < candidates.size(); ++i)
        {
            double const v = std::abs(contract_all(t, candidates[i]));
            if (v > best_val)
            {
                best_val = v;
                best = i;
            }
        }
        std::vector<double> center;
        try
        {
            center = run_power(t, candidates[best], n, tol, t_norm).u;
        }
        catch (BreakdownError const&)
        {
            candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
            continue;
        }
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
        std::erase_if(candidates, [&](std::vector<double> const& u) {
            return std::abs(dot(u, center)) > threshold;
        });
        bool const duplicate = std::any_of(centers.begin(), centers.end(), [&](auto const& c) {
            return std::abs(dot(c, center)) > threshold;
        });
        if (!duplicate)
            centers.push_back(std::move(center));
    }
    return centers;
}

void sort_by_weight(std::vector<Component>& comps)
{
    std::stable_sort(comps.begin(), comps.end(), [](Component const& a, Component const& b) {
        return std::abs(a.weight) > std::abs(b.weight);
    });
}

Eigen::MatrixXd to_eigen(DenseTensor const& m)
{
    Eigen::MatrixXd out(m.dim(0), m.dim(1));
    for (std::size_t i = 0; i < m.dim(0); ++i)
        for (std::size_t j = 0; j < m.dim(1); ++j)
            out(i, j) = m(i, j);
    return out;
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> symmetric_eigen(DenseTensor const& m, char const* op)
{
    if (m.order() != 2 || m.dim(0) != m.dim(1) || m.dim(0) == 0)
        throw ShapeError(std::string(op) + ": need a square matrix");
    if (!m.all_finite())
        throw ValidationError(std::string(op) + ": non-finite matrix entry");
    Eigen::MatrixXd a = to_eigen(m);
    Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    if ((a - sym).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff()))
        throw ValidationError(std::string(op) + ": matrix is not symmetric");
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym);
}

}  // namespace

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//

std::size_t DecompConfig::starts() const noexcept
{
    return inits != 0 ? inits : std::max<std::size_t>(50, 10 * k);
}

void DecompConfig::validate() const
{
    if (k < 1)
        throw ValidationError("decompose: k must be at least 1");
    if (starts() < k)
        throw ValidationError("decompose: need at least k initializations");
    if (iterations < 1)
        throw ValidationError("decompose: need at least one iteration");
    if (!(nu > 0.0 && nu <= 2.0))
        throw ValidationError("decompose: nu must lie in (0, 2]");
    if (!(tol > 0.0))
        throw ValidationError("decompose: tolerance must be positive");
}

//---------------------------------------------------------------------------//
// Power iteration and clustering
//---------------------------------------------------------------------------//

PowerResult power_iteration(DenseTensor const& t, std::span<double const> u0, std::size_t n, double tol)
{
    std::size_t const d = cube_dim(t, "power_iteration");
    if (u0.size() != d)
        throw ShapeError("power_iteration: start vector has the wrong length");
    if (std::abs(norm(u0) - 1.0) > 1e-8)
        throw ValidationError("power_iteration: start vector must have unit norm");
    if (!(tol > 0.0))
        throw ValidationError("power_iteration: tolerance must be positive");
    double const defect = symmetry_defect(t);
    if (defect > 1e-10 * t.max_abs())
    {
        auto const s = symmetrize(t);
        return run_power(s, u0, n, tol, s.frobenius_norm());
    }
    return run_power(t, u0, n, tol, t.frobenius_norm());
}

std::vector<std::vector<double>> cluster(std::vector<std::vector<double>> candidates,
                                         DenseTensor const& t,
                                         std::size_t n,
                                         double nu,
                                         double tol)
{
    std::size_t const d = cube_dim(t, "cluster");
    for (auto const& c : candidates)
        if (c.size() != d)
            throw ShapeError("cluster: candidate has the wrong length");
    if (!(nu > 0.0 && nu <= 2.0))
        throw ValidationError("cluster: nu must lie in (0, 2]");
    return run_cluster(std::move(candidates), t, n, nu, tol, t.frobenius_norm());
}

std::vector<double> initialize(DenseTensor const& t, DecompConfig const& cfg, std::size_t start_index)
{
    std::size_t const d = cube_dim(t, "initialize");
    std::mt19937_64 rng(cfg.seed + start_index);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto unit = [&] {
        std::vector<double> v(d);
        double len = 0.0;
        while (len == 0.0)
        {
            for (auto& x : v)
                x = normal(rng);
            len = norm(v);
        }
        for (auto& x : v)
            x /= len;
        return v;
    };
    if (cfg.init == InitMethod::random)
        return unit();

    auto const theta = unit();
    Eigen::MatrixXd slice = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t l = 0; l < d; ++l)
                slice(i, j) += t[(i * d + j) * d + l] * theta[l];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(slice, Eigen::ComputeFullU);
    std::vector<double> u(d);
    for (std::size_t i = 0; i < d; ++i)
        u[i] = svd.matrixU()(i, 0);
    double const len = norm(u);
    for (auto& x : u)
        x /= len;
    return u;
}

void canonicalize(Component& c, std::size_t order)
{
    if (c.vector.empty())
        return;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < c.vector.size(); ++i)
        if (std::abs(c.vector[i]) > std::abs(c.vector[arg]))
            arg = i;
    if (c.vector[arg] < 0.0)
    {
        for (auto& x : c.vector)
            x = -x;
        if (order % 2 == 1)
            c.weight = -c.weight;
    }
}

double cp_residual(DenseTensor const& t, std::span<Component const> comps)
{
    if (comps.empty())
        return t.frobenius_norm();
    std::vector<double> w;
    std::vector<std::vector<double>> v;
    for (auto const& c : comps)
    {
        w.push_back(c.weight);
        v.push_back(c.vector);
    }
    return (t - rank1_sum(w, v, 3)).frobenius_norm();
}

DecompositionResult decompose(DenseTensor const& input, DecompConfig const& cfg)
{
    cfg.validate();
    cube_dim(input, "decompose");
    DenseTensor const t = symmetric_input(input, 1e-6);
    double const t_norm = t.frobenius_norm();
    std::size_t const starts = cfg.starts();

    DecompositionResult result;
    result.per_start.resize(starts);
    std::vector<std::vector<double>> finals(starts);
    detail::parallel_chunks(starts, cfg.workers, [&](std::size_t s) {
        auto const u0 = initialize(t, cfg, s);
        try
        {
            auto r = run_power(t, u0, cfg.iterations, cfg.tol, t_norm);
            result.per_start[s] = {r.iterations, r.converged, false};
            finals[s] = std::move(r.u);
        }
        catch (BreakdownError const&)
        {
            result.per_start[s] = {0, false, true};
        }
    });
    std::vector<std::vector<double>> candidates;
    for (auto& f : finals)
        if (!f.empty())
            candidates.push_back(std::move(f));

    auto centers = run_cluster(std::move(candidates), t, cfg.iterations, cfg.nu, cfg.tol, t_norm);
    result.candidates_kept = centers.size();

    std::vector<Component> comps;
    for (auto& c : centers)
        comps.push_back({contract_all(t, c), std::move(c)});
    sort_by_weight(comps);
    if (comps.size() > cfg.k)
        comps.resize(cfg.k);
    for (auto& c : comps)
        canonicalize(c);
    sort_by_weight(comps);
    result.components = std::move(comps);
    result.residual_fro = cp_residual(t, result.components);

    if (result.components.size() < cfg.k)
        throw PartialResultError("decompose: found " + std::to_string(result.components.size())
                                     + " of " + std::to_string(cfg.k) + " components",
                                 std::move(result));
    return result;
}

//---------------------------------------------------------------------------//
// Whitening and the matrix path
//---------------------------------------------------------------------------//

Whitening whiten(DenseTensor const& m2, std::size_t k)
{
    auto const eig = symmetric_eigen(m2, "whiten");
    std::size_t const d = m2.dim(0);
    if (k < 1 || k > d)
        throw ValidationError("whiten: k must lie in 1..d");
    auto const& vals = eig.eigenvalues();
    double const top = vals(static_cast<Eigen::Index>(d - 1));
    double const kth = vals(static_cast<Eigen::Index>(d - k));
    if (!(top > 0.0) || kth < 1e-12 * top)
        throw RankDeficiencyError("whiten: second moment has rank below k");

    Whitening wh{DenseTensor({d, k}), DenseTensor({k, d})};
    for (std::size_t j = 0; j < k; ++j)
    {
        auto const col = static_cast<Eigen::Index>(d - 1 - j);
        double const s = std::sqrt(vals(col));
        for (std::size_t i = 0; i < d; ++i)
        {
            double const u = eig.eigenvectors()(static_cast<Eigen::Index>(i), col);
            wh.w(i, j) = u / s;
            wh.w_pinv(j, i) = u * s;
        }
    }
    return wh;
}

DenseTensor whiten_tensor(DenseTensor const& t, Whitening const& wh)
{
    return multilinear_form(t, wh.w, wh.w, wh.w);
}

std::vector<Component> unwhiten(std::span<Component const> comps, Whitening const& wh)
{
    std::size_t const k = wh.w_pinv.dim(0);
    std::size_t const d = wh.w_pinv.dim(1);
    std::vector<Component> out;
    for (auto const& c : comps)
    {
        if (c.vector.size() != k)
            throw ShapeError("unwhiten: component length does not match the whitening rank");
        Component back{0.0, std::vector<double>(d, 0.0)};
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < k; ++j)
                back.vector[i] += wh.w_pinv(j, i) * c.vector[j];
        double const len = norm(back.vector);
        for (auto& x : back.vector)
            x /= len;
        back.weight = c.weight * len * len * len;
        canonicalize(back);
        out.push_back(std::move(back));
    }
    sort_by_weight(out);
    return out;
}

DecompositionResult decompose_whitened(DenseTensor const& t, DenseTensor const& m2, DecompConfig const& cfg)
{
    cfg.validate();
    std::size_t const d = cube_dim(t, "decompose_whitened");
    if (m2.order() != 2 || m2.dim(0) != d)
        throw ShapeError("decompose_whitened: second moment does not match the tensor");
    if (cfg.k > d)
        throw ValidationError("decompose_whitened: whitening needs k <= d");
    auto const sym = symmetric_input(t, 1e-6);
    auto const wh = whiten(m2, cfg.k);
    auto const tw = symmetrize(whiten_tensor(sym, wh));
    auto finish = [&](DecompositionResult r) {
        r.components = unwhiten(r.components, wh);
        r.residual_fro = cp_residual(sym, r.components);
        return r;
    };
    try
    {
        return finish(decompose(tw, cfg));
    }
    catch (PartialResultError const& e)
    {
        throw PartialResultError(e.what(), finish(e.partial()));
    }
}

std::vector<EigenPair> matrix_decompose(DenseTensor const& m, std::size_t k)
{
    auto const eig = symmetric_eigen(m, "matrix_decompose");
    std::size_t const d = m.dim(0);
    if (k > d)
        throw ValidationError("matrix_decompose: k exceeds the dimension");
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    auto const& vals = eig.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(vals(static_cast<Eigen::Index>(a))) > std::abs(vals(static_cast<Eigen::Index>(b)));
    });
    std::vector<EigenPair> out;
    for (std::size_t j = 0; j < k; ++j)
    {
        auto const col = static_cast<Eigen::Index>(order[j]);
        Component c{vals(col), std::vector<double>(d)};
        for (std::size_t i = 0; i < d; ++i)
            c.vector[i] = eig.eigenvectors()(static_cast<Eigen::Index>(i), col);
        canonicalize(c, 2);
        out.push_back({c.weight, std::move(c.vector)});
    }
    return out;
}

}  // namespace hosf
