#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hosf/density.hpp"
#include "hosf/detail/score_recursion.hpp"
#include "hosf/error.hpp"
#include "oracles.hpp"

using namespace hosf;

namespace {

double const kLog2Pi = std::log(2.0 * std::numbers::pi);

using oracle::fd_score;
using oracle::gmm_density_direct;
using oracle::phi;
using oracle::random_gmm;

DenseTensor sign_flip(DenseTensor t, std::size_t m)
{
    if (m % 2 == 1)
        t *= -1.0;
    return t;
}

}  // namespace

TEST_CASE("score order bounds")
{
    CHECK_THROWS_AS(ScoreOrder(0), ValidationError);
    CHECK_THROWS_AS(ScoreOrder(5), ValidationError);
    CHECK(ScoreOrder(4).value() == 4);
}

TEST_CASE("log_density")
{
    auto const g1 = DensityModel::standard_gaussian(1);
    std::vector<double> const zero{0.0};
    CHECK(log_density(g1, zero).value == doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-15));
    CHECK(log_density(g1, zero).normalized);

    oracle::Rng rng(20);
    auto const g3 = DensityModel::standard_gaussian(3);
    auto const one = DensityModel::mixture(GaussianMixture({1.0}, {{0.0, 0.0, 0.0}}));
    for (int i = 0; i < 10; ++i)
    {
        auto const x = rng.normal_vector(3);
        CHECK(std::abs(log_density(one, x).value - log_density(g3, x).value) <= 1e-12);
    }

    auto const two = DensityModel::mixture(GaussianMixture({0.5, 0.5}, {{-2.0}, {2.0}}));
    double const direct = std::log(0.5 * phi(-2.0) + 0.5 * phi(2.0));
    CHECK(std::abs(log_density(two, zero).value - direct) <= 1e-12);

    std::vector<double> const far{40.0};
    CHECK_THROWS_AS(log_density(g1, far), DegeneratePointError);
    std::vector<double> const wrong{0.0, 0.0};
    CHECK_THROWS_AS(log_density(g1, wrong), ShapeError);
    std::vector<double> const nan{NAN};
    CHECK_THROWS_AS(log_density(g1, nan), ValidationError);

    auto const ef = DensityModel::exp_family(PolyFunction(1, 1, {{0, 0.5, {2}}}));
    CHECK_FALSE(log_density(ef, zero).normalized);
}

TEST_CASE("mixture validation")
{
    CHECK_THROWS_AS(GaussianMixture({0.5, 0.4}, {{0.0}, {1.0}}), ValidationError);
    CHECK_THROWS_AS(GaussianMixture({1.5, -0.5}, {{0.0}, {1.0}}), ValidationError);
    CHECK_THROWS_AS(GaussianMixture({0.5, 0.5}, {{0.0}, {1.0, 2.0}}), ShapeError);
    CHECK_THROWS_AS(GaussianMixture({1.0}, {{0.0}}, {{0.0}}), ValidationError);
    CHECK_THROWS_AS(GaussianMixture({}, {}), ValidationError);
}

TEST_CASE("standard Gaussian scores in one dimension")
{
    auto const g = DensityModel::standard_gaussian(1);
    for (double x : {0.0, 1.0, -1.5})
    {
        std::vector<double> const p{x};
        CHECK(score(g, p, ScoreOrder(1))[0] == doctest::Approx(x));
        CHECK(score(g, p, ScoreOrder(2))[0] == doctest::Approx(x * x - 1.0));
        CHECK(score(g, p, ScoreOrder(3))[0] == doctest::Approx(x * x * x - 3.0 * x));
        CHECK(score(g, p, ScoreOrder(4))[0]
              == doctest::Approx(x * x * x * x - 6.0 * x * x + 3.0));
    }
}

TEST_CASE("first-order score vanishes at a mode")
{
    std::vector<double> const origin{0.0, 0.0};
    auto const g = DensityModel::standard_gaussian(2);
    CHECK(score(g, origin, ScoreOrder(1)).max_abs() == 0.0);

    // Symmetric and unimodal: the mode sits at the origin.
    auto const mix = DensityModel::mixture(GaussianMixture({0.5, 0.5}, {{-0.5, 0.2}, {0.5, -0.2}}));
    CHECK(score(mix, origin, ScoreOrder(1)).max_abs() <= 1e-15);

    std::vector<double> const mu{1.5, -0.25};
    auto const shifted = DensityModel::affine(g, DenseTensor::identity(2), mu);
    CHECK(score(shifted, mu, ScoreOrder(1)).max_abs() == 0.0);
}

TEST_CASE("recursion agrees with explicit form for a mixture")
{
    auto const gmm = DensityModel::mixture(GaussianMixture({0.4, 0.6}, {{1.0, -0.5}, {-0.8, 0.9}}));
    std::vector<double> const x{0.3, -0.7};
    for (std::size_t m = 1; m <= 4; ++m)
    {
        auto const a = score(gmm, x, ScoreOrder(m));
        auto const b = score_explicit(gmm, x, ScoreOrder(m));
        CHECK(max_abs_diff(a, b) <= 1e-10);
    }
}

TEST_CASE("explicit scores")
{
    oracle::Rng rng(21);
    auto const g = DensityModel::standard_gaussian(4);
    for (int i = 0; i < 5; ++i)
    {
        auto const x = rng.normal_vector(4);
        for (std::size_t m = 1; m <= 4; ++m)
            CHECK(score_explicit(g, x, ScoreOrder(m)) == hermite(x, ScoreOrder(m)));
    }

    std::vector<double> const mu{0.7, -1.2, 0.1};
    auto const single = DensityModel::mixture(GaussianMixture({1.0}, {mu}));
    auto const x = rng.normal_vector(3);
    auto const s1 = score_explicit(single, x, ScoreOrder(1));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(s1[i] == doctest::Approx(x[i] - mu[i]).epsilon(1e-14));

    auto const ef = DensityModel::exp_family(PolyFunction(1, 1, {{0, 0.5, {2}}}));
    std::vector<double> const zero{0.0};
    CHECK_THROWS_AS(score_explicit(ef, zero, ScoreOrder(1)), UnsupportedError);
}

TEST_CASE("explicit mixture scores against finite differences of the density")
{
    oracle::Rng rng(22);
    auto const gmm = random_gmm(rng, 2, 3, true);
    auto const model = DensityModel::mixture(gmm);
    auto const density = [&](std::span<double const> p) { return gmm_density_direct(gmm, p); };
    auto const samples = draw_samples(model, 100, 23);
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.rows; ++i)
    {
        auto const x = samples.row(i);
        for (std::size_t m = 1; m <= 3; ++m)
        {
            auto const got = score_explicit(model, x, ScoreOrder(m));
            worst = std::max(worst, max_abs_diff(got, fd_score(density, x, m)));
        }
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("hermite tensors")
{
    std::vector<double> const zero{0.0, 0.0, 0.0};
    CHECK(hermite(zero, ScoreOrder(2)) == -1.0 * DenseTensor::identity(3));

    for (double x : {-2.0, -0.3, 0.0, 0.8, 1.7})
    {
        std::vector<double> const p{x};
        CHECK(hermite(p, ScoreOrder(1))[0] == doctest::Approx(x));
        CHECK(hermite(p, ScoreOrder(2))[0] == doctest::Approx(x * x - 1.0));
        CHECK(hermite(p, ScoreOrder(3))[0] == doctest::Approx(x * x * x - 3.0 * x));
    }

    oracle::Rng rng(24);
    auto const x = rng.normal_vector(4);
    auto const h3 = hermite(x, ScoreOrder(3));
    auto const ex = score_explicit(DensityModel::standard_gaussian(4), x, ScoreOrder(3));
    CHECK(max_abs_diff(h3, ex) <= 1e-12);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            for (std::size_t l = 0; l < 4; ++l)
            {
                double const expect = x[i] * x[j] * x[l] - x[i] * (j == l) - x[j] * (i == l)
                                      - x[l] * (i == j);
                CHECK(h3.at({i, j, l}) == doctest::Approx(expect).epsilon(1e-14));
            }
}

TEST_CASE("mixture posterior")
{
    std::vector<double> const x1{1.0};
    GaussianMixture const single({1.0}, {{0.3}});
    CHECK(gmm_posterior(single, x1) == std::vector<double>{1.0});

    GaussianMixture const sym({0.5, 0.5}, {{-2.0}, {2.0}});
    std::vector<double> const mid{0.0};
    auto const r0 = gmm_posterior(sym, mid);
    CHECK(r0[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r0[1] == doctest::Approx(0.5).epsilon(1e-15));

    auto const r1 = gmm_posterior(sym, x1);
    double const a = phi(1.0 + 2.0), b = phi(1.0 - 2.0);
    CHECK(r1[0] == doctest::Approx(a / (a + b)).epsilon(1e-14));
    CHECK(r1[1] == doctest::Approx(b / (a + b)).epsilon(1e-14));

    std::vector<double> const far{60.0};
    CHECK_THROWS_AS(gmm_posterior(sym, far), DegeneratePointError);
}

TEST_CASE("parametric Gaussian-mean score")
{
    oracle::Rng rng(25);
    auto const x = rng.normal_vector(3);
    auto const mu = rng.normal_vector(3);
    std::vector<double> diff(3);
    for (std::size_t i = 0; i < 3; ++i)
        diff[i] = x[i] - mu[i];

    // S_1 = -∇_μ log p = -(x - μ).
    auto const s1 = parametric_score_gaussian_mean(x, mu, ScoreOrder(1));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(s1[i] == doctest::Approx(-diff[i]).epsilon(1e-14));

    auto const s2 = parametric_score_gaussian_mean(mu, mu, ScoreOrder(2));
    CHECK(s2 == -1.0 * DenseTensor::identity(3));

    for (std::size_t m = 1; m <= 4; ++m)
    {
        auto const got = parametric_score_gaussian_mean(x, mu, ScoreOrder(m));
        CHECK(max_abs_diff(got, sign_flip(hermite(diff, ScoreOrder(m)), m)) <= 1e-12);
    }

    // At μ = 0 the parametric score is the input score up to (-1)^m.
    std::vector<double> const zero(3, 0.0);
    auto const g = DensityModel::standard_gaussian(3);
    for (std::size_t m = 1; m <= 3; ++m)
        CHECK(parametric_score_gaussian_mean(x, zero, ScoreOrder(m))
              == sign_flip(score(g, x, ScoreOrder(m)), m));

    // Against finite differences in μ of N(x; μ, I).
    TensorFunction dens = [&](std::span<double const> m_) {
        double q = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            q += (x[i] - m_[i]) * (x[i] - m_[i]);
        return DenseTensor::scalar(std::exp(-0.5 * q));
    };
    double const p0 = dens(mu)[0];
    for (std::size_t m = 1; m <= 3; ++m)
    {
        auto fd = oracle::richardson_gradient(dens, mu, m, 2e-3);
        fd *= (m % 2 == 1 ? -1.0 : 1.0) / p0;
        CHECK(max_abs_diff(parametric_score_gaussian_mean(x, mu, ScoreOrder(m)), fd) <= 1e-5);
    }
}

TEST_CASE("affine transform scores")
{
    oracle::Rng rng(26);
    auto const gmm = DensityModel::mixture(random_gmm(rng, 3, 2, false));
    auto const t = rng.normal_vector(3);
    std::vector<double> const zero(3, 0.0);

    for (std::size_t m = 1; m <= 3; ++m)
        CHECK(max_abs_diff(transform_score_affine(gmm, DenseTensor::identity(3), zero, t, ScoreOrder(m)),
                           score(gmm, t, ScoreOrder(m)))
              <= 1e-14);

    std::vector<double> const sigma{0.5, 2.0, 1.5};
    auto diag = DenseTensor::cube(3, 2);
    for (std::size_t i = 0; i < 3; ++i)
        diag(i, i) = sigma[i];
    auto const s1 = transform_score_affine(DensityModel::standard_gaussian(3), diag, zero, t, ScoreOrder(1));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(s1[i] == doctest::Approx(t[i] / (sigma[i] * sigma[i])).epsilon(1e-14));

    auto const a = rng.matrix(3, 3) + 2.0 * DenseTensor::identity(3);
    auto const b = rng.normal_vector(3);
    Eigen::Matrix3d am;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            am(i, j) = a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    Eigen::Matrix3d const ainv = am.inverse();
    double const det = std::abs(am.determinant());
    auto const& mix = *gmm.get_if<GaussianMixture>();
    auto const density = [&](std::span<double const> p) {
        Eigen::Vector3d r(p[0] - b[0], p[1] - b[1], p[2] - b[2]);
        Eigen::Vector3d x = ainv * r;
        std::vector<double> xv{x(0), x(1), x(2)};
        return gmm_density_direct(mix, xv) / det;
    };
    for (int i = 0; i < 5; ++i)
    {
        auto const x = draw_samples(gmm, 1, 100 + i).data;
        std::vector<double> tp(3);
        for (std::size_t r = 0; r < 3; ++r)
        {
            tp[r] = b[r];
            for (std::size_t c = 0; c < 3; ++c)
                tp[r] += a(r, c) * x[c];
        }
        auto const got = transform_score_affine(gmm, a, b, tp, ScoreOrder(2));
        CHECK(max_abs_diff(got, fd_score(density, tp, 2)) <= 1e-5);
        auto const model = DensityModel::affine(gmm, a, b);
        CHECK(std::abs(log_density(model, tp).value - std::log(density(tp))) <= 1e-12);
        CHECK(max_abs_diff(score_explicit(model, tp, ScoreOrder(3)), score(model, tp, ScoreOrder(3)))
              <= 1e-10);
    }

    auto singular = DenseTensor::identity(3);
    singular(2, 2) = 0.0;
    CHECK_THROWS_AS(transform_score_affine(gmm, singular, zero, t, ScoreOrder(1)), ValidationError);
    auto ill = DenseTensor::identity(3);
    ill(2, 2) = 1e-13;
    CHECK_THROWS_AS(DensityModel::affine(gmm, ill, zero), ValidationError);
}

TEST_CASE("weights-only refit")
{
    GaussianMixture const comps({0.5, 0.5}, {{-3.0, 0.0}, {3.0, 0.0}});

    SUBCASE("target from one component")
    {
        auto const target = draw_samples(DensityModel::mixture(GaussianMixture({1.0}, {{-3.0, 0.0}})), 5000, 31);
        auto const w = selftaught_refit_weights(comps, target);
        CHECK(w[0] >= 0.99);
        CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("identical components stay uniform")
    {
        GaussianMixture const same({0.2, 0.3, 0.5}, {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}});
        auto const target = draw_samples(DensityModel::standard_gaussian(2), 1000, 32);
        auto const w = selftaught_refit_weights(same, target);
        for (double v : w)
            CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("30/70 reweighting")
    {
        auto const target = draw_samples(DensityModel::mixture(comps.with_weights({0.3, 0.7})), 10000, 33);
        auto const w = selftaught_refit_weights(comps, target);
        CHECK(std::abs(w[0] - 0.3) <= 0.02);
        CHECK(std::abs(w[1] - 0.7) <= 0.02);
    }
    SUBCASE("all samples degenerate")
    {
        SampleMatrix far(3, 2, {100.0, 0.0, 120.0, 0.0, -150.0, 0.0});
        CHECK_THROWS_AS(selftaught_refit_weights(comps, far), FitError);
    }
}

TEST_CASE("recursion and explicit forms agree on random points")
{
    oracle::Rng rng(40);
    auto const gauss = DensityModel::standard_gaussian(3);
    auto const mix = DensityModel::mixture(random_gmm(rng, 3, 3, true));
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
    {
        auto const x = rng.normal_vector(3);
        for (std::size_t m = 1; m <= 3; ++m)
        {
            worst = std::max(worst, max_abs_diff(score(gauss, x, ScoreOrder(m)),
                                                 score_explicit(gauss, x, ScoreOrder(m))));
            worst = std::max(worst, max_abs_diff(score(mix, x, ScoreOrder(m)),
                                                 score_explicit(mix, x, ScoreOrder(m))));
        }
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("scores are exactly symmetric")
{
    oracle::Rng rng(41);
    auto const mix = DensityModel::mixture(random_gmm(rng, 3, 2, true));
    auto const a = rng.matrix(3, 3) + 2.0 * DenseTensor::identity(3);
    auto const aff = DensityModel::affine(mix, a, rng.normal_vector(3));
    auto const ef = DensityModel::exp_family(rng.poly(3, 1, 4, 6)
                                             + PolyFunction::power_of_linear(rng.unit_vector(3), 4));
    for (int i = 0; i < 10; ++i)
    {
        auto const x = rng.normal_vector(3);
        for (std::size_t m = 2; m <= 4; ++m)
        {
            CHECK(symmetry_defect(score(mix, x, ScoreOrder(m))) == 0.0);
            CHECK(symmetry_defect(score_explicit(mix, x, ScoreOrder(m))) == 0.0);
            CHECK(symmetry_defect(score(aff, x, ScoreOrder(m))) == 0.0);
            CHECK(symmetry_defect(score_explicit(aff, x, ScoreOrder(m))) == 0.0);
            CHECK(symmetry_defect(score(ef, x, ScoreOrder(m))) == 0.0);
        }
    }
}

TEST_CASE("first-order score has zero mean under the model")
{
    oracle::Rng rng(42);
    auto const mix = DensityModel::mixture(random_gmm(rng, 2, 3, true));
    std::size_t const n = 100000;
    auto const xs = draw_samples(mix, n, 43);
    std::vector<double> sum(2, 0.0), sq(2, 0.0);
    for (std::size_t i = 0; i < n; ++i)
    {
        auto const s = score(mix, xs.row(i), ScoreOrder(1));
        for (std::size_t j = 0; j < 2; ++j)
        {
            sum[j] += s[j];
            sq[j] += s[j] * s[j];
        }
    }
    for (std::size_t j = 0; j < 2; ++j)
    {
        double const mean = sum[j] / n;
        double const var = (sq[j] - n * mean * mean) / (n - 1);
        CHECK(std::abs(mean) <= 5.0 * std::sqrt(var / n));
    }
}

TEST_CASE("identity-covariance mixture score is x minus the posterior mean")
{
    oracle::Rng rng(44);
    auto const gmm = random_gmm(rng, 3, 4, false);
    auto const model = DensityModel::mixture(gmm);
    for (int i = 0; i < 20; ++i)
    {
        auto const x = rng.normal_vector(3);
        auto const r = gmm_posterior(gmm, x);
        auto const s1 = score(model, x, ScoreOrder(1));
        for (std::size_t j = 0; j < 3; ++j)
        {
            double ah = 0.0;
            for (std::size_t h = 0; h < 4; ++h)
                ah += gmm.means()[h][j] * r[h];
            CHECK(std::abs(s1[j] - (x[j] - ah)) <= 1e-12);
        }
    }
}

TEST_CASE("exponential family with quadratic energy gives Hermite tensors")
{
    std::size_t const d = 3;
    std::vector<PolyTerm> terms;
    for (std::size_t i = 0; i < d; ++i)
    {
        std::vector<unsigned> e(d, 0);
        e[i] = 2;
        terms.push_back({0, 0.5, e});
    }
    auto const ef = DensityModel::exp_family(PolyFunction(d, 1, terms));
    oracle::Rng rng(45);
    for (int i = 0; i < 10; ++i)
    {
        auto const x = rng.normal_vector(d);
        for (std::size_t m = 1; m <= 4; ++m)
            CHECK(max_abs_diff(score(ef, x, ScoreOrder(m)), hermite(x, ScoreOrder(m))) <= 1e-12);
    }
}

TEST_CASE("exponential family scores against finite differences")
{
    oracle::Rng rng(46);
    auto const u = rng.unit_vector(2);
    auto const energy = PolyFunction::power_of_linear(u, 4, 0.25) + rng.poly(2, 1, 2, 3);
    auto const ef = DensityModel::exp_family(energy);
    auto const density = [&](std::span<double const> p) {
        double e = 0.0;
        energy.evaluate(p, std::span<double>(&e, 1));
        return std::exp(-e);
    };
    for (int i = 0; i < 10; ++i)
    {
        auto const x = rng.normal_vector(2);
        for (std::size_t m = 1; m <= 3; ++m)
        {
            auto const ref = fd_score(density, x, m);
            CHECK(max_abs_diff(score(ef, x, ScoreOrder(m)), ref) <= 1e-5 * (1.0 + ref.max_abs()));
        }
    }
}

TEST_CASE("symbolic recursion")
{
    // S_2 = ℓ1⊗ℓ1 - ℓ2 and S_3 has -ℓ1³, three mixed ℓ1ℓ2 terms and -ℓ3.
    CHECK(detail::score_recursion_terms(1).size() == 1);
    CHECK(detail::score_recursion_terms(2).size() == 2);
    CHECK(detail::score_recursion_terms(3).size() == 5);

    oracle::Rng rng(47);
    std::size_t const d = 3;
    std::vector<DenseTensor> ell;
    for (std::size_t n = 1; n <= 4; ++n)
        ell.push_back(symmetrize(rng.tensor(std::vector<std::size_t>(n, d))));
    std::vector<bool> const none(4, false);
    for (std::size_t m = 1; m <= 4; ++m)
    {
        auto const fast = detail::evaluate_score_recursion(m, d, ell, none);
        auto const ref = detail::evaluate_score_recursion_reference(m, ell);
        CHECK(max_abs_diff(fast, ref) <= 1e-12);
    }
}

TEST_CASE("sampling is reproducible")
{
    auto const mix = DensityModel::mixture(GaussianMixture({0.3, 0.7}, {{0.0, 1.0}, {2.0, -1.0}}));
    CHECK(draw_samples(mix, 100, 5) == draw_samples(mix, 100, 5));
    CHECK_FALSE(draw_samples(mix, 100, 5) == draw_samples(mix, 100, 6));
    auto const ef = DensityModel::exp_family(PolyFunction(1, 1, {{0, 0.5, {2}}}));
    CHECK_THROWS_AS(draw_samples(ef, 10, 1), UnsupportedError);
}
