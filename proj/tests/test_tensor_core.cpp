#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hosf/error.hpp"
#include "hosf/poly.hpp"
#include "hosf/tensor.hpp"
#include "hosf/tensor_io.hpp"
#include "oracles.hpp"

using namespace hosf;

namespace {

std::vector<double> basis(std::size_t d, std::size_t i)
{
    std::vector<double> e(d, 0.0);
    e[i] = 1.0;
    return e;
}

DenseTensor column(std::span<double const> v)
{
    return DenseTensor::matrix(v.size(), 1, {v.begin(), v.end()});
}

}  // namespace

TEST_CASE("tensor_product of basis vectors")
{
    auto const e1 = DenseTensor::vector(basis(2, 0));
    auto const e2 = DenseTensor::vector(basis(2, 1));
    auto const m = tensor_product(e1, e2);
    CHECK(m.dims() == DenseTensor::Dims{2, 2});
    CHECK(m.at({0, 1}) == 1.0);
    CHECK(m.frobenius_norm() == 1.0);
}

TEST_CASE("scalar one is the identity for tensor_product")
{
    oracle::Rng rng(1);
    auto const t = rng.tensor({2, 3, 2});
    CHECK(tensor_product(DenseTensor::scalar(1.0), t) == t);
    CHECK(tensor_product(t, DenseTensor::scalar(1.0)) == t);
}

TEST_CASE("triple outer product matches loop oracle")
{
    oracle::Rng rng(2);
    auto a = rng.tensor({3}), b = rng.tensor({3}), c = rng.tensor({3});
    auto const t = tensor_product(tensor_product(a, b), c);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t l = 0; l < 3; ++l)
                CHECK(t.at({i, j, l}) == doctest::Approx(a[i] * b[j] * c[l]).epsilon(1e-15));
    CHECK(max_abs_diff(t, oracle::outer_loop(oracle::outer_loop(a, b), c)) == 0.0);
}

TEST_CASE("tensor_product is associative bit for bit")
{
    oracle::Rng rng(3);
    for (int trial = 0; trial < 10; ++trial)
    {
        // Small integers multiply exactly, so any layout difference shows up.
        auto ints = [&](DenseTensor t) {
            for (auto& v : t.data())
                v = std::round(4.0 * v);
            return t;
        };
        auto a = ints(rng.tensor({2, 3})), b = ints(rng.tensor({3})), c = ints(rng.tensor({2, 2}));
        CHECK(tensor_product(tensor_product(a, b), c) == tensor_product(a, tensor_product(b, c)));
    }
}

TEST_CASE("tensor_product enforces the element budget")
{
    DenseTensor const a({100, 100});
    CHECK_THROWS_AS(tensor_product(a, a, 1'000'000), SizeLimitError);
    CHECK_THROWS_AS(DenseTensor({10, 10, 10}, 999), SizeLimitError);
}

TEST_CASE("multilinear_form")
{
    oracle::Rng rng(4);
    auto const t = rng.tensor({3, 3, 3});
    auto const eye = DenseTensor::identity(3);

    SUBCASE("identity matrices")
    {
        CHECK(max_abs_diff(multilinear_form(t, eye, eye, eye), t) == 0.0);
    }
    SUBCASE("rank one tensor against vectors")
    {
        auto a = rng.normal_vector(3), b = rng.normal_vector(3), c = rng.normal_vector(3);
        auto u = rng.normal_vector(3), v = rng.normal_vector(3), w = rng.normal_vector(3);
        auto const r1 = tensor_product(tensor_product(DenseTensor::vector(a), DenseTensor::vector(b)),
                                       DenseTensor::vector(c));
        auto const out = multilinear_form(r1, column(u), column(v), column(w));
        double const expect = oracle::dot(a, u) * oracle::dot(b, v) * oracle::dot(c, w);
        CHECK(out.size() == 1);
        CHECK(out[0] == doctest::Approx(expect).epsilon(1e-13));
    }
    SUBCASE("random matrices against the loop oracle")
    {
        auto m1 = rng.matrix(3, 2), m2 = rng.matrix(3, 4), m3 = rng.matrix(3, 3);
        auto const out = multilinear_form(t, m1, m2, m3);
        CHECK(out.dims() == DenseTensor::Dims{2, 4, 3});
        CHECK(max_abs_diff(out, oracle::multilinear_loop(t, m1, m2, m3)) <= 1e-12);
    }
    SUBCASE("shape mismatch")
    {
        CHECK_THROWS_AS(multilinear_form(t, rng.matrix(2, 3), eye, eye), ShapeError);
    }
}

TEST_CASE("multilinear_form is linear in each matrix")
{
    oracle::Rng rng(5);
    for (int trial = 0; trial < 5; ++trial)
    {
        auto const t = rng.tensor({4, 4, 4});
        auto a = rng.matrix(4, 3), b = rng.matrix(4, 3);
        auto m2 = rng.matrix(4, 2), m3 = rng.matrix(4, 2);
        double const alpha = rng.normal(), beta = rng.normal();
        for (int slot = 0; slot < 3; ++slot)
        {
            auto combo = alpha * a + beta * b;
            auto eval = [&](DenseTensor const& m) {
                if (slot == 0)
                    return multilinear_form(t, m, m2, m3);
                if (slot == 1)
                    return multilinear_form(t, m2, m, m3);
                return multilinear_form(t, m2, m3, m);
            };
            auto const lhs = eval(combo);
            auto const rhs = alpha * eval(a) + beta * eval(b);
            CHECK(max_abs_diff(lhs, rhs) <= 1e-12 * (1.0 + rhs.max_abs()));
        }
    }
}

TEST_CASE("contract_fibers")
{
    std::size_t const d = 3;
    auto e = [&](std::size_t i) { return DenseTensor::vector(basis(d, i)); };
    auto const t = tensor_product(tensor_product(e(0), e(1)), e(2));
    CHECK(contract_fibers(t, basis(d, 1), basis(d, 2)) == basis(d, 0));

    oracle::Rng rng(6);
    auto const r = rng.tensor({4, 4, 4});
    auto const zero = contract_fibers(r, std::vector<double>(4, 0.0), rng.normal_vector(4));
    for (double z : zero)
        CHECK(z == 0.0);

    for (int trial = 0; trial < 10; ++trial)
    {
        auto v = rng.normal_vector(4), w = rng.normal_vector(4);
        auto const got = contract_fibers(r, v, w);
        auto const ref = multilinear_form(r, DenseTensor::identity(4), column(v), column(w));
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(std::abs(got[i] - ref[i]) <= 1e-13);
    }
    CHECK_THROWS_AS(contract_fibers(r, rng.normal_vector(3), rng.normal_vector(4)), ShapeError);
}

TEST_CASE("transpose")
{
    oracle::Rng rng(7);
    auto const m = rng.matrix(2, 3);
    auto const mt = transpose(m, Permutation::from_one_based({2, 1}));
    CHECK(mt.dims() == DenseTensor::Dims{3, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(mt(j, i) == m(i, j));

    auto const t = rng.tensor({2, 3, 4, 5});
    CHECK(transpose(t, Permutation::identity(4)) == t);

    std::vector<std::size_t> p{0, 1, 2, 3};
    do
    {
        Permutation const pi(p);
        auto const out = transpose(t, pi);
        for (std::size_t k = 0; k < 4; ++k)
            CHECK(out.dim(k) == t.dim(p[k]));
        CHECK(transpose(out, pi.inverse()) == t);
    } while (std::next_permutation(p.begin(), p.end()));

    // Entry check: out(j_{π1},..) = in(j_1,..).
    Permutation const pi = Permutation::from_one_based({3, 1, 4, 2});
    auto const out = transpose(t, pi);
    std::vector<std::size_t> in_idx{1, 2, 3, 4};
    std::vector<std::size_t> out_idx(4);
    for (std::size_t k = 0; k < 4; ++k)
        out_idx[k] = in_idx[pi[k]];
    CHECK(out.at(out_idx) == t.at(in_idx));

    CHECK_THROWS_AS(Permutation({0, 0, 1}), ValidationError);
    CHECK_THROWS_AS(Permutation::from_one_based({0, 1}), ValidationError);
    CHECK_THROWS_AS(transpose(t, Permutation::identity(3)), ValidationError);
}

TEST_CASE("rank1_sum")
{
    std::vector<double> const one{1.0};
    std::vector<std::vector<double>> const e1{basis(3, 0)};
    auto const t = rank1_sum(one, e1, 3);
    CHECK(t.at({0, 0, 0}) == 1.0);
    CHECK(t.frobenius_norm() == 1.0);

    std::vector<double> const w2{1.0, 1.0};
    std::vector<std::vector<double>> const e12{basis(3, 0), basis(3, 1)};
    auto const m = rank1_sum(w2, e12, 2);
    CHECK(m.at({0, 0}) == 1.0);
    CHECK(m.at({1, 1}) == 1.0);
    CHECK(m.at({2, 2}) == 0.0);
    CHECK(m.at({0, 1}) == 0.0);

    oracle::Rng rng(8);
    auto const q = rng.orthonormal(5, 3);
    std::vector<double> const w{rng.normal(), rng.normal(), rng.normal()};
    auto const r = rank1_sum(w, q, 3);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(contract_all(r, q[j]) == doctest::Approx(w[j]).epsilon(1e-12));

    std::vector<std::size_t> p{0, 1, 2};
    do
    {
        CHECK(transpose(r, Permutation(p)) == r);
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(symmetry_defect(r) == 0.0);

    CHECK_THROWS_AS(rank1_sum({}, std::span<std::vector<double> const>{}, 3), ValidationError);
}

TEST_CASE("symmetrize")
{
    oracle::Rng rng(9);
    auto const t = rng.tensor({3, 3, 3});
    CHECK(symmetry_defect(t) > 0.0);
    auto const s = symmetrize(t);
    CHECK(symmetry_defect(s) <= 1e-15);
    CHECK(max_abs_diff(symmetrize(s), s) <= 1e-15);
}

TEST_CASE("numeric_gradient accuracy")
{
    oracle::Rng rng(10);
    auto const x = rng.normal_vector(3);

    SUBCASE("linear map")
    {
        TensorFunction f = [](std::span<double const> p) { return DenseTensor::vector(p); };
        auto const g = numeric_gradient(f, x, 1);
        CHECK(max_abs_diff(g, DenseTensor::identity(3)) <= 1e-9);
    }
    SUBCASE("quadratic")
    {
        TensorFunction f = [](std::span<double const> p) {
            double s = 0.0;
            for (double v : p)
                s += v * v;
            return DenseTensor::scalar(0.5 * s);
        };
        auto const h = numeric_gradient(f, x, 2);
        CHECK(h.dims() == DenseTensor::Dims{3, 3});
        CHECK(max_abs_diff(h, DenseTensor::identity(3)) <= 1e-6);
    }
    SUBCASE("cube of a linear form")
    {
        auto const u = rng.normal_vector(3);
        TensorFunction f = [&](std::span<double const> p) {
            double const s = oracle::dot(u, p);
            return DenseTensor::scalar(s * s * s);
        };
        auto const t = numeric_gradient(f, x, 3);
        std::vector<double> six{6.0};
        std::vector<std::vector<double>> us{u};
        CHECK(max_abs_diff(t, rank1_sum(six, us, 3)) <= 1e-4);
    }
    SUBCASE("derivative index goes last")
    {
        // F(x) = A x, so ∇F(i, j) = A(i, j).
        auto const a = rng.matrix(2, 3);
        TensorFunction f = [&](std::span<double const> p) {
            DenseTensor out({2});
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 3; ++j)
                    out[i] += a(i, j) * p[j];
            return out;
        };
        CHECK(max_abs_diff(numeric_gradient(f, x, 1), a) <= 1e-9);
    }
    SUBCASE("non-finite values propagate")
    {
        TensorFunction f = [](std::span<double const>) { return DenseTensor::scalar(NAN); };
        CHECK_THROWS_AS(numeric_gradient(f, x, 1), NumericError);
    }
}

TEST_CASE("product rule for gradients of tensor functions")
{
    oracle::Rng rng(11);
    for (int trial = 0; trial < 5; ++trial)
    {
        std::size_t const d = 3;
        auto const fp = rng.poly(d, 2, 3);
        auto const gp = rng.poly(d, 3, 3);
        TensorFunction f = [&](std::span<double const> x) { return fp.value(x); };
        TensorFunction g = [&](std::span<double const> x) { return gp.value(x); };
        TensorFunction fg = [&](std::span<double const> x) {
            return tensor_product(fp.value(x), gp.value(x));
        };
        auto const x = rng.normal_vector(d);
        std::size_t const p1 = 1, p2 = 1;
        std::vector<std::size_t> pi;
        for (std::size_t i = 1; i <= p1; ++i)
            pi.push_back(i);
        for (std::size_t i = p1 + 2; i <= p1 + p2 + 1; ++i)
            pi.push_back(i);
        pi.push_back(p1 + 1);

        auto const lhs = numeric_gradient(fg, x, 1);
        auto const rhs = transpose(tensor_product(numeric_gradient(f, x, 1), g(x)),
                                   Permutation::from_one_based(pi))
                         + tensor_product(f(x), numeric_gradient(g, x, 1));
        CHECK(max_abs_diff(lhs, rhs) <= 1e-5);
    }
}

TEST_CASE("STN1 round trip and rejection")
{
    oracle::Rng rng(12);
    auto const t = rng.tensor({2, 3, 4});
    auto const bytes = encode_stn1(t);
    CHECK(bytes.size() == 4 + 1 + 3 * 8 + 24 * 8);
    CHECK(bytes.substr(0, 4) == "STN1");
    auto const back = decode_stn1(bytes);
    CHECK(back == t);
    CHECK(encode_stn1(back) == bytes);

    auto const s = DenseTensor::scalar(3.25);
    CHECK(decode_stn1(encode_stn1(s)) == s);

    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_stn1(bad), FormatError);
    CHECK_THROWS_AS(decode_stn1(bytes.substr(0, bytes.size() - 1)), FormatError);
    CHECK_THROWS_AS(decode_stn1(bytes.substr(0, 7)), FormatError);
    CHECK_THROWS_AS(decode_stn1(bytes + "x"), FormatError);

    std::stringstream ss;
    write_stn1(ss, t);
    CHECK(read_stn1(ss) == t);
}
