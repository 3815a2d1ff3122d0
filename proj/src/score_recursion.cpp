#include "hosf/detail/score_recursion.hpp"

#include <array>
#include <mutex>
#include <numeric>

#include "hosf/detail/partitions.hpp"
#include "hosf/detail/symmetric.hpp"
#include "hosf/error.hpp"

namespace hosf::detail {
namespace {

constexpr std::size_t kMaxRecursionOrder = 4;

std::vector<std::size_t> block_starts(std::vector<std::size_t> const& factors)
{
    std::vector<std::size_t> starts(factors.size());
    std::size_t s = 0;
    for (std::size_t f = 0; f < factors.size(); ++f)
    {
        starts[f] = s;
        s += factors[f];
    }
    return starts;
}

void push_merged(std::vector<RecursionTerm>& out, RecursionTerm term)
{
    for (auto& t : out)
    {
        if (t.factors == term.factors && t.out_to_raw == term.out_to_raw)
        {
            t.coef += term.coef;
            return;
        }
    }
    out.push_back(std::move(term));
}

void generate_partitions(std::size_t n,
                         std::size_t pos,
                         std::vector<std::size_t>& labels,
                         std::size_t blocks,
                         std::vector<SetPartition>& out)
{
    if (pos == n)
    {
        SetPartition p(blocks);
        for (std::size_t i = 0; i < n; ++i)
            p[labels[i]].push_back(i);
        out.push_back(std::move(p));
        return;
    }
    for (std::size_t b = 0; b <= blocks; ++b)
    {
        labels[pos] = b;
        generate_partitions(n, pos + 1, labels, b == blocks ? blocks + 1 : blocks, out);
    }
}

}  // namespace

std::vector<SetPartition> const& set_partitions(std::size_t n)
{
    static std::array<std::vector<SetPartition>, kMaxRecursionOrder + 1> cache = [] {
        std::array<std::vector<SetPartition>, kMaxRecursionOrder + 1> c;
        for (std::size_t k = 0; k <= kMaxRecursionOrder; ++k)
        {
            std::vector<std::size_t> labels(k);
            generate_partitions(k, 0, labels, 0, c[k]);
        }
        return c;
    }();
    if (n > kMaxRecursionOrder)
        throw ValidationError("set_partitions: order above 4");
    return cache[n];
}

std::vector<RecursionTerm> recursion_step(std::vector<RecursionTerm> const& prev)
{
    std::vector<RecursionTerm> next;
    for (auto const& term : prev)
    {
        std::size_t const raw = std::accumulate(term.factors.begin(),
                                                term.factors.end(),
                                                std::size_t{0});
        // -S_{m-1} ⊗ ∇log p
        {
            RecursionTerm t{-term.coef, term.factors, term.out_to_raw};
            t.factors.push_back(1);
            t.out_to_raw.push_back(raw);
            push_merged(next, std::move(t));
        }
        // -∇S_{m-1}: product rule over factors; ∇ℓ_a = ℓ_{a+1} with the new
        // index closing factor a's block and the new output mode last.
        auto const starts = block_starts(term.factors);
        for (std::size_t f = 0; f < term.factors.size(); ++f)
        {
            std::size_t const q = starts[f] + term.factors[f];
            RecursionTerm t{-term.coef, term.factors, {}};
            ++t.factors[f];
            t.out_to_raw.reserve(term.out_to_raw.size() + 1);
            for (auto r : term.out_to_raw)
                t.out_to_raw.push_back(r >= q ? r + 1 : r);
            t.out_to_raw.push_back(q);
            push_merged(next, std::move(t));
        }
    }
    std::erase_if(next, [](RecursionTerm const& t) { return t.coef == 0.0; });
    return next;
}

std::vector<RecursionTerm> const& score_recursion_terms(std::size_t m)
{
    static std::array<std::vector<RecursionTerm>, kMaxRecursionOrder + 1> cache = [] {
        std::array<std::vector<RecursionTerm>, kMaxRecursionOrder + 1> c;
        c[0] = {RecursionTerm{1.0, {}, {}}};
        for (std::size_t k = 1; k <= kMaxRecursionOrder; ++k)
            c[k] = recursion_step(c[k - 1]);
        return c;
    }();
    if (m > kMaxRecursionOrder)
        throw ValidationError("score recursion: order above 4");
    return cache[m];
}

DenseTensor evaluate_score_recursion(std::size_t m,
                                     std::size_t d,
                                     std::span<DenseTensor const> ell,
                                     std::vector<bool> const& vanishes)
{
    auto const& terms = score_recursion_terms(m);
    if (ell.size() < m || vanishes.size() < m)
        throw ShapeError("score recursion: missing log-density derivatives");

    // Per term and output mode: which factor it indexes and its stride there.
    struct Plan
    {
        double coef;
        std::vector<DenseTensor const*> factor_values;
        std::vector<std::size_t> mode_factor;
        std::vector<std::size_t> mode_stride;
    };
    std::vector<Plan> plans;
    for (auto const& term : terms)
    {
        bool skip = false;
        for (auto a : term.factors)
            skip = skip || vanishes[a - 1];
        if (skip)
            continue;
        Plan p{term.coef, {}, std::vector<std::size_t>(m), std::vector<std::size_t>(m)};
        for (auto a : term.factors)
            p.factor_values.push_back(&ell[a - 1]);
        auto const starts = block_starts(term.factors);
        for (std::size_t k = 0; k < m; ++k)
        {
            std::size_t const raw = term.out_to_raw[k];
            std::size_t f = term.factors.size() - 1;
            while (starts[f] > raw)
                --f;
            std::size_t stride = 1;
            for (std::size_t q = raw - starts[f] + 1; q < term.factors[f]; ++q)
                stride *= d;
            p.mode_factor[k] = f;
            p.mode_stride[k] = stride;
        }
        plans.push_back(std::move(p));
    }

    std::array<std::size_t, kMaxRecursionOrder + 1> offsets{};
    return fill_symmetric(d, m, [&](std::span<std::size_t const> idx) {
        double s = 0.0;
        for (auto const& p : plans)
        {
            std::size_t const nf = p.factor_values.size();
            std::fill(offsets.begin(), offsets.begin() + static_cast<std::ptrdiff_t>(nf), 0);
            for (std::size_t k = 0; k < m; ++k)
                offsets[p.mode_factor[k]] += idx[k] * p.mode_stride[k];
            double v = p.coef;
            for (std::size_t f = 0; f < nf; ++f)
                v *= (*p.factor_values[f])[offsets[f]];
            s += v;
        }
        return s;
    });
}

DenseTensor evaluate_score_recursion_reference(std::size_t m,
                                               std::span<DenseTensor const> ell)
{
    auto const& terms = score_recursion_terms(m);
    DenseTensor out;
    bool first = true;
    for (auto const& term : terms)
    {
        DenseTensor prod = DenseTensor::scalar(1.0);
        for (auto a : term.factors)
            prod = tensor_product(prod, ell[a - 1]);
        DenseTensor t = transpose(prod, Permutation(term.out_to_raw));
        t *= term.coef;
        if (first)
        {
            out = std::move(t);
            first = false;
        }
        else
        {
            out += t;
        }
    }
    return out;
}

}  // namespace hosf::detail
