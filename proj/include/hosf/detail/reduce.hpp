#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace hosf::detail {

inline constexpr std::size_t kReduceChunk = 4096;

/// Running mean and sum of squared deviations per entry.
struct MomentAccumulator
{
    std::size_t n = 0;
    std::vector<double> mean;
    std::vector<double> m2;

    explicit MomentAccumulator(std::size_t width = 0) : mean(width, 0.0), m2(width, 0.0) {}

    void push(std::span<double const> v)
    {
        ++n;
        double const inv = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < mean.size(); ++j)
        {
            double const delta = v[j] - mean[j];
            mean[j] += delta * inv;
            m2[j] += delta * (v[j] - mean[j]);
        }
    }

    // Chan et al. pairwise update.
    void merge(MomentAccumulator const& other)
    {
        if (other.n == 0)
            return;
        if (n == 0)
        {
            *this = other;
            return;
        }
        double const na = static_cast<double>(n);
        double const nb = static_cast<double>(other.n);
        double const total = na + nb;
        for (std::size_t j = 0; j < mean.size(); ++j)
        {
            double const delta = other.mean[j] - mean[j];
            mean[j] += delta * (nb / total);
            m2[j] += other.m2[j] + delta * delta * (na * nb / total);
        }
        n += other.n;
    }
};

inline std::size_t resolve_workers(std::size_t requested)
{
    if (requested != 0)
        return requested;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/*!
 * Run body(chunk) for every chunk index on up to `workers` threads.
 *
 * Chunks are claimed in strided order. If bodies throw, the exception of the
 * lowest failing chunk is rethrown after all threads join.
 */
template<class Body>
void parallel_chunks(std::size_t chunks, std::size_t workers, Body&& body)
{
    workers = std::min(resolve_workers(workers), std::max<std::size_t>(chunks, 1));
    std::vector<std::exception_ptr> errors(chunks);
    auto run = [&](std::size_t w) {
        for (std::size_t c = w; c < chunks; c += workers)
        {
            try
            {
                body(c);
            }
            catch (...)
            {
                errors[c] = std::current_exception();
            }
        }
    };
    if (workers <= 1)
    {
        run(0);
    }
    else
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w)
            pool.emplace_back(run, w);
        run(0);
    }
    for (auto const& e : errors)
        if (e)
            std::rethrow_exception(e);
}

/*!
 * Entrywise mean and variance of rows produced by fill(i, out).
 *
 * Each chunk of kReduceChunk rows is reduced sequentially and the chunk
 * results are merged along a fixed binary tree, so the output does not
 * depend on the number of workers.
 */
template<class Fill>
MomentAccumulator chunked_moments(std::size_t rows, std::size_t width, std::size_t workers, Fill&& fill)
{
    std::size_t const chunks = (rows + kReduceChunk - 1) / kReduceChunk;
    std::vector<MomentAccumulator> partial(chunks, MomentAccumulator(width));
    parallel_chunks(chunks, workers, [&](std::size_t c) {
        std::vector<double> buf(width);
        std::size_t const end = std::min(rows, (c + 1) * kReduceChunk);
        for (std::size_t i = c * kReduceChunk; i < end; ++i)
        {
            fill(i, std::span<double>(buf));
            partial[c].push(buf);
        }
    });
    if (partial.empty())
        return MomentAccumulator(width);
    for (std::size_t stride = 1; stride < partial.size(); stride *= 2)
        for (std::size_t i = 0; i + stride < partial.size(); i += 2 * stride)
            partial[i].merge(partial[i + stride]);
    return std::move(partial.front());
}

}  // namespace hosf::detail
