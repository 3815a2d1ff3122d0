#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "hosf/tensor.hpp"

namespace hosf::detail {

/// Advance a non-decreasing multi-index over [0, d); false when exhausted.
inline bool next_sorted_index(std::vector<std::size_t>& idx, std::size_t d)
{
    std::size_t pos = idx.size();
    while (pos > 0)
    {
        --pos;
        if (idx[pos] + 1 < d)
        {
            std::size_t const v = idx[pos] + 1;
            for (std::size_t k = pos; k < idx.size(); ++k)
                idx[k] = v;
            return true;
        }
    }
    return false;
}

/*!
 * Fill a d^order tensor whose entries are invariant under mode permutation.
 *
 * `value` is called once per sorted multi-index and the result is scattered
 * to every permutation, so the output is symmetric bit for bit.
 */
template<class F>
DenseTensor fill_symmetric(std::size_t d, std::size_t order, F&& value)
{
    DenseTensor out = DenseTensor::cube(d, order);
    if (order == 0)
    {
        std::vector<std::size_t> empty;
        out[0] = value(std::span<std::size_t const>(empty));
        return out;
    }
    if (d == 0)
        return out;
    std::vector<std::size_t> idx(order, 0);
    std::vector<std::size_t> perm(order);
    do
    {
        double const v = value(std::span<std::size_t const>(idx));
        perm = idx;
        do
        {
            out[out.flat_index(perm)] = v;
        } while (std::next_permutation(perm.begin(), perm.end()));
    } while (next_sorted_index(idx, d));
    return out;
}

/// Visit every multi-index of `dims` in row-major order.
template<class F>
void for_each_index(std::vector<std::size_t> const& dims, F&& visit)
{
    for (auto d : dims)
        if (d == 0)
            return;
    std::vector<std::size_t> idx(dims.size(), 0);
    while (true)
    {
        visit(std::span<std::size_t const>(idx));
        std::size_t pos = idx.size();
        while (pos > 0)
        {
            --pos;
            if (++idx[pos] < dims[pos])
                break;
            idx[pos] = 0;
            if (pos == 0)
                return;
        }
        if (idx.empty())
            return;
    }
}

}  // namespace hosf::detail
