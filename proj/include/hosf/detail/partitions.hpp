#pragma once

#include <cstddef>
#include <vector>

namespace hosf::detail {

/// A set partition of {0..n-1}; each block lists its members in order.
using SetPartition = std::vector<std::vector<std::size_t>>;

/// All set partitions of {0..n-1}, in restricted-growth-string order.
std::vector<SetPartition> const& set_partitions(std::size_t n);

}  // namespace hosf::detail
