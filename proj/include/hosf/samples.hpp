#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hosf/error.hpp"

namespace hosf {

/// Row-major N x d block of real samples.
struct SampleMatrix
{
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    SampleMatrix() = default;
    SampleMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    SampleMatrix(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values))
    {
        if (data.size() != rows * cols)
            throw ShapeError("SampleMatrix: data length != rows * cols");
    }

    std::span<double const> row(std::size_t i) const
    {
        return {data.data() + i * cols, cols};
    }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }

    friend bool operator==(SampleMatrix const&, SampleMatrix const&) = default;
};

}  // namespace hosf
