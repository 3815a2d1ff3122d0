#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "hosf/tensor.hpp"

namespace hosf {

/*!
 * Binary tensor format "STN1", little-endian:
 *
 *   magic "STN1" (4 bytes) | u8 order | order x u64 dims | prod(dims) x f64
 *
 * Readers reject a wrong magic, a truncated payload or trailing bytes.
 */
std::string encode_stn1(DenseTensor const& t);
DenseTensor decode_stn1(std::string const& bytes);

void write_stn1(std::ostream& os, DenseTensor const& t);
DenseTensor read_stn1(std::istream& is);

void save_stn1(std::filesystem::path const& path, DenseTensor const& t);
DenseTensor load_stn1(std::filesystem::path const& path);

}  // namespace hosf
