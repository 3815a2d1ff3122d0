#include "hosf/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hosf/error.hpp"

namespace hosf {
namespace {

constexpr char kMagic[4] = {'S', 'T', 'N', '1'};

void put_u64(std::string& out, std::uint64_t v)
{
    for (int b = 0; b < 8; ++b)
        out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint64_t get_u64(std::string const& in, std::size_t pos)
{
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b]))
             << (8 * b);
    return v;
}

}  // namespace

std::string encode_stn1(DenseTensor const& t)
{
    if (t.order() > 255)
        throw FormatError("STN1: order does not fit in u8");
    std::string out;
    out.reserve(5 + 8 * t.order() + 8 * t.size());
    out.append(kMagic, 4);
    out.push_back(static_cast<char>(t.order()));
    for (auto d : t.dims())
        put_u64(out, d);
    for (double v : t.data())
        put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

DenseTensor decode_stn1(std::string const& bytes)
{
    if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("STN1: bad magic");
    std::size_t const order = static_cast<unsigned char>(bytes[4]);
    std::size_t pos = 5;
    if (bytes.size() < pos + 8 * order)
        throw FormatError("STN1: truncated header");
    DenseTensor::Dims dims(order);
    std::size_t count = 1;
    for (std::size_t k = 0; k < order; ++k, pos += 8)
    {
        std::uint64_t const d = get_u64(bytes, pos);
        if (d != 0 && count > kDefaultElementBudget / d)
            throw SizeLimitError("STN1: tensor exceeds element budget");
        dims[k] = static_cast<std::size_t>(d);
        count *= dims[k];
    }
    std::size_t const payload = bytes.size() - pos;
    if (payload < 8 * count)
        throw FormatError("STN1: truncated payload");
    if (payload > 8 * count)
        throw FormatError("STN1: trailing bytes after payload");
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i, pos += 8)
        data[i] = std::bit_cast<double>(get_u64(bytes, pos));
    return DenseTensor(std::move(dims), std::move(data));
}

void write_stn1(std::ostream& os, DenseTensor const& t)
{
    auto const bytes = encode_stn1(t);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os)
        throw FormatError("STN1: write failed");
}

DenseTensor read_stn1(std::istream& is)
{
    std::string bytes((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
    return decode_stn1(bytes);
}

void save_stn1(std::filesystem::path const& path, DenseTensor const& t)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw FormatError("cannot open " + path.string() + " for writing");
    write_stn1(os, t);
}

DenseTensor load_stn1(std::filesystem::path const& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw FormatError("cannot open " + path.string());
    return read_stn1(is);
}

}  // namespace hosf
