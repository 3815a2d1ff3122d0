#include "hosf/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hosf/error.hpp"

namespace hosf {
namespace {

template<class T>
T field(Json const& j, char const* key)
{
    if (!j.is_object() || !j.contains(key))
        throw FormatError(std::string("missing field \"") + key + "\"");
    try
    {
        return j.at(key).get<T>();
    }
    catch (Json::exception const& e)
    {
        throw FormatError(std::string("field \"") + key + "\": " + e.what());
    }
}

DenseTensor matrix_from_rows(std::vector<std::vector<double>> const& rows)
{
    if (rows.empty())
        throw FormatError("matrix has no rows");
    std::size_t const c = rows.front().size();
    std::vector<double> flat;
    for (auto const& r : rows)
    {
        if (r.size() != c)
            throw FormatError("matrix rows have different lengths");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return DenseTensor::matrix(rows.size(), c, std::move(flat));
}

std::vector<std::string> split(std::string const& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
    {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
            cell.pop_back();
        std::size_t start = cell.find_first_not_of(' ');
        out.push_back(start == std::string::npos ? std::string() : cell.substr(start));
    }
    return out;
}

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Number of leading columns named prefix1, prefix2, ...
std::size_t count_prefixed(std::vector<std::string> const& header, std::size_t from, char prefix)
{
    std::size_t n = 0;
    while (from + n < header.size() && header[from + n] == prefix + std::to_string(n + 1))
        ++n;
    return n;
}

SampleMatrix columns(SampleMatrix const& m, std::size_t from, std::size_t count)
{
    SampleMatrix out(m.rows, count);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < count; ++j)
            out.row(i)[j] = m.row(i)[from + j];
    return out;
}

}  // namespace

//---------------------------------------------------------------------------//
// Models and polynomials
//---------------------------------------------------------------------------//

DensityModel model_from_json(Json const& j)
{
    auto const type = field<std::string>(j, "type");
    if (type == "gaussian")
        return DensityModel::standard_gaussian(field<std::size_t>(j, "dim"));
    if (type == "gmm")
    {
        auto weights = field<std::vector<double>>(j, "weights");
        auto means = field<std::vector<std::vector<double>>>(j, "means");
        if (j.contains("variances"))
            return DensityModel::mixture(GaussianMixture(
                std::move(weights), std::move(means), field<std::vector<std::vector<double>>>(j, "variances")));
        return DensityModel::mixture(GaussianMixture(std::move(weights), std::move(means)));
    }
    if (type == "exp_family")
        return DensityModel::exp_family(poly_from_json(field<Json>(j, "energy")));
    if (type == "affine")
    {
        auto base = model_from_json(field<Json>(j, "base"));
        auto const a = matrix_from_rows(field<std::vector<std::vector<double>>>(j, "matrix"));
        auto const b = field<std::vector<double>>(j, "shift");
        return DensityModel::affine(std::move(base), a, b);
    }
    throw FormatError("unknown model type \"" + type + "\"");
}

Json model_to_json(DensityModel const& model)
{
    return std::visit(
        [](auto const& m) -> Json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StandardGaussian>)
                return {{"type", "gaussian"}, {"dim", m.dim}};
            else if constexpr (std::is_same_v<T, GaussianMixture>)
            {
                Json j{{"type", "gmm"}, {"weights", m.weights()}, {"means", m.means()}};
                if (!m.identity_covariance())
                    j["variances"] = m.variances();
                return j;
            }
            else if constexpr (std::is_same_v<T, ExpFamily>)
                return {{"type", "exp_family"}, {"energy", poly_to_json(m.energy)}};
            else
            {
                std::size_t const d = m.shift.size();
                std::vector<std::vector<double>> rows(d, std::vector<double>(d));
                for (std::size_t r = 0; r < d; ++r)
                    for (std::size_t c = 0; c < d; ++c)
                        rows[r][c] = m.matrix(r, c);
                return {{"type", "affine"}, {"base", model_to_json(*m.base)}, {"matrix", rows}, {"shift", m.shift}};
            }
        },
        model.variant());
}

PolyFunction poly_from_json(Json const& j)
{
    auto const d = field<std::size_t>(j, "dim");
    std::size_t const p = j.contains("output_dim") ? field<std::size_t>(j, "output_dim") : 1;
    std::vector<PolyTerm> terms;
    for (auto const& t : field<Json>(j, "terms"))
    {
        PolyTerm term;
        term.output = t.contains("output") ? field<std::size_t>(t, "output") : 0;
        term.coef = field<double>(t, "coef");
        term.exponents = field<std::vector<unsigned>>(t, "exponents");
        terms.push_back(std::move(term));
    }
    return PolyFunction(d, p, std::move(terms));
}

Json poly_to_json(PolyFunction const& g)
{
    Json terms = Json::array();
    for (auto const& t : g.terms())
        terms.push_back({{"output", t.output}, {"coef", t.coef}, {"exponents", t.exponents}});
    return {{"dim", g.input_dim()}, {"output_dim", g.output_dim()}, {"terms", terms}};
}

//---------------------------------------------------------------------------//
// Decomposition results
//---------------------------------------------------------------------------//

Json decomposition_to_json(DecompositionResult const& r)
{
    Json comps = Json::array();
    for (auto const& c : r.components)
        comps.push_back({{"weight", c.weight}, {"vector", c.vector}});
    Json starts = Json::array();
    for (auto const& s : r.per_start)
        starts.push_back({{"iterations", s.iterations}, {"converged", s.converged}, {"breakdown", s.breakdown}});
    return {{"components", comps},
            {"residual_fro", r.residual_fro},
            {"candidates_kept", r.candidates_kept},
            {"per_start", starts}};
}

DecompositionResult decomposition_from_json(Json const& j)
{
    DecompositionResult r;
    for (auto const& c : field<Json>(j, "components"))
        r.components.push_back({field<double>(c, "weight"), field<std::vector<double>>(c, "vector")});
    r.residual_fro = field<double>(j, "residual_fro");
    r.candidates_kept = field<std::size_t>(j, "candidates_kept");
    if (j.contains("per_start"))
        for (auto const& s : j.at("per_start"))
            r.per_start.push_back({field<std::size_t>(s, "iterations"), field<bool>(s, "converged"),
                                   field<bool>(s, "breakdown")});
    return r;
}

//---------------------------------------------------------------------------//
// Files
//---------------------------------------------------------------------------//

Json load_json(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    try
    {
        return Json::parse(in);
    }
    catch (Json::parse_error const& e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_text(std::filesystem::path const& path, std::string const& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out << text;
}

void save_json(std::filesystem::path const& path, Json const& j)
{
    save_text(path, j.dump(2) + "\n");
}

CsvTable read_csv(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    if (!std::getline(in, line))
        throw FormatError(path.string() + ": empty file");
    table.header = split(line);
    std::size_t const cols = table.header.size();
    std::vector<double> data;
    std::size_t rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty() || line == "\r")
            continue;
        auto const cells = split(line);
        if (cells.size() != cols)
            throw FormatError(path.string() + ": line " + std::to_string(line_no) + " has "
                              + std::to_string(cells.size()) + " fields, expected " + std::to_string(cols));
        for (auto const& c : cells)
        {
            double v = 0.0;
            auto const [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc() || ptr != c.data() + c.size())
                throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": bad number \"" + c
                                  + "\"");
            data.push_back(v);
        }
        ++rows;
    }
    table.values = SampleMatrix(rows, cols, std::move(data));
    return table;
}

std::string format_csv(std::vector<std::string> const& header, SampleMatrix const& values)
{
    std::string out;
    for (std::size_t j = 0; j < header.size(); ++j)
        out += (j ? "," : "") + header[j];
    out += '\n';
    for (std::size_t i = 0; i < values.rows; ++i)
    {
        auto const row = values.row(i);
        for (std::size_t j = 0; j < values.cols; ++j)
        {
            if (j)
                out += ',';
            out += format_double(row[j]);
        }
        out += '\n';
    }
    return out;
}

LabeledDataset read_dataset(std::filesystem::path const& path)
{
    auto const t = read_csv(path);
    std::size_t const d = count_prefixed(t.header, 0, 'x');
    std::size_t const p = count_prefixed(t.header, d, 'y');
    if (d == 0 || p == 0 || d + p != t.header.size())
        throw FormatError(path.string() + ": header must be x1..xd,y1..yp");
    return LabeledDataset(columns(t.values, 0, d), columns(t.values, d, p));
}

void write_dataset(std::filesystem::path const& path, LabeledDataset const& data)
{
    std::vector<std::string> header;
    for (std::size_t j = 0; j < data.input_dim(); ++j)
        header.push_back("x" + std::to_string(j + 1));
    for (std::size_t j = 0; j < data.label_dim(); ++j)
        header.push_back("y" + std::to_string(j + 1));
    SampleMatrix joined(data.size(), data.input_dim() + data.label_dim());
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        auto row = joined.row(i);
        std::copy(data.x.row(i).begin(), data.x.row(i).end(), row.begin());
        std::copy(data.y.row(i).begin(), data.y.row(i).end(), row.begin() + static_cast<std::ptrdiff_t>(data.input_dim()));
    }
    save_text(path, format_csv(header, joined));
}

SampleMatrix read_points(std::filesystem::path const& path)
{
    auto const t = read_csv(path);
    std::size_t const d = count_prefixed(t.header, 0, 'x');
    if (d == 0)
        throw FormatError(path.string() + ": header must start with x1..xd");
    return columns(t.values, 0, d);
}

}  // namespace hosf
