#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hosf/decomp.hpp"
#include "hosf/density.hpp"
#include "hosf/moments.hpp"
#include "hosf/poly.hpp"
#include "hosf/samples.hpp"

namespace hosf {

using Json = nlohmann::json;

/*!
 * Model description:
 *   {"type": "gaussian", "dim": d}
 *   {"type": "gmm", "weights": [...], "means": [[...]], "variances": [[...]]}
 *   {"type": "exp_family", "energy": <polynomial>}
 *   {"type": "affine", "base": <model>, "matrix": [[...]], "shift": [...]}
 * "variances" is optional (identity covariance when absent).
 */
DensityModel model_from_json(Json const& j);
Json model_to_json(DensityModel const& model);

/// {"dim": d, "output_dim": p, "terms": [{"output": o, "coef": c, "exponents": [...]}]}
PolyFunction poly_from_json(Json const& j);
Json poly_to_json(PolyFunction const& g);

Json decomposition_to_json(DecompositionResult const& r);
DecompositionResult decomposition_from_json(Json const& j);

Json load_json(std::filesystem::path const& path);
void save_json(std::filesystem::path const& path, Json const& j);
void save_text(std::filesystem::path const& path, std::string const& text);

/// CSV with a header row; values written with 17 significant digits.
struct CsvTable
{
    std::vector<std::string> header;
    SampleMatrix values;
};

CsvTable read_csv(std::filesystem::path const& path);
std::string format_csv(std::vector<std::string> const& header, SampleMatrix const& values);

/// Header x1..xd,y1..yp.
LabeledDataset read_dataset(std::filesystem::path const& path);
void write_dataset(std::filesystem::path const& path, LabeledDataset const& data);

/// Header x1..xd; extra label columns are ignored.
SampleMatrix read_points(std::filesystem::path const& path);

}  // namespace hosf
