#pragma once

#include <json.hpp>

#include <string>

#include "qsb/gmm.hpp"
#include "qsb/mfg.hpp"
#include "qsb/wavepacket.hpp"

namespace qsb {

using Json = nlohmann::json;

// Formats a double with 17 significant digits, enough to round-trip exactly.
std::string format_double(double v);

Json gaussian_to_json(const Gaussian& g);
Gaussian gaussian_from_json(const Json& j);

// Mixture schema: {dim, weights: [...], components: [{mean, cov}, ...]}.
Json mixture_to_json(const GaussianMixture& mix);
GaussianMixture mixture_from_json(const Json& j);

// Bridge schema: {dim, beta, weights, start, end, component_betas}; the
// component_betas array records per-component feasibility clamping.
Json bridge_to_json(const CoupledMixtureBridge& bridge);
CoupledMixtureBridge bridge_from_json(const Json& j);

Json environment_to_json(const Environment& env);
Environment environment_from_json(const Json& j);

// CSV with a header row; values are written via format_double so reruns and
// round trips are byte-stable. Rows of the matrix are records.
void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& rows);

// Reads a numeric CSV (one point per row); a non-numeric first line is
// treated as a header and skipped.
Matrix read_csv(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

Json load_json(const std::string& path);

}  // namespace qsb
