#pragma once

#include "rto/numkit.hpp"
#include "rto/sampler.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

// File formats: CSV with comma separators, period decimals, and a header on
// row 1; JSON in UTF-8. Doubles are printed with round-trip precision so
// reruns with the same seed produce byte-identical files.
namespace rto::io {

using numkit::Matrix;
using numkit::Vector;

std::string format_double(double value);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& rows);

/// Reads a CSV with a header row; returns the numeric body.
Matrix read_csv(const std::filesystem::path& path);

/// Plain grid CSV without a header (used for 2-D truth fields).
void write_grid_csv(const std::filesystem::path& path, const Matrix& grid);
Matrix read_grid_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Chain CSV: one row per state, columns u_0..u_{n-1}, log_weight, accepted.
void write_chain_csv(const std::filesystem::path& path, const sampler::Chain& chain);

/// theta chain CSV: one row per state, columns theta_0..theta_{n-1}.
void write_theta_csv(const std::filesystem::path& path, const Matrix& theta_samples);

// Minimal structural validator for the shipped JSON schemas: checks "type"
// recursively plus the "required" and "properties" keywords. Returns a list
// of violations (empty means valid).
std::vector<std::string> validate_against_schema(const nlohmann::json& doc,
                                                 const nlohmann::json& schema);

}  // namespace rto::io
