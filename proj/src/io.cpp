#include "rto/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rto::io {

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

std::vector<double> parse_row(const std::string& line) {
  std::vector<double> values;
  std::stringstream row(line);
  std::string cell;
  while (std::getline(row, cell, ',')) {
    values.push_back(std::stod(cell));
  }
  return values;
}

bool numeric_row(const std::string& line) {
  if (line.empty()) return false;
  const char c = line[0];
  return (c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.';
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& body,
                      const std::filesystem::path& path) {
  if (body.empty()) throw std::runtime_error("empty CSV: " + path.string());
  const auto cols = body.front().size();
  Matrix m(static_cast<numkit::Index>(body.size()), static_cast<numkit::Index>(cols));
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i].size() != cols) {
      throw std::runtime_error("ragged CSV at row " + std::to_string(i + 1) + ": " +
                               path.string());
    }
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<numkit::Index>(i), static_cast<numkit::Index>(j)) = body[i][j];
    }
  }
  return m;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& rows) {
  if (static_cast<numkit::Index>(header.size()) != rows.cols()) {
    throw std::invalid_argument("write_csv: header/column count mismatch");
  }
  auto out = open_out(path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (numkit::Index i = 0; i < rows.rows(); ++i) {
    for (numkit::Index j = 0; j < rows.cols(); ++j) {
      if (j) out << ',';
      out << format_double(rows(i, j));
    }
    out << '\n';
  }
}

Matrix read_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::vector<std::vector<double>> body;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && !numeric_row(line)) {
      first = false;
      continue;  // header
    }
    first = false;
    body.push_back(parse_row(line));
  }
  return rows_to_matrix(body, path);
}

void write_grid_csv(const std::filesystem::path& path, const Matrix& grid) {
  auto out = open_out(path);
  for (numkit::Index i = 0; i < grid.rows(); ++i) {
    for (numkit::Index j = 0; j < grid.cols(); ++j) {
      if (j) out << ',';
      out << format_double(grid(i, j));
    }
    out << '\n';
  }
}

Matrix read_grid_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::vector<std::vector<double>> body;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    body.push_back(parse_row(line));
  }
  return rows_to_matrix(body, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_chain_csv(const std::filesystem::path& path, const sampler::Chain& chain) {
  if (chain.states.empty()) throw std::invalid_argument("write_chain_csv: empty chain");
  const auto n = chain.states.front().size();
  std::vector<std::string> header;
  for (numkit::Index j = 0; j < n; ++j) header.push_back("u_" + std::to_string(j));
  header.emplace_back("log_weight");
  header.emplace_back("accepted");

  Matrix rows(static_cast<numkit::Index>(chain.states.size()), n + 2);
  for (std::size_t i = 0; i < chain.states.size(); ++i) {
    rows.row(static_cast<numkit::Index>(i)).head(n) = chain.states[i].transpose();
    rows(static_cast<numkit::Index>(i), n) = chain.log_weights[i];
    rows(static_cast<numkit::Index>(i), n + 1) = chain.accepted[i] ? 1.0 : 0.0;
  }
  write_csv(path, header, rows);
}

void write_theta_csv(const std::filesystem::path& path, const Matrix& theta_samples) {
  std::vector<std::string> header;
  for (numkit::Index j = 0; j < theta_samples.cols(); ++j) {
    header.push_back("theta_" + std::to_string(j));
  }
  write_csv(path, header, theta_samples);
}

namespace {

bool type_matches(const nlohmann::json& value, const std::string& type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "number") return value.is_number();
  if (type == "integer") return value.is_number_integer();
  if (type == "boolean") return value.is_boolean();
  return true;
}

void validate_node(const nlohmann::json& doc, const nlohmann::json& schema,
                   const std::string& where, std::vector<std::string>& issues) {
  if (schema.contains("type")) {
    const auto type = schema["type"].get<std::string>();
    if (!type_matches(doc, type)) {
      issues.push_back(where + ": expected " + type);
      return;
    }
  }
  if (schema.contains("required")) {
    for (const auto& key : schema["required"]) {
      if (!doc.contains(key.get<std::string>())) {
        issues.push_back(where + ": missing required key '" + key.get<std::string>() + "'");
      }
    }
  }
  if (schema.contains("properties") && doc.is_object()) {
    for (const auto& [key, sub] : schema["properties"].items()) {
      if (doc.contains(key)) validate_node(doc[key], sub, where + "/" + key, issues);
    }
  }
  if (schema.contains("items") && doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      validate_node(doc[i], schema["items"], where + "[" + std::to_string(i) + "]", issues);
    }
  }
}

}  // namespace

std::vector<std::string> validate_against_schema(const nlohmann::json& doc,
                                                 const nlohmann::json& schema) {
  std::vector<std::string> issues;
  validate_node(doc, schema, "$", issues);
  return issues;
}

}  // namespace rto::io
