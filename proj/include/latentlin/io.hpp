#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"
#include "latentlin/model.hpp"

namespace latentlin {

using Json = nlohmann::json;

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::ParseError, "matrix must be an array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows ? static_cast<Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const Json& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Index>(r.size()) != cols) throw Error(ErrorKind::ParseError, "ragged matrix rows");
    for (Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline Json noise_to_json(const std::vector<NoiseSpec>& specs) {
  Json arr = Json::array();
  for (const auto& s : specs) arr.push_back({{"family", std::string(to_string(s.family))}, {"variance", s.variance}});
  return arr;
}

inline std::vector<NoiseSpec> noise_from_json(const Json& j) {
  std::vector<NoiseSpec> out;
  for (const auto& e : j) {
    NoiseSpec s;
    s.family = noise_family_from_string(e.at("family").get<std::string>());
    s.variance = e.at("variance").get<double>();
    out.push_back(s);
  }
  return out;
}

inline Json model_to_json(const LatentLinearModel& m) {
  Json j;
  j["a"] = matrix_to_json(m.a.matrix());
  j["lambda"] = matrix_to_json(m.lambda.matrix());
  j["ordering"] = m.lambda.ordering();
  j["eta_noise"] = noise_to_json(m.eta_noise);
  j["eps_noise"] = noise_to_json(m.eps_noise);
  return j;
}

inline LatentLinearModel model_from_json(const Json& j) {
  try {
    const Matrix a = matrix_from_json(j.at("a"));
    Matrix lam = j.contains("lambda") ? matrix_from_json(j.at("lambda")) : Matrix::Zero(a.cols(), a.cols());
    std::optional<std::vector<Index>> ordering;
    if (j.contains("ordering")) ordering = j.at("ordering").get<std::vector<Index>>();
    std::vector<NoiseSpec> eps;
    if (j.contains("eps_noise")) eps = noise_from_json(j.at("eps_noise"));
    return LatentLinearModel(CoefficientMatrix(a), DagMatrix(lam, ordering), noise_from_json(j.at("eta_noise")), eps);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

inline Json hierarchy_to_json(const HierarchicalModel& h) {
  Json j;
  j["level_sizes"] = h.level_sizes;
  j["matrices"] = Json::array();
  for (const auto& m : h.matrices) j["matrices"].push_back(matrix_to_json(m));
  j["noise"] = Json::array();
  for (const auto& n : h.noise) j["noise"].push_back(noise_to_json(n));
  if (h.top_lambda.size()) j["top_lambda"] = matrix_to_json(h.top_lambda);
  return j;
}

inline HierarchicalModel hierarchy_from_json(const Json& j) {
  try {
    HierarchicalModel h;
    h.level_sizes = j.at("level_sizes").get<std::vector<Index>>();
    for (const auto& m : j.at("matrices")) h.matrices.push_back(matrix_from_json(m));
    for (const auto& n : j.at("noise")) h.noise.push_back(noise_from_json(n));
    if (j.contains("top_lambda")) h.top_lambda = matrix_from_json(j.at("top_lambda"));
    h.validate();
    return h;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path);
  out << j.dump(2) << '\n';
}

/// CSV with a header row c0,c1,...; values printed with round-trip precision.
inline void write_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& header = {}) {
  for (Index j = 0; j < m.cols(); ++j) {
    if (j) out << ',';
    out << (header.empty() ? "c" + std::to_string(j) : header[static_cast<std::size_t>(j)]);
  }
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

inline void write_csv_file(const std::string& path, const Matrix& m, const std::vector<std::string>& header = {}) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path);
  write_csv(out, m, header);
}

/// Reads a numeric CSV whose first line is a header.
inline Matrix read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "empty CSV");
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, "non-numeric CSV cell: " + cell);
      }
    }
    if (rows.empty()) width = row.size();
    if (row.size() != width) throw Error(ErrorKind::ParseError, "ragged CSV row");
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

inline Matrix read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  return read_csv(in);
}

}  // namespace latentlin
