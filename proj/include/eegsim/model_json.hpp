#pragma once

#include <json.hpp>

#include "errors.hpp"
#include "mvar.hpp"

namespace eegsim {

inline nlohmann::ordered_json matrix_to_json(const Matrix& a) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class Json>
Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw DimensionMismatch("matrix JSON: expected " + std::to_string(rows) + " rows");
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw DimensionMismatch("matrix JSON: row " + std::to_string(i) + " has the wrong length");
    for (Eigen::Index c = 0; c < cols; ++c) a(i, c) = row[static_cast<std::size_t>(c)].template get<double>();
  }
  return a;
}

/// {dim, order, coeffs: [A_1, ..., A_p] as row-major nested arrays, noise_cov}
inline nlohmann::ordered_json to_json(const MvarModel& m) {
  nlohmann::ordered_json j;
  j["dim"] = m.dim;
  j["order"] = m.order;
  auto coeffs = nlohmann::ordered_json::array();
  for (const auto& a : m.coeffs) coeffs.push_back(matrix_to_json(a));
  j["coeffs"] = std::move(coeffs);
  j["noise_cov"] = matrix_to_json(m.noise_cov);
  return j;
}

template <class Json>
MvarModel mvar_from_json(const Json& j) {
  try {
    MvarModel m;
    m.dim = j.at("dim").template get<Eigen::Index>();
    m.order = j.at("order").template get<Eigen::Index>();
    const auto& coeffs = j.at("coeffs");
    if (!coeffs.is_array() || static_cast<Eigen::Index>(coeffs.size()) != m.order)
      throw DimensionMismatch("MvarModel JSON: coefficient count differs from order");
    for (const auto& a : coeffs) m.coeffs.push_back(matrix_from_json(a, m.dim, m.dim));
    m.noise_cov = matrix_from_json(j.at("noise_cov"), m.dim, m.dim);
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("MvarModel JSON: ") + e.what());
  }
}

}  // namespace eegsim
