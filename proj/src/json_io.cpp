#include "lqrac/json_io.hpp"

#include <cmath>
#include <string>

namespace lqrac {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
  // A bare number is accepted as a 1x1 matrix, which keeps scalar configs terse.
  if (j.is_number()) {
    Matrix m(1, 1);
    m(0, 0) = j.get<double>();
    if (!std::isfinite(m(0, 0))) throw InvalidArgument(std::string(what) + ": non-finite entry");
    return m;
  }
  if (!j.is_array() || j.empty()) {
    throw InvalidArgument(std::string(what) + ": expected a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) {
    throw InvalidArgument(std::string(what) + ": rows must be non-empty arrays");
  }
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw DimensionMismatch(std::string(what) + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw InvalidArgument(std::string(what) + ": entries must be numbers");
      m(r, c) = v.get<double>();
      if (!std::isfinite(m(r, c))) throw InvalidArgument(std::string(what) + ": non-finite entry");
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j, const char* what) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw InvalidArgument(std::string(what) + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument(std::string(what) + ": entries must be numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  if (!v.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite entry");
  return v;
}

json instance_to_json(const ProblemInstance& inst) {
  return json{{"A", matrix_to_json(inst.A())},     {"B", matrix_to_json(inst.B())},
              {"Q", matrix_to_json(inst.Q())},     {"R", matrix_to_json(inst.R())},
              {"Psi", matrix_to_json(inst.Psi())}, {"sigma", inst.sigma()}};
}

ProblemInstance instance_from_json(const json& j) {
  for (const char* key : {"A", "B", "Q", "R", "Psi", "sigma"}) {
    if (!j.contains(key)) throw InvalidArgument(std::string("instance: missing key '") + key + "'");
  }
  if (!j["sigma"].is_number()) throw InvalidArgument("instance: sigma must be a number");
  return ProblemInstance(matrix_from_json(j["A"], "A"), matrix_from_json(j["B"], "B"),
                         matrix_from_json(j["Q"], "Q"), matrix_from_json(j["R"], "R"),
                         matrix_from_json(j["Psi"], "Psi"), j["sigma"].get<double>());
}

}  // namespace lqrac
