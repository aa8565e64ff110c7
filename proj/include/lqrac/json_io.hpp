#pragma once

#include <json.hpp>

#include "lqrac/lqr_model.hpp"

namespace lqrac {

using json = nlohmann::json;

/// Row-major nested arrays. Non-finite entries are rejected on input.
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const char* what);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j, const char* what);

/// Keys "A", "B", "Q", "R", "Psi", "sigma".
json instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const json& j);

}  // namespace lqrac
