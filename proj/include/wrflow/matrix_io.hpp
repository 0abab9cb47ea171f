#pragma once

#include <json.hpp>

#include "wrflow/operator_core.hpp"

namespace wrflow::io {

using Json = nlohmann::ordered_json;

// Interchange document: {"dim": d, "entries": [[re, im], ...]} in row-major order.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& doc);

// Vectors are plain lists of [re, im] pairs.
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& doc);

} // namespace wrflow::io
