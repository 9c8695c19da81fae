#pragma once

// JSON documents for meshes and model checkpoints. Doubles are written with
// enough digits to round-trip exactly.

#include <string>

#include <json.hpp>

#include "mzinet/mesh.hpp"
#include "mzinet/onn.hpp"

namespace mzinet {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json mesh_to_json(const UnitaryMesh& m);
UnitaryMesh mesh_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const OnnModel& m);
OnnModel model_from_json(const nlohmann::json& j);

void save_model(const OnnModel& m, const std::string& path);
OnnModel load_model(const std::string& path);

}  // namespace mzinet
