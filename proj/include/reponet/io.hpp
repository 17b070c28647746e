#pragma once

#include <filesystem>

#include "json.hpp"
#include "reponet/metrics.hpp"
#include "reponet/network.hpp"
#include "reponet/polytope.hpp"

namespace reponet {

using Json = nlohmann::json;

// Doubles are written in the shortest form that parses back to the same bits.

/// `{"kind", "K", "d", "phi", "rows"}`.
Json weights_to_json(const ClassifierWeights& weights);
/// Throws kConfig on missing or mistyped fields and kStructural on shape mismatch.
ClassifierWeights weights_from_json(const Json& j);

Json report_to_json(const GeometryReport& report);

/// Parameters plus the classifier block; `config` is echoed verbatim.
Json model_to_json(const MlpModel& model, const Json& config = Json::object());
MlpModel model_from_json(const Json& j);

/// Parse errors become kConfig with "line L, column C" diagnostics; a missing
/// file is kIo.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace reponet
