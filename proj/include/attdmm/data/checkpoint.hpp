#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "attdmm/data/preprocess.hpp"
#include "attdmm/model/params.hpp"

namespace attdmm {

inline constexpr const char* kCheckpointFormat = "attdmm-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::optional<Normalizer> normalizer;
  // Free-form run provenance (config, folds, training stay ids). Kept free of
  // timestamps so identical runs write identical files.
  nlohmann::json provenance = nlohmann::json::object();
};

std::string checkpoint_serialize(const Checkpoint& ckpt);
Checkpoint checkpoint_parse(const std::string& text);

// Throws DataError on malformed input, a version mismatch or a tensor whose
// shape disagrees with the stored dims.
void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

nlohmann::json dims_to_json(const Dims& d);
Dims dims_from_json(const nlohmann::json& j);

}  // namespace attdmm
