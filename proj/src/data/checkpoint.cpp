#include "attdmm/data/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "attdmm/data/csv_io.hpp"
#include "attdmm/numcore/errors.hpp"

namespace attdmm {
namespace {

using nlohmann::json;

json tensor_to_json(const Tensor& t) {
  std::vector<double> data(static_cast<std::size_t>(t.size()));
  // row-major on disk
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      data[static_cast<std::size_t>(r * t.cols() + c)] = t(r, c);
    }
  }
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"data", data}};
}

Tensor tensor_from_json(const json& j, std::string_view name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataError("shape mismatch for " + std::string(name) + ": data length does not match " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  Tensor t(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) t(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return t;
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

json normalizer_to_json(const Normalizer& n) {
  return {{"feature_mean", vector_to_json(n.feature_mean)},
          {"feature_std", vector_to_json(n.feature_std)},
          {"age_mean", n.age_mean},
          {"age_std", n.age_std},
          {"admission_types", n.admission_types}};
}

Normalizer normalizer_from_json(const json& j) {
  Normalizer n;
  n.feature_mean = vector_from_json(j.at("feature_mean"));
  n.feature_std = vector_from_json(j.at("feature_std"));
  n.age_mean = j.at("age_mean").get<double>();
  n.age_std = j.at("age_std").get<double>();
  n.admission_types = j.at("admission_types").get<std::vector<std::string>>();
  if (n.feature_mean.size() != n.feature_std.size()) {
    throw DataError("checkpoint: normalizer mean/std lengths differ");
  }
  n.mark_fitted();
  return n;
}

}  // namespace

json dims_to_json(const Dims& d) {
  return {{"latent_dim", d.latent_dim},
          {"static_dim", d.static_dim},
          {"feature_dim", d.feature_dim},
          {"transition_hidden", d.transition_hidden},
          {"emission_hidden", d.emission_hidden},
          {"rnn_dim", d.rnn_dim},
          {"attention_dim", d.attention_dim},
          {"predictor_hidden", d.predictor_hidden}};
}

Dims dims_from_json(const json& j) {
  Dims d;
  d.latent_dim = j.at("latent_dim").get<int>();
  d.static_dim = j.at("static_dim").get<int>();
  d.feature_dim = j.at("feature_dim").get<int>();
  d.transition_hidden = j.at("transition_hidden").get<int>();
  d.emission_hidden = j.at("emission_hidden").get<int>();
  d.rnn_dim = j.at("rnn_dim").get<int>();
  d.attention_dim = j.at("attention_dim").get<int>();
  d.predictor_hidden = j.at("predictor_hidden").get<int>();
  return d;
}

std::string checkpoint_serialize(const Checkpoint& ckpt) {
  json tensors = json::object();
  Weights<Tensor>::visit([&](std::string_view name, const Tensor& t) {
    tensors[std::string(name)] = tensor_to_json(t);
  }, ckpt.params.weights);
  json j = {{"format", kCheckpointFormat},
            {"format_version", kCheckpointVersion},
            {"created_by", "attdmm"},
            {"dims", dims_to_json(ckpt.params.dims)},
            {"settings",
             {{"var_floor", ckpt.params.settings.var_floor},
              {"linear_mode", ckpt.params.settings.linear_mode}}},
            {"tensors", tensors},
            {"provenance", ckpt.provenance}};
  if (ckpt.normalizer) j["normalizer"] = normalizer_to_json(*ckpt.normalizer);
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw DataError("checkpoint: unknown format");
    }
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("checkpoint: format_version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint c;
    c.params.dims = dims_from_json(j.at("dims"));
    c.params.dims.validate();
    c.params.settings.var_floor = j.at("settings").at("var_floor").get<double>();
    c.params.settings.linear_mode = j.at("settings").at("linear_mode").get<bool>();
    const json& tensors = j.at("tensors");
    Weights<Tensor>::visit([&](std::string_view name, Tensor& t) {
      const std::string key(name);
      if (!tensors.contains(key)) throw DataError("checkpoint: missing tensor " + key);
      t = tensor_from_json(tensors.at(key), name);
    }, c.params.weights);
    check_shapes(c.params.weights, c.params.dims);
    if (j.contains("normalizer")) c.normalizer = normalizer_from_json(j.at("normalizer"));
    c.provenance = j.value("provenance", json::object());
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed field: ") + e.what());
  } catch (const ContractViolation& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_serialize(ckpt));
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return checkpoint_parse(os.str());
}

}  // namespace attdmm
