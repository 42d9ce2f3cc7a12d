#include <json.hpp>

#include "w2s/error.hpp"
#include "w2s/io.hpp"
#include "w2s/models.hpp"

namespace w2s {

std::filesystem::path checkpoint_stem(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".json" || ext == ".w2sm") {
    auto stem = path;
    stem.replace_extension();
    return stem;
  }
  return path;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

void save_head(const std::filesystem::path& path, const StrongHead& head) {
  const auto stem = checkpoint_stem(path);
  nlohmann::ordered_json meta;
  meta["variant"] = head.is_prototype() ? "prototype" : "linear";
  meta["k"] = head.classes();
  meta["d"] = head.dim();
  if (head.is_prototype()) {
    meta["bias"] = nullptr;
    write_matrix(with_suffix(stem, ".w2sm"), head.prototypes().matrix());
  } else {
    std::vector<float> bias;
    for (double b : head.probe().bias) bias.push_back(static_cast<float>(b));
    meta["bias"] = bias;
    write_matrix(with_suffix(stem, ".w2sm"), head.probe().weights);
  }
  write_text(with_suffix(stem, ".json"), meta.dump(2) + "\n");
}

StrongHead load_head(const std::filesystem::path& path) {
  const auto stem = checkpoint_stem(path);
  const auto meta_path = with_suffix(stem, ".json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(meta_path.string() + ": " + e.what());
  }
  Matrix weights = read_matrix(with_suffix(stem, ".w2sm"));
  try {
    const auto variant = meta.at("variant").get<std::string>();
    const auto k = meta.at("k").get<std::size_t>();
    const auto d = meta.at("d").get<std::size_t>();
    if (weights.rows() != k || weights.cols() != d) {
      throw ShapeError(meta_path.string() + " declares " + std::to_string(k) + "x" +
                       std::to_string(d) + " but the matrix file disagrees");
    }
    if (variant == "prototype") return StrongHead::prototype(PrototypeMatrix(std::move(weights)));
    if (variant == "linear") {
      std::vector<double> bias;
      for (float b : meta.at("bias").get<std::vector<float>>()) bias.push_back(b);
      return StrongHead::linear(LinearProbe(std::move(weights), std::move(bias)));
    }
    throw ConfigError(meta_path.string() + ": unknown variant '" + variant + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(meta_path.string() + ": " + e.what());
  }
}

}  // namespace w2s
