#include "run_config.hpp"

#include <json.hpp>

#include "w2s/error.hpp"
#include "w2s/io.hpp"

namespace w2s::cli {
namespace {

using nlohmann::json;

void apply(const json& j, TrainConfig& cfg, bool allow_weak) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") cfg.epochs = value.get<int>();
    else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
    else if (key == "base_lr") cfg.base_lr = value.get<double>();
    else if (key == "tau") cfg.tau = Temperature(value.get<double>());
    else if (key == "loss") cfg.loss = parse_method(value.get<std::string>());
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "warmup_ratio") cfg.warmup_ratio = value.get<double>();
    else if (key == "decay") cfg.decay = parse_decay(value.get<std::string>());
    else if (key == "kl_direction") cfg.kl_direction = parse_kl_direction(value.get<std::string>());
    else if (key == "aux_max_alpha") cfg.aux_conf.max_alpha = value.get<double>();
    else if (key == "aux_ramp_fraction") cfg.aux_conf.ramp_fraction = value.get<double>();
    else if (key == "weak" && allow_weak) continue;
    else throw ConfigError("unknown run config key '" + key + "'");
  }
}

}  // namespace

LrDecay parse_decay(const std::string& text) {
  if (text == "linear_to_zero" || text == "linear") return LrDecay::kLinearToZero;
  if (text == "constant") return LrDecay::kConstant;
  throw ConfigError("unknown decay '" + text + "' (expected linear_to_zero or constant)");
}

KlDirection parse_kl_direction(const std::string& text) {
  if (text == "weak_to_strong" || text == "forward") return KlDirection::kWeakToStrong;
  if (text == "strong_to_weak" || text == "reverse") return KlDirection::kStrongToWeak;
  throw ConfigError("unknown kl_direction '" + text + "' (expected weak_to_strong or strong_to_weak)");
}

RunConfig load_run_config(const std::filesystem::path& path, const TrainConfig& base,
                          const TrainConfig& weak_base) {
  const std::string text = read_text(path);
  RunConfig out{base, std::nullopt};
  try {
    const json j = json::parse(text);
    apply(j, out.train, true);
    if (j.contains("weak")) {
      out.weak = weak_base;
      apply(j.at("weak"), *out.weak, false);
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace w2s::cli
