#pragma once

// Flat `key = value` config files. Keys are exactly the field names of
// WorldConfig / TrainConfig; `#` starts a comment. Unknown keys, duplicate
// keys and malformed values raise ConfigError.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "craft/world.hpp"

namespace craft {

enum class KoopmanScope { sample, group, batch };
enum class Variant { kpm_only, itm, itm_etg, full };

const char* to_string(KoopmanScope s);
const char* to_string(Variant v);
KoopmanScope parse_koopman_scope(const std::string& s);
Variant parse_variant(const std::string& s);

struct TrainConfig {
  std::int32_t L = 30;
  std::int32_t P = 7;
  std::int32_t D = 128;
  // 0 selects the default width for P.
  std::int32_t kernel = 0;
  double lambda = 0.1;
  double alpha1 = 500.0;
  double alpha2 = 2.0;
  double alpha3 = 0.1;
  double beta = 1.0;
  std::int32_t m = 15;
  std::int32_t groups_per_batch = 16;
  double lr = 1e-3;
  std::int32_t epochs = 2;
  // Caps the total number of optimizer steps; 0 means no cap.
  std::int32_t max_steps = 0;
  std::uint64_t seed = 1;
  double train_ratio = 0.7;
  double val_ratio = 0.1;
  double test_ratio = 0.2;
  KoopmanScope koopman_scope = KoopmanScope::sample;
  Variant variant = Variant::full;
  std::string data_dir;

  int effective_kernel() const;
  void validate() const;
};

using ConfigMap = std::map<std::string, std::string>;

/// Parses `key = value` lines. Throws ConfigError with the line number on
/// malformed lines or duplicate keys.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);

/// Every key of `map` must name a field; missing keys keep their defaults.
TrainConfig train_config_from_map(const ConfigMap& map);
WorldConfig world_config_from_map(const ConfigMap& map);

std::string to_config_text(const TrainConfig& c);
std::string to_config_text(const WorldConfig& c);

nlohmann::json world_config_to_json(const WorldConfig& c);
WorldConfig world_config_from_json(const nlohmann::json& j);

}  // namespace craft
