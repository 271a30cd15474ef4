#include "craft/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "craft/decomposition.hpp"
#include "craft/error.hpp"

namespace craft {

#define CRAFT_WORLD_FIELDS(X)        \
  X(n_cities)                        \
  X(districts_per_city)              \
  X(hotels_per_district)             \
  X(horizon_days)                    \
  X(base_demand_min)                 \
  X(base_demand_max)                 \
  X(weekly_amplitude)                \
  X(holiday_multiplier)              \
  X(holiday_periods)                 \
  X(holiday_length)                  \
  X(district_shock_sd)               \
  X(district_shock_persistence)      \
  X(district_event_rate)             \
  X(district_event_multiplier)       \
  X(district_event_length)           \
  X(hotel_noise_sd)                  \
  X(lead_same_day_prob)              \
  X(lead_mean_min)                   \
  X(lead_mean_max)                   \
  X(holiday_lead_factor)             \
  X(max_lead_days)                   \
  X(rooms_per_booking)               \
  X(cancellation_rate)               \
  X(browse_inflation)                \
  X(rho_target)

#define CRAFT_TRAIN_FIELDS(X) \
  X(L)                        \
  X(P)                        \
  X(D)                        \
  X(kernel)                   \
  X(lambda)                   \
  X(alpha1)                   \
  X(alpha2)                   \
  X(alpha3)                   \
  X(beta)                     \
  X(m)                        \
  X(groups_per_batch)         \
  X(lr)                       \
  X(epochs)                   \
  X(max_steps)                \
  X(seed)                     \
  X(train_ratio)              \
  X(val_ratio)                \
  X(test_ratio)               \
  X(koopman_scope)            \
  X(variant)                  \
  X(data_dir)

const char* to_string(KoopmanScope s) {
  switch (s) {
    case KoopmanScope::sample: return "sample";
    case KoopmanScope::group: return "group";
    case KoopmanScope::batch: return "batch";
  }
  return "?";
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kpm_only: return "kpm_only";
    case Variant::itm: return "itm";
    case Variant::itm_etg: return "itm_etg";
    case Variant::full: return "full";
  }
  return "?";
}

KoopmanScope parse_koopman_scope(const std::string& s) {
  if (s == "sample") return KoopmanScope::sample;
  if (s == "group") return KoopmanScope::group;
  if (s == "batch") return KoopmanScope::batch;
  throw ConfigError("koopman_scope must be sample, group or batch, got '" + s + "'");
}

Variant parse_variant(const std::string& s) {
  if (s == "kpm_only") return Variant::kpm_only;
  if (s == "itm") return Variant::itm;
  if (s == "itm_etg") return Variant::itm_etg;
  if (s == "full") return Variant::full;
  throw ConfigError("variant must be kpm_only, itm, itm_etg or full, got '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
void parse_number(const std::string& key, const std::string& text, T& out) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
  out = v;
}

void parse_value(const std::string& key, const std::string& text, std::int32_t& out) {
  parse_number(key, text, out);
}
void parse_value(const std::string& key, const std::string& text, std::uint64_t& out) {
  parse_number(key, text, out);
}
void parse_value(const std::string& key, const std::string& text, double& out) {
  parse_number(key, text, out);
}
void parse_value(const std::string&, const std::string& text, std::string& out) { out = text; }
void parse_value(const std::string&, const std::string& text, KoopmanScope& out) {
  out = parse_koopman_scope(text);
}
void parse_value(const std::string&, const std::string& text, Variant& out) {
  out = parse_variant(text);
}

std::string format_value(std::int32_t v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
std::string format_value(const std::string& v) { return v; }
std::string format_value(KoopmanScope v) { return to_string(v); }
std::string format_value(Variant v) { return to_string(v); }

}  // namespace

int TrainConfig::effective_kernel() const { return kernel > 0 ? kernel : default_kernel(P); }

void TrainConfig::validate() const {
  if (P < 1 || L < P) throw ConfigError("need L >= P >= 1");
  if (D < 1) throw ConfigError("D must be positive");
  if (kernel < 0 || (kernel > 0 && kernel % 2 == 0)) throw ConfigError("kernel must be 0 or odd");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  for (double a : {alpha1, alpha2, alpha3, beta}) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("loss weights must be finite and >= 0");
  }
  if (m < 1 || groups_per_batch < 1) throw ConfigError("m and groups_per_batch must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (epochs < 0 || max_steps < 0) throw ConfigError("epochs and max_steps must be >= 0");
  for (double r : {train_ratio, val_ratio, test_ratio}) {
    if (!(r >= 0.0)) throw ConfigError("split ratios must be >= 0");
  }
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
    }
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

TrainConfig train_config_from_map(const ConfigMap& map) {
  TrainConfig c;
  for (const auto& [key, value] : map) {
#define X(f)                     \
  if (key == #f) {               \
    parse_value(key, value, c.f); \
    continue;                    \
  }
    CRAFT_TRAIN_FIELDS(X)
#undef X
    throw ConfigError("unknown train config key: " + key);
  }
  c.validate();
  return c;
}

WorldConfig world_config_from_map(const ConfigMap& map) {
  WorldConfig c;
  for (const auto& [key, value] : map) {
#define X(f)                     \
  if (key == #f) {               \
    parse_value(key, value, c.f); \
    continue;                    \
  }
    CRAFT_WORLD_FIELDS(X)
#undef X
    throw ConfigError("unknown world config key: " + key);
  }
  c.validate();
  return c;
}

std::string to_config_text(const TrainConfig& c) {
  std::string out;
#define X(f) out += std::string(#f) + " = " + format_value(c.f) + "\n";
  CRAFT_TRAIN_FIELDS(X)
#undef X
  return out;
}

std::string to_config_text(const WorldConfig& c) {
  std::string out;
#define X(f) out += std::string(#f) + " = " + format_value(c.f) + "\n";
  CRAFT_WORLD_FIELDS(X)
#undef X
  return out;
}

nlohmann::json world_config_to_json(const WorldConfig& c) {
  nlohmann::json j;
#define X(f) j[#f] = c.f;
  CRAFT_WORLD_FIELDS(X)
#undef X
  return j;
}

WorldConfig world_config_from_json(const nlohmann::json& j) {
  WorldConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
#define X(f)                                   \
  if (key == #f) {                             \
    c.f = it.value().get<decltype(c.f)>();     \
    continue;                                  \
  }
    CRAFT_WORLD_FIELDS(X)
#undef X
    throw ParseError("unknown world config key: " + key);
  }
  c.validate();
  return c;
}

}  // namespace craft
