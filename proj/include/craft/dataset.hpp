#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "craft/world.hpp"

namespace craft {

// One JSON object per line. Series are number arrays, matrices arrays of
// rows; masks are not stored (they follow from the window shape).
void write_dataset(std::span<const ForecastSample> samples, const std::filesystem::path& path);
// Throws ParseError naming the 1-based line of the first bad record.
std::vector<ForecastSample> read_dataset(const std::filesystem::path& path);

nlohmann::json sample_to_json(const ForecastSample& s);
ForecastSample sample_from_json(const nlohmann::json& j);

// Whole world (config, seed, hotel table, calendars, event log, labels) as a
// single JSON document.
void write_world(const HotelWorld& world, const std::filesystem::path& path);
HotelWorld read_world(const std::filesystem::path& path);

}  // namespace craft
