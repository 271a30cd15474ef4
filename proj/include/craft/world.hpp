#pragma once

// Synthetic hierarchical hotel world (city > district > hotel), the forecast
// samples cut from it, virtual-parent groups and time-ordered splits.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "craft/cfb.hpp"
#include "craft/numeric.hpp"

namespace craft {

struct WorldConfig {
  std::int32_t n_cities = 5;
  std::int32_t districts_per_city = 10;
  std::int32_t hotels_per_district = 20;
  std::int32_t horizon_days = 240;

  // Mean check-in rooms per day, drawn uniformly per hotel.
  double base_demand_min = 2.0;
  double base_demand_max = 20.0;
  // Leisure hotels peak on weekends, business hotels on weekdays.
  double weekly_amplitude = 0.2;

  double holiday_multiplier = 1.8;
  std::int32_t holiday_periods = 4;
  std::int32_t holiday_length = 4;

  // District-level log-demand AR(1) shock plus sporadic local events.
  double district_shock_sd = 0.15;
  double district_shock_persistence = 0.9;
  double district_event_rate = 0.02;
  double district_event_multiplier = 1.8;
  std::int32_t district_event_length = 3;

  double hotel_noise_sd = 0.05;

  // Booking lead time: same-day with probability lead_same_day_prob, else
  // 1 + geometric with a per-hotel mean drawn from [lead_mean_min, lead_mean_max].
  double lead_same_day_prob = 0.05;
  double lead_mean_min = 1.1;
  double lead_mean_max = 6.0;
  // Holidays and district events are booked further ahead.
  double holiday_lead_factor = 2.0;
  std::int32_t max_lead_days = 90;

  double rooms_per_booking = 1.0;
  double cancellation_rate = 0.05;
  // Unconverted order-page views per unit of demand.
  double browse_inflation = 1.0;
  // CFB/label consistency: walk-in demand invisible to the booking curves has
  // intensity (1 - rho_target) / rho_target of the booked demand, with
  // independent noise. 1 disables walk-ins.
  double rho_target = 0.8;

  void validate() const;
};

struct Hotel {
  std::int32_t hotel_id = 0;
  std::int32_t district_id = 0;
  std::int32_t city_id = 0;
  double base_demand = 0.0;
  std::array<double, 7> weekly{};
  double lead_mean = 1.0;
  double same_day_prob = 0.0;

  bool operator==(const Hotel&) const = default;
};

struct HotelWorld {
  WorldConfig config;
  std::uint64_t seed = 0;
  std::int32_t horizon = 0;
  std::vector<Hotel> hotels;
  // holidays[city][day] != 0 on holiday days.
  std::vector<std::vector<std::uint8_t>> holidays;
  std::vector<BookingEvent> events;
  // Realized check-ins, row = position in `hotels`.
  Mat labels;
  Mat walkins;
  BookingIndex index;

  HotelWorld() = default;
  HotelWorld(const HotelWorld&) = delete;
  HotelWorld& operator=(const HotelWorld&) = delete;
  HotelWorld(HotelWorld&&) = default;
  HotelWorld& operator=(HotelWorld&&) = default;

  // Rebuilds the booking index and slot map after hotels/events change.
  void reindex();
  std::size_t slot(std::int32_t hotel_id) const;
  const Hotel& hotel(std::int32_t hotel_id) const { return hotels[slot(hotel_id)]; }
  double label(std::int32_t hotel_id, std::int32_t day) const;
  std::vector<std::int32_t> district_ids() const;
  std::vector<std::int32_t> hotels_in_district(std::int32_t district_id) const;

 private:
  std::vector<std::int32_t> slot_of_;
};

/// Pure function of (config, seed).
HotelWorld generate_world(const WorldConfig& config, std::uint64_t seed);

struct ForecastSample {
  std::int32_t hotel_id = 0;  // -1 for a virtual parent
  std::int32_t district_id = 0;
  std::int32_t city_id = 0;
  std::int32_t origin = 0;
  std::int32_t L = 0;
  std::int32_t P = 0;
  Vec y_L;
  Vec y_P;
  Vec c_L_series;
  CfbMatrix c_Lmat;
  CfbMatrix c_P;
  // P x (L+P) booking-curve truth; row i is check-in day t+1+i read at
  // snapshot t-L+(j-i). Observed where j <= L+i, and the last P columns
  // coincide with row i of c_P.
  Mat itm_rows;
  Vec y_lower;
  Vec y_upper;

  BoolMat itm_mask() const;
};

BoolMat itm_mask(std::int32_t L, std::int32_t P);

/// Throws RangeError unless [t-L+1, t+P] lies inside the horizon and L >= P.
ForecastSample build_sample(const HotelWorld& world, std::int32_t hotel_id, std::int32_t origin,
                            std::int32_t L, std::int32_t P);

/// Origins t for which build_sample(L, P) is valid.
std::vector<std::int32_t> valid_origins(const HotelWorld& world, std::int32_t L, std::int32_t P);

struct HierGroup {
  std::vector<ForecastSample> children;
  ForecastSample parent;
};

/// Elementwise sum of every additive field of `children`.
ForecastSample virtual_parent(std::span<const ForecastSample> children);

/// Draws m of the candidates (one district, one origin) without replacement
/// with probability proportional to mean(y_L) + 1e-6 and attaches their
/// virtual parent. Returns nullopt when fewer than m candidates exist.
std::optional<HierGroup> hierarchical_sample(std::span<const ForecastSample> candidates,
                                             std::size_t m, Rng& rng);

/// Index-level variant used to avoid building unused samples.
std::vector<std::size_t> weighted_pick(std::span<const double> weights, std::size_t m, Rng& rng);

struct TimeSplit {
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> val;
  std::vector<std::int32_t> test;
  std::vector<std::string> warnings;
};

/// Contiguous train < val < test split of the origins with at least `gap`
/// days between the last origin of one non-empty split and the first of the
/// next. Ratios must be non-negative and sum to 1.
TimeSplit time_split(std::span<const std::int32_t> origins, const std::array<double, 3>& ratios,
                     std::int32_t gap);

}  // namespace craft
