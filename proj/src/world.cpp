#include "craft/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "craft/error.hpp"

namespace craft {

void WorldConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("world config: ") + what);
  };
  need(n_cities >= 1, "n_cities must be >= 1");
  need(districts_per_city >= 1, "districts_per_city must be >= 1");
  need(hotels_per_district >= 1, "hotels_per_district must be >= 1");
  need(horizon_days >= 2, "horizon_days must be >= 2");
  need(base_demand_min >= 0.0 && base_demand_max >= base_demand_min,
       "base demand range must satisfy 0 <= min <= max");
  need(weekly_amplitude >= 0.0 && weekly_amplitude < 1.0, "weekly_amplitude must be in [0, 1)");
  need(holiday_multiplier > 0.0, "holiday_multiplier must be > 0");
  need(holiday_periods >= 0 && holiday_length >= 1, "holiday periods/length invalid");
  need(district_shock_sd >= 0.0, "district_shock_sd must be >= 0");
  need(district_shock_persistence >= 0.0 && district_shock_persistence < 1.0,
       "district_shock_persistence must be in [0, 1)");
  need(district_event_rate >= 0.0 && district_event_rate <= 1.0, "district_event_rate must be in [0, 1]");
  need(district_event_multiplier > 0.0 && district_event_length >= 1, "district event shape invalid");
  need(hotel_noise_sd >= 0.0, "hotel_noise_sd must be >= 0");
  need(lead_same_day_prob >= 0.0 && lead_same_day_prob <= 1.0, "lead_same_day_prob must be in [0, 1]");
  need(lead_mean_min >= 1.0 && lead_mean_max >= lead_mean_min, "lead mean range must satisfy 1 <= min <= max");
  need(holiday_lead_factor >= 1.0, "holiday_lead_factor must be >= 1");
  need(max_lead_days >= 0, "max_lead_days must be >= 0");
  need(rooms_per_booking >= 1.0, "rooms_per_booking must be >= 1");
  need(cancellation_rate >= 0.0 && cancellation_rate <= 1.0, "cancellation_rate must be in [0, 1]");
  need(browse_inflation >= 0.0, "browse_inflation must be >= 0");
  need(rho_target > 0.0 && rho_target <= 1.0, "rho_target must be in (0, 1]");
}

void HotelWorld::reindex() {
  std::vector<std::int32_t> ids;
  ids.reserve(hotels.size());
  std::int32_t max_id = -1;
  for (const Hotel& h : hotels) {
    ids.push_back(h.hotel_id);
    max_id = std::max(max_id, h.hotel_id);
  }
  slot_of_.assign(static_cast<std::size_t>(max_id + 1), -1);
  for (std::size_t s = 0; s < hotels.size(); ++s) {
    if (hotels[s].hotel_id < 0) throw DataError("negative hotel id");
    slot_of_[static_cast<std::size_t>(hotels[s].hotel_id)] = static_cast<std::int32_t>(s);
  }
  index = BookingIndex(events, horizon, ids);
}

std::size_t HotelWorld::slot(std::int32_t hotel_id) const {
  if (hotel_id < 0 || static_cast<std::size_t>(hotel_id) >= slot_of_.size() ||
      slot_of_[static_cast<std::size_t>(hotel_id)] < 0) {
    throw NotFoundError("unknown hotel " + std::to_string(hotel_id));
  }
  return static_cast<std::size_t>(slot_of_[static_cast<std::size_t>(hotel_id)]);
}

double HotelWorld::label(std::int32_t hotel_id, std::int32_t day) const {
  if (day < 0 || day >= horizon) throw RangeError("label day outside horizon");
  return labels(static_cast<Eigen::Index>(slot(hotel_id)), day);
}

std::vector<std::int32_t> HotelWorld::district_ids() const {
  std::vector<std::int32_t> ids;
  for (const Hotel& h : hotels) ids.push_back(h.district_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<std::int32_t> HotelWorld::hotels_in_district(std::int32_t district_id) const {
  std::vector<std::int32_t> ids;
  for (const Hotel& h : hotels) {
    if (h.district_id == district_id) ids.push_back(h.hotel_id);
  }
  return ids;
}

namespace {

std::int64_t poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

double lognormal_unit_mean(Rng& rng, double sd) {
  if (sd == 0.0) return 1.0;
  return std::exp(sd * std::normal_distribution<double>(0.0, 1.0)(rng) - 0.5 * sd * sd);
}

std::vector<std::uint8_t> place_periods(Rng& rng, std::int32_t horizon, std::int32_t count,
                                        std::int32_t length) {
  std::vector<std::uint8_t> days(static_cast<std::size_t>(horizon), 0);
  if (length > horizon) return days;
  std::uniform_int_distribution<std::int32_t> start(0, horizon - length);
  for (std::int32_t k = 0; k < count; ++k) {
    const std::int32_t s = start(rng);
    for (std::int32_t d = s; d < s + length; ++d) days[static_cast<std::size_t>(d)] = 1;
  }
  return days;
}

}  // namespace

HotelWorld generate_world(const WorldConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  HotelWorld world;
  world.config = cfg;
  world.seed = seed;
  world.horizon = cfg.horizon_days;
  const std::int32_t H = cfg.horizon_days;

  // Calendar: shared holiday periods plus one festival per city.
  const std::vector<std::uint8_t> national = place_periods(rng, H, cfg.holiday_periods, cfg.holiday_length);
  for (std::int32_t c = 0; c < cfg.n_cities; ++c) {
    std::vector<std::uint8_t> cal = place_periods(rng, H, 1, cfg.holiday_length);
    for (std::int32_t d = 0; d < H; ++d) cal[static_cast<std::size_t>(d)] |= national[static_cast<std::size_t>(d)];
    world.holidays.push_back(std::move(cal));
  }

  // District multipliers and the "booked early" flag for local events.
  const std::int32_t n_districts = cfg.n_cities * cfg.districts_per_city;
  Mat district_factor(n_districts, H);
  std::vector<std::vector<std::uint8_t>> district_event(static_cast<std::size_t>(n_districts),
                                                        std::vector<std::uint8_t>(static_cast<std::size_t>(H), 0));
  const double phi = cfg.district_shock_persistence;
  const double innov = cfg.district_shock_sd * std::sqrt(1.0 - phi * phi);
  for (std::int32_t k = 0; k < n_districts; ++k) {
    double x = cfg.district_shock_sd * gauss(rng);
    std::int32_t event_left = 0;
    for (std::int32_t d = 0; d < H; ++d) {
      x = phi * x + innov * gauss(rng);
      if (event_left == 0 && unit(rng) < cfg.district_event_rate) event_left = cfg.district_event_length;
      double f = std::exp(x - 0.5 * cfg.district_shock_sd * cfg.district_shock_sd);
      if (event_left > 0) {
        f *= cfg.district_event_multiplier;
        district_event[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] = 1;
        --event_left;
      }
      district_factor(k, d) = f;
    }
  }

  std::int32_t next_id = 0;
  for (std::int32_t c = 0; c < cfg.n_cities; ++c) {
    for (std::int32_t k = 0; k < cfg.districts_per_city; ++k) {
      for (std::int32_t j = 0; j < cfg.hotels_per_district; ++j) {
        Hotel h;
        h.hotel_id = next_id++;
        h.city_id = c;
        h.district_id = c * cfg.districts_per_city + k;
        h.base_demand = cfg.base_demand_min + (cfg.base_demand_max - cfg.base_demand_min) * unit(rng);
        const bool leisure = unit(rng) < 0.5;
        double mean = 0.0;
        for (int dow = 0; dow < 7; ++dow) {
          const bool weekend = dow >= 5;
          const double shape = leisure ? (weekend ? 1.0 : -0.4) : (weekend ? -1.0 : 0.4);
          h.weekly[static_cast<std::size_t>(dow)] = 1.0 + cfg.weekly_amplitude * shape;
          mean += h.weekly[static_cast<std::size_t>(dow)];
        }
        for (double& w : h.weekly) w *= 7.0 / mean;
        h.lead_mean = cfg.lead_mean_min + (cfg.lead_mean_max - cfg.lead_mean_min) * unit(rng);
        h.same_day_prob = std::clamp(cfg.lead_same_day_prob * (0.5 + unit(rng)), 0.0, 0.95);
        world.hotels.push_back(h);
      }
    }
  }

  const std::size_t n_hotels = world.hotels.size();
  world.labels = Mat::Zero(static_cast<Eigen::Index>(n_hotels), H);
  world.walkins = Mat::Zero(static_cast<Eigen::Index>(n_hotels), H);
  const double walkin_share = (1.0 - cfg.rho_target) / cfg.rho_target;

  for (std::size_t s = 0; s < n_hotels; ++s) {
    const Hotel& h = world.hotels[s];
    const auto& cal = world.holidays[static_cast<std::size_t>(h.city_id)];
    for (std::int32_t d = 0; d < H; ++d) {
      const std::size_t du = static_cast<std::size_t>(d);
      const double weekly = h.weekly[static_cast<std::size_t>(d % 7)];
      const bool holiday = cal[du] != 0;
      const bool event = district_event[static_cast<std::size_t>(h.district_id)][du] != 0;
      const double intensity = h.base_demand * weekly * (holiday ? cfg.holiday_multiplier : 1.0) *
                               district_factor(h.district_id, d) *
                               lognormal_unit_mean(rng, cfg.hotel_noise_sd);

      const double lead_mean = h.lead_mean * ((holiday || event) ? cfg.holiday_lead_factor : 1.0);
      std::geometric_distribution<std::int32_t> geo(1.0 / lead_mean);
      const std::int64_t n_bookings = poisson(rng, intensity / cfg.rooms_per_booking);
      double kept = 0.0;
      for (std::int64_t b = 0; b < n_bookings; ++b) {
        BookingEvent e;
        e.hotel_id = h.hotel_id;
        e.checkin_day = d;
        e.rooms = 1 + static_cast<std::int32_t>(poisson(rng, cfg.rooms_per_booking - 1.0));
        const std::int32_t lead = unit(rng) < h.same_day_prob ? 0 : std::min(1 + geo(rng), cfg.max_lead_days);
        e.booking_day = d - lead;
        e.converted = true;
        e.cancelled = unit(rng) < cfg.cancellation_rate;
        if (!e.cancelled) kept += e.rooms;
        world.events.push_back(e);
      }
      const std::int64_t views = poisson(rng, cfg.browse_inflation * intensity);
      if (views > 0) {
        world.events.push_back(
            BookingEvent{h.hotel_id, d, d, static_cast<std::int32_t>(views), false, false});
      }
      const double walkin_rate =
          walkin_share * h.base_demand * weekly * lognormal_unit_mean(rng, cfg.hotel_noise_sd);
      const double walkin = static_cast<double>(poisson(rng, walkin_rate));
      world.walkins(static_cast<Eigen::Index>(s), d) = walkin;
      world.labels(static_cast<Eigen::Index>(s), d) = kept + walkin;
    }
  }
  world.reindex();
  return world;
}

BoolMat itm_mask(std::int32_t L, std::int32_t P) {
  BoolMat m(P, L + P);
  for (std::int32_t i = 0; i < P; ++i) {
    for (std::int32_t j = 0; j < L + P; ++j) m(i, j) = j <= L + i;
  }
  return m;
}

BoolMat ForecastSample::itm_mask() const { return craft::itm_mask(L, P); }

ForecastSample build_sample(const HotelWorld& world, std::int32_t hotel_id, std::int32_t t,
                            std::int32_t L, std::int32_t P) {
  if (L < 1 || P < 1 || L < P) throw RangeError("build_sample: need L >= P >= 1");
  if (t - L + 1 < 0 || t + P > world.horizon - 1) {
    std::ostringstream os;
    os << "build_sample: window [" << t - L + 1 << ", " << t + P << "] outside horizon "
       << world.horizon;
    throw RangeError(os.str());
  }
  const Hotel& h = world.hotel(hotel_id);
  const BookingIndex& idx = world.index;
  ForecastSample s;
  s.hotel_id = hotel_id;
  s.district_id = h.district_id;
  s.city_id = h.city_id;
  s.origin = t;
  s.L = L;
  s.P = P;
  s.y_L.resize(L);
  s.c_L_series.resize(L);
  for (std::int32_t k = 0; k < L; ++k) {
    s.y_L[k] = world.label(hotel_id, t - L + 1 + k);
    s.c_L_series[k] = idx.curve(hotel_id, t - L + 1 + k).final_total();
  }
  s.y_P.resize(P);
  for (std::int32_t i = 0; i < P; ++i) s.y_P[i] = world.label(hotel_id, t + 1 + i);
  s.c_Lmat = cfb_matrix(idx, hotel_id, t - P, P);
  s.c_P = cfb_matrix(idx, hotel_id, t, P);
  s.itm_rows.resize(P, L + P);
  for (std::int32_t i = 0; i < P; ++i) {
    const BookingCurve curve = idx.curve(hotel_id, t + 1 + i);
    for (std::int32_t j = 0; j < L + P; ++j) s.itm_rows(i, j) = curve(t - L + j - i);
  }
  s.y_lower.resize(P);
  s.y_upper.resize(P);
  for (std::int32_t i = 0; i < P; ++i) {
    // Cancellations can leave realized check-ins below the committed
    // advance bookings; the floor is clamped so the band stays valid.
    s.y_lower[i] = std::min((*s.c_P.truth)(i, i), s.y_P[i]);
    s.y_upper[i] = s.y_P[i] + idx.unconverted_views(hotel_id, t + 1 + i);
  }
  return s;
}

std::vector<std::int32_t> valid_origins(const HotelWorld& world, std::int32_t L, std::int32_t P) {
  std::vector<std::int32_t> out;
  for (std::int32_t t = L - 1; t + P <= world.horizon - 1; ++t) out.push_back(t);
  return out;
}

ForecastSample virtual_parent(std::span<const ForecastSample> children) {
  if (children.empty()) throw BatchError("virtual_parent: no children");
  const ForecastSample& first = children.front();
  ForecastSample p;
  p.hotel_id = -1;
  p.district_id = first.district_id;
  p.city_id = first.city_id;
  p.origin = first.origin;
  p.L = first.L;
  p.P = first.P;
  p.y_L = Vec::Zero(first.L);
  p.y_P = Vec::Zero(first.P);
  p.c_L_series = Vec::Zero(first.L);
  p.y_lower = Vec::Zero(first.P);
  p.y_upper = Vec::Zero(first.P);
  p.itm_rows = Mat::Zero(first.P, first.L + first.P);
  Mat lm_values = Mat::Zero(first.P, first.P), lm_truth = lm_values;
  Mat cp_values = lm_values, cp_truth = lm_values;
  for (const ForecastSample& c : children) {
    if (c.origin != first.origin || c.L != first.L || c.P != first.P || c.district_id != first.district_id) {
      throw BatchError("virtual_parent: children differ in origin, window or district");
    }
    p.y_L += c.y_L;
    p.y_P += c.y_P;
    p.c_L_series += c.c_L_series;
    p.y_lower += c.y_lower;
    p.y_upper += c.y_upper;
    p.itm_rows += c.itm_rows;
    lm_values += c.c_Lmat.values;
    cp_values += c.c_P.values;
    if (c.c_Lmat.truth) lm_truth += *c.c_Lmat.truth;
    if (c.c_P.truth) cp_truth += *c.c_P.truth;
  }
  auto assemble = [&](std::int32_t origin, Mat values, Mat truth) {
    CfbMatrix m;
    m.origin = origin;
    m.size = first.P;
    m.mask = CfbMatrix::lower_mask(first.P);
    m.values = std::move(values);
    m.truth = std::move(truth);
    return m;
  };
  p.c_Lmat = assemble(first.c_Lmat.origin, std::move(lm_values), std::move(lm_truth));
  p.c_P = assemble(first.c_P.origin, std::move(cp_values), std::move(cp_truth));
  return p;
}

std::vector<std::size_t> weighted_pick(std::span<const double> weights, std::size_t m, Rng& rng) {
  if (weights.size() < m) return {};
  std::vector<std::size_t> pool(weights.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < m; ++k) {
    double total = 0.0;
    for (std::size_t i : pool) total += weights[i];
    double u = unit(rng) * total;
    std::size_t chosen = pool.size() - 1;
    for (std::size_t q = 0; q < pool.size(); ++q) {
      u -= weights[pool[q]];
      if (u < 0.0) {
        chosen = q;
        break;
      }
    }
    picked.push_back(pool[chosen]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(chosen));
  }
  return picked;
}

std::optional<HierGroup> hierarchical_sample(std::span<const ForecastSample> candidates,
                                             std::size_t m, Rng& rng) {
  if (m == 0 || candidates.size() < m) return std::nullopt;
  std::vector<double> weights;
  weights.reserve(candidates.size());
  for (const ForecastSample& c : candidates) weights.push_back(c.y_L.mean() + 1e-6);
  HierGroup g;
  for (std::size_t i : weighted_pick(weights, m, rng)) g.children.push_back(candidates[i]);
  g.parent = virtual_parent(g.children);
  return g;
}

TimeSplit time_split(std::span<const std::int32_t> origins_in, const std::array<double, 3>& ratios,
                     std::int32_t gap) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ConfigError("time_split: ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("time_split: ratios must sum to 1");
  std::vector<std::int32_t> origins(origins_in.begin(), origins_in.end());
  std::sort(origins.begin(), origins.end());
  origins.erase(std::unique(origins.begin(), origins.end()), origins.end());

  // Try the largest usable count whose ratio allocation fits with the gaps.
  for (std::size_t usable = origins.size(); usable >= 1; --usable) {
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      const double exact = ratios[static_cast<std::size_t>(k)] * static_cast<double>(usable);
      counts[static_cast<std::size_t>(k)] = static_cast<std::size_t>(std::floor(exact));
      frac[static_cast<std::size_t>(k)] = exact - std::floor(exact);
      assigned += counts[static_cast<std::size_t>(k)];
    }
    while (assigned < usable) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < 3; ++k) {
        if (frac[k] > frac[best]) best = k;
      }
      counts[best] += 1;
      frac[best] = -1.0;
      ++assigned;
    }
    bool ok = true;
    for (std::size_t k = 0; k < 3; ++k) {
      if (ratios[k] > 0.0 && counts[k] == 0) ok = false;
    }
    if (!ok) continue;

    std::array<std::vector<std::int32_t>, 3> parts;
    std::size_t pos = 0;
    std::optional<std::int32_t> last;
    for (std::size_t k = 0; k < 3 && ok; ++k) {
      if (counts[k] == 0) continue;
      if (last) {
        while (pos < origins.size() && origins[pos] < *last + gap) ++pos;
      }
      if (pos + counts[k] > origins.size()) {
        ok = false;
        break;
      }
      parts[k].assign(origins.begin() + static_cast<std::ptrdiff_t>(pos),
                      origins.begin() + static_cast<std::ptrdiff_t>(pos + counts[k]));
      pos += counts[k];
      last = parts[k].back();
    }
    if (!ok) continue;
    TimeSplit out;
    out.train = std::move(parts[0]);
    out.val = std::move(parts[1]);
    out.test = std::move(parts[2]);
    if (out.val.empty()) out.warnings.emplace_back("validation split is empty");
    if (out.test.empty()) out.warnings.emplace_back("test split is empty");
    return out;
  }
  throw ConfigError("time_split: too few origins for the requested ratios and gap");
}

}  // namespace craft
