#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "craft/model.hpp"
#include "craft/world.hpp"

namespace fixture {

using namespace craft;

inline WorldConfig small_world_config() {
  WorldConfig c;
  c.n_cities = 1;
  c.districts_per_city = 2;
  c.hotels_per_district = 6;
  c.horizon_days = 60;
  return c;
}

inline HotelWorld small_world(std::uint64_t seed = 7) { return generate_world(small_world_config(), seed); }

// One hotel, a horizon of `horizon` days, no events and zero labels.
inline HotelWorld empty_world(std::int32_t horizon, std::int32_t hotels = 1) {
  HotelWorld w;
  w.horizon = horizon;
  w.seed = 0;
  for (std::int32_t h = 0; h < hotels; ++h) {
    Hotel x;
    x.hotel_id = h;
    x.weekly.fill(1.0);
    w.hotels.push_back(x);
  }
  w.holidays.assign(1, std::vector<std::uint8_t>(static_cast<std::size_t>(horizon), 0));
  w.labels = Mat::Zero(hotels, horizon);
  w.walkins = Mat::Zero(hotels, horizon);
  w.reindex();
  return w;
}

// g groups of m children built from a small world at one origin.
inline NodeBatch micro_batch(const HotelWorld& w, std::int32_t L, std::int32_t P, std::int32_t m,
                             std::int32_t groups, std::int32_t origin) {
  std::vector<HierGroup> gs;
  std::int32_t next = 0;
  for (std::int32_t g = 0; g < groups; ++g) {
    HierGroup hg;
    const std::int32_t district = w.hotels[static_cast<std::size_t>(next)].district_id;
    for (const Hotel& h : w.hotels) {
      if (static_cast<std::int32_t>(hg.children.size()) == m) break;
      if (h.district_id != district || h.hotel_id < next) continue;
      hg.children.push_back(build_sample(w, h.hotel_id, origin + g, L, P));
    }
    next += m;
    hg.parent = virtual_parent(hg.children);
    gs.push_back(std::move(hg));
  }
  return make_batch(gs);
}

// Perturbs every parameter so biases are non-zero as well.
inline void jitter(CraftParams& p, std::uint64_t seed, double sd = 0.3) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  for (ParamTensor* t : p.tensors())
    for (Eigen::Index i = 0; i < t->value.size(); ++i) t->value.data()[i] += n(rng);
}

}  // namespace fixture
