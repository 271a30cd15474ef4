#include "craft/cfb.hpp"

#include <algorithm>
#include <string>

#include "craft/error.hpp"

namespace craft {

Vec early_to_cumulative(const Vec& early) {
  Vec out(early.size());
  double run = 0.0;
  for (Eigen::Index k = 0; k < early.size(); ++k) {
    if (!(early[k] >= 0.0)) throw ValueError("early_to_cumulative: negative entry");
    run += early[k];
    out[k] = run;
  }
  return out;
}

double BookingCurve::operator()(std::int32_t snapshot_day) const {
  auto it = std::upper_bound(steps_.begin(), steps_.end(), snapshot_day,
                             [](std::int32_t day, const auto& step) { return day < step.first; });
  if (it == steps_.begin()) return 0.0;
  return std::prev(it)->second;
}

namespace {

using Steps = std::vector<std::pair<std::int32_t, double>>;

// Sorts raw (day, rooms) pairs, merges equal days and turns them into a
// running total.
Steps to_steps(Steps raw) {
  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Steps steps;
  steps.reserve(raw.size());
  double run = 0.0;
  for (const auto& [day, rooms] : raw) {
    run += rooms;
    if (!steps.empty() && steps.back().first == day) {
      steps.back().second = run;
    } else {
      steps.emplace_back(day, run);
    }
  }
  return steps;
}

}  // namespace

BookingIndex::BookingIndex(std::span<const BookingEvent> events, std::int32_t horizon,
                           std::span<const std::int32_t> hotel_ids)
    : horizon_(horizon) {
  auto reg = [this](std::int32_t id) {
    if (!slot_.contains(id)) {
      const std::size_t s = slot_.size();
      slot_.emplace(id, s);
    }
  };
  for (std::int32_t id : hotel_ids) reg(id);
  for (const BookingEvent& e : events) reg(e.hotel_id);
  const std::size_t cells = slot_.size() * static_cast<std::size_t>(horizon_);
  steps_.assign(cells, {});
  views_.assign(cells, 0.0);
  kept_.assign(cells, 0.0);
  for (const BookingEvent& e : events) {
    if (e.booking_day > e.checkin_day) throw DataError("booking after check-in");
    if (e.checkin_day < 0 || e.checkin_day >= horizon_) continue;
    const std::size_t c = cell(e.hotel_id, e.checkin_day);
    if (!e.converted) {
      views_[c] += e.rooms;
      continue;
    }
    steps_[c].emplace_back(e.booking_day, static_cast<double>(e.rooms));
    if (!e.cancelled) kept_[c] += e.rooms;
  }
  for (auto& s : steps_) s = to_steps(std::move(s));
}

std::size_t BookingIndex::cell(std::int32_t hotel_id, std::int32_t checkin_day) const {
  auto it = slot_.find(hotel_id);
  if (it == slot_.end()) throw NotFoundError("unknown hotel " + std::to_string(hotel_id));
  if (checkin_day < 0 || checkin_day >= horizon_) {
    throw RangeError("check-in day " + std::to_string(checkin_day) + " outside horizon");
  }
  return it->second * static_cast<std::size_t>(horizon_) + static_cast<std::size_t>(checkin_day);
}

BookingCurve BookingIndex::curve(std::int32_t hotel_id, std::int32_t checkin_day) const {
  return BookingCurve(steps_[cell(hotel_id, checkin_day)]);
}

double BookingIndex::unconverted_views(std::int32_t hotel_id, std::int32_t checkin_day) const {
  return views_[cell(hotel_id, checkin_day)];
}

double BookingIndex::kept_rooms(std::int32_t hotel_id, std::int32_t checkin_day) const {
  return kept_[cell(hotel_id, checkin_day)];
}

std::vector<std::pair<std::int32_t, double>> booking_curve_steps(std::span<const BookingEvent> events,
                                                               std::int32_t hotel_id,
                                                               std::int32_t checkin_day) {
  bool known = false;
  Steps raw;
  for (const BookingEvent& e : events) {
    if (e.hotel_id != hotel_id) continue;
    known = true;
    if (e.checkin_day == checkin_day && e.converted) raw.emplace_back(e.booking_day, e.rooms);
  }
  if (!known) throw NotFoundError("unknown hotel " + std::to_string(hotel_id));
  return to_steps(std::move(raw));
}

BoolMat CfbMatrix::lower_mask(std::int32_t size) {
  BoolMat m(size, size);
  for (std::int32_t i = 0; i < size; ++i) {
    for (std::int32_t j = 0; j < size; ++j) m(i, j) = j <= i;
  }
  return m;
}

CfbMatrix CfbMatrix::from_truth(std::int32_t origin, Mat truth) {
  CfbMatrix out;
  out.origin = origin;
  out.size = static_cast<std::int32_t>(truth.rows());
  out.mask = lower_mask(out.size);
  out.values = truth.cwiseProduct(out.mask.cast<double>());
  out.truth = std::move(truth);
  return out;
}

CfbMatrix cfb_matrix(const BookingIndex& index, std::int32_t hotel_id, std::int32_t origin,
                     std::int32_t size) {
  if (size < 1 || origin + 1 < 0 || origin + size >= index.horizon()) {
    throw RangeError("cfb_matrix: window [" + std::to_string(origin + 1) + ", " +
                     std::to_string(origin + size) + "] outside horizon");
  }
  Mat truth(size, size);
  for (std::int32_t i = 0; i < size; ++i) {
    const BookingCurve curve = index.curve(hotel_id, origin + 1 + i);
    for (std::int32_t j = 0; j < size; ++j) truth(i, j) = curve(origin + (j - i));
  }
  return CfbMatrix::from_truth(origin, std::move(truth));
}

}  // namespace craft
