#pragma once

// Booking events, booking curves and cross-future booking (CFB) matrices.
//
// CFB matrices use a row-relative snapshot layout: for a matrix anchored at
// origin t, row i is check-in day t+1+i and column j is that day's booking
// curve read at snapshot day t+(j-i). The diagonal is the as-of-origin
// snapshot, so the entries observable at t are exactly j <= i.

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "craft/numeric.hpp"

namespace craft {

struct BookingEvent {
  std::int32_t hotel_id = 0;
  std::int32_t checkin_day = 0;
  std::int32_t booking_day = 0;
  std::int32_t rooms = 0;
  // false: an order-page view that did not convert (rooms counts views).
  bool converted = true;
  // Converted but cancelled before check-in: still part of the booking
  // curve, excluded from the realized label.
  bool cancelled = false;

  bool operator==(const BookingEvent&) const = default;
};

/// Prefix sums: out[k] = sum_{j<=k} early[j]. Throws ValueError on a negative entry.
Vec early_to_cumulative(const Vec& early);

/// Cumulative rooms booked for one (hotel, check-in day) as a step function of
/// the snapshot day.
class BookingCurve {
 public:
  BookingCurve() = default;
  // steps: (booking_day, cumulative rooms) sorted by day, strictly increasing days.
  explicit BookingCurve(std::span<const std::pair<std::int32_t, double>> steps) : steps_(steps) {}

  double operator()(std::int32_t snapshot_day) const;
  double final_total() const { return steps_.empty() ? 0.0 : steps_.back().second; }

 private:
  std::span<const std::pair<std::int32_t, double>> steps_;
};

/// Per (hotel, check-in day) booking curves and aggregates over an event log.
class BookingIndex {
 public:
  BookingIndex() = default;
  // Hotels listed in `hotel_ids` are known even when they have no events.
  BookingIndex(std::span<const BookingEvent> events, std::int32_t horizon,
               std::span<const std::int32_t> hotel_ids = {});

  bool has_hotel(std::int32_t hotel_id) const { return slot_.contains(hotel_id); }
  // Throws NotFoundError for unknown hotels, RangeError for days outside the horizon.
  BookingCurve curve(std::int32_t hotel_id, std::int32_t checkin_day) const;
  double unconverted_views(std::int32_t hotel_id, std::int32_t checkin_day) const;
  // Converted, non-cancelled rooms.
  double kept_rooms(std::int32_t hotel_id, std::int32_t checkin_day) const;
  std::int32_t horizon() const { return horizon_; }

 private:
  std::size_t cell(std::int32_t hotel_id, std::int32_t checkin_day) const;

  std::int32_t horizon_ = 0;
  std::unordered_map<std::int32_t, std::size_t> slot_;
  std::vector<std::vector<std::pair<std::int32_t, double>>> steps_;
  std::vector<double> views_;
  std::vector<double> kept_;
};

/// Curve built by scanning an unindexed event log. Throws NotFoundError when
/// the log has no event for `hotel_id`.
std::vector<std::pair<std::int32_t, double>> booking_curve_steps(std::span<const BookingEvent> events,
                                                               std::int32_t hotel_id,
                                                               std::int32_t checkin_day);

struct CfbMatrix {
  std::int32_t origin = 0;
  std::int32_t size = 0;
  Mat values;
  BoolMat mask;
  std::optional<Mat> truth;

  static BoolMat lower_mask(std::int32_t size);
  // values = truth on the mask, zero elsewhere.
  static CfbMatrix from_truth(std::int32_t origin, Mat truth);
};

/// CFB matrix of `size` anchored at `origin` for one hotel. Throws RangeError
/// when any check-in day t+1..t+size falls outside the horizon.
CfbMatrix cfb_matrix(const BookingIndex& index, std::int32_t hotel_id, std::int32_t origin,
                     std::int32_t size);

}  // namespace craft
