#include "craft/dataset.hpp"

#include <fstream>
#include <sstream>

#include "craft/config.hpp"
#include "craft/error.hpp"

namespace craft {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
  }
  return rows;
}

Vec vec_from(const json& j, Eigen::Index expect, const char* field) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expect) {
    throw ParseError(std::string("field ") + field + " has wrong length");
  }
  Vec v(expect);
  for (Eigen::Index i = 0; i < expect; ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

Mat mat_from(const json& j, Eigen::Index rows, Eigen::Index cols, const char* field) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ParseError(std::string("field ") + field + " has wrong row count");
  }
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError(std::string("field ") + field + " has wrong column count");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json cfb_json(const CfbMatrix& m) {
  json j{{"origin", m.origin}, {"values", mat_json(m.values)}};
  if (m.truth) j["truth"] = mat_json(*m.truth);
  return j;
}

CfbMatrix cfb_from(const json& j, std::int32_t P, const char* field) {
  CfbMatrix m;
  m.origin = j.at("origin").get<std::int32_t>();
  m.size = P;
  m.mask = CfbMatrix::lower_mask(P);
  m.values = mat_from(j.at("values"), P, P, field);
  if (j.contains("truth")) m.truth = mat_from(j.at("truth"), P, P, field);
  return m;
}

}  // namespace

json sample_to_json(const ForecastSample& s) {
  return json{{"hotel_id", s.hotel_id},
              {"district_id", s.district_id},
              {"city_id", s.city_id},
              {"origin", s.origin},
              {"L", s.L},
              {"P", s.P},
              {"y_L", vec_json(s.y_L)},
              {"y_P", vec_json(s.y_P)},
              {"c_L_series", vec_json(s.c_L_series)},
              {"c_Lmat", cfb_json(s.c_Lmat)},
              {"c_P", cfb_json(s.c_P)},
              {"itm_rows", mat_json(s.itm_rows)},
              {"y_lower", vec_json(s.y_lower)},
              {"y_upper", vec_json(s.y_upper)}};
}

ForecastSample sample_from_json(const json& j) {
  try {
    ForecastSample s;
    s.hotel_id = j.at("hotel_id").get<std::int32_t>();
    s.district_id = j.at("district_id").get<std::int32_t>();
    s.city_id = j.at("city_id").get<std::int32_t>();
    s.origin = j.at("origin").get<std::int32_t>();
    s.L = j.at("L").get<std::int32_t>();
    s.P = j.at("P").get<std::int32_t>();
    if (s.L < 1 || s.P < 1) throw ParseError("non-positive window length");
    s.y_L = vec_from(j.at("y_L"), s.L, "y_L");
    s.y_P = vec_from(j.at("y_P"), s.P, "y_P");
    s.c_L_series = vec_from(j.at("c_L_series"), s.L, "c_L_series");
    s.c_Lmat = cfb_from(j.at("c_Lmat"), s.P, "c_Lmat");
    s.c_P = cfb_from(j.at("c_P"), s.P, "c_P");
    s.itm_rows = mat_from(j.at("itm_rows"), s.P, s.L + s.P, "itm_rows");
    s.y_lower = vec_from(j.at("y_lower"), s.P, "y_lower");
    s.y_upper = vec_from(j.at("y_upper"), s.P, "y_upper");
    return s;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

void write_dataset(std::span<const ForecastSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const ForecastSample& s : samples) out << sample_to_json(s).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<ForecastSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<ForecastSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_world(const HotelWorld& w, const std::filesystem::path& path) {
  json hotels = json::array();
  for (const Hotel& h : w.hotels) {
    hotels.push_back(json{{"hotel_id", h.hotel_id},
                          {"district_id", h.district_id},
                          {"city_id", h.city_id},
                          {"base_demand", h.base_demand},
                          {"weekly", h.weekly},
                          {"lead_mean", h.lead_mean},
                          {"same_day_prob", h.same_day_prob}});
  }
  std::vector<std::int32_t> hid, cin, bday, rooms;
  std::vector<std::uint8_t> conv, canc;
  for (const BookingEvent& e : w.events) {
    hid.push_back(e.hotel_id);
    cin.push_back(e.checkin_day);
    bday.push_back(e.booking_day);
    rooms.push_back(e.rooms);
    conv.push_back(e.converted ? 1 : 0);
    canc.push_back(e.cancelled ? 1 : 0);
  }
  json doc{{"format", "craft-world"},
           {"version", 1},
           {"seed", w.seed},
           {"horizon", w.horizon},
           {"config", world_config_to_json(w.config)},
           {"hotels", hotels},
           {"holidays", w.holidays},
           {"events",
            {{"hotel_id", hid},
             {"checkin_day", cin},
             {"booking_day", bday},
             {"rooms", rooms},
             {"converted", conv},
             {"cancelled", canc}}},
           {"labels", mat_json(w.labels)},
           {"walkins", mat_json(w.walkins)}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

HotelWorld read_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "craft-world" || doc.at("version") != 1) {
      throw ParseError("unsupported world format");
    }
    HotelWorld w;
    w.seed = doc.at("seed").get<std::uint64_t>();
    w.horizon = doc.at("horizon").get<std::int32_t>();
    w.config = world_config_from_json(doc.at("config"));
    for (const json& h : doc.at("hotels")) {
      Hotel x;
      x.hotel_id = h.at("hotel_id").get<std::int32_t>();
      x.district_id = h.at("district_id").get<std::int32_t>();
      x.city_id = h.at("city_id").get<std::int32_t>();
      x.base_demand = h.at("base_demand").get<double>();
      x.weekly = h.at("weekly").get<std::array<double, 7>>();
      x.lead_mean = h.at("lead_mean").get<double>();
      x.same_day_prob = h.at("same_day_prob").get<double>();
      w.hotels.push_back(x);
    }
    w.holidays = doc.at("holidays").get<std::vector<std::vector<std::uint8_t>>>();
    const json& ev = doc.at("events");
    const auto hid = ev.at("hotel_id").get<std::vector<std::int32_t>>();
    const auto cin = ev.at("checkin_day").get<std::vector<std::int32_t>>();
    const auto bday = ev.at("booking_day").get<std::vector<std::int32_t>>();
    const auto rooms = ev.at("rooms").get<std::vector<std::int32_t>>();
    const auto conv = ev.at("converted").get<std::vector<std::uint8_t>>();
    const auto canc = ev.at("cancelled").get<std::vector<std::uint8_t>>();
    const std::size_t n = hid.size();
    if (cin.size() != n || bday.size() != n || rooms.size() != n || conv.size() != n || canc.size() != n) {
      throw ParseError("event columns differ in length");
    }
    w.events.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      w.events[i] = BookingEvent{hid[i], cin[i], bday[i], rooms[i], conv[i] != 0, canc[i] != 0};
    }
    const auto rows = static_cast<Eigen::Index>(w.hotels.size());
    w.labels = mat_from(doc.at("labels"), rows, w.horizon, "labels");
    w.walkins = mat_from(doc.at("walkins"), rows, w.horizon, "walkins");
    w.reindex();
    return w;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace craft
