#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "craft/checkpoint.hpp"
#include "craft/config.hpp"
#include "craft/dataset.hpp"
#include "craft/error.hpp"
#include "support/fixtures.hpp"

using namespace craft;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "craft_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

void check_same(const ForecastSample& a, const ForecastSample& b) {
  CHECK(a.hotel_id == b.hotel_id);
  CHECK(a.district_id == b.district_id);
  CHECK(a.city_id == b.city_id);
  CHECK(a.origin == b.origin);
  CHECK(a.L == b.L);
  CHECK(a.P == b.P);
  CHECK(a.y_L == b.y_L);
  CHECK(a.y_P == b.y_P);
  CHECK(a.c_L_series == b.c_L_series);
  CHECK(a.c_Lmat.values == b.c_Lmat.values);
  CHECK(a.c_Lmat.mask == b.c_Lmat.mask);
  CHECK(a.c_P.values == b.c_P.values);
  CHECK(a.c_P.mask == b.c_P.mask);
  REQUIRE(a.c_P.truth.has_value() == b.c_P.truth.has_value());
  if (a.c_P.truth) CHECK(*a.c_P.truth == *b.c_P.truth);
  CHECK(a.itm_rows == b.itm_rows);
  CHECK(a.y_lower == b.y_lower);
  CHECK(a.y_upper == b.y_upper);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("config text") {
  const ConfigMap m = parse_config_text("# comment\nL = 21\n\nvariant = itm  # trailing\nlr=0.005\n");
  CHECK(m.size() == 3);
  const TrainConfig c = train_config_from_map(m);
  CHECK(c.L == 21);
  CHECK(c.variant == Variant::itm);
  CHECK(c.lr == 0.005);
  CHECK(c.P == 7);

  TrainConfig d;
  d.alpha1 = 123.456789012345;
  d.koopman_scope = KoopmanScope::group;
  d.seed = 99;
  d.data_dir = "some/dir";
  const TrainConfig back = train_config_from_map(parse_config_text(to_config_text(d)));
  CHECK(back.alpha1 == d.alpha1);
  CHECK(back.koopman_scope == KoopmanScope::group);
  CHECK(back.seed == 99);
  CHECK(back.data_dir == "some/dir");
  CHECK(to_config_text(back) == to_config_text(d));

  WorldConfig w = fixture::small_world_config();
  const WorldConfig wb = world_config_from_map(parse_config_text(to_config_text(w)));
  CHECK(to_config_text(wb) == to_config_text(w));
  CHECK(world_config_to_json(world_config_from_json(world_config_to_json(w))) == world_config_to_json(w));

  CHECK_THROWS_AS(parse_config_text("L = 3\nL = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(train_config_from_map({{"not_a_key", "1"}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_map({{"L", "abc"}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_map({{"variant", "bogus"}}), ConfigError);
  try {
    parse_config_text("L = 3\n\nL = 4\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
}

TEST_CASE("dataset round trip") {
  const HotelWorld w = fixture::small_world(5);
  std::vector<ForecastSample> xs;
  for (std::int32_t t : {20, 33, 45})
    for (const Hotel& h : w.hotels) xs.push_back(build_sample(w, h.hotel_id, t, 14, 7));
  std::vector<ForecastSample> group(xs.begin(), xs.begin() + 3);
  xs.push_back(virtual_parent(group));
  const fs::path p = scratch("ds.jsonl");
  write_dataset(xs, p);
  const std::vector<ForecastSample> back = read_dataset(p);
  REQUIRE(back.size() == xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) check_same(xs[k], back[k]);

  // Cut the file in the middle of the third record.
  const std::string text = slurp(p);
  std::size_t at = 0;
  for (int k = 0; k < 2; ++k) at = text.find('\n', at) + 1;
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text.substr(0, at + 40);
  }
  try {
    (void)read_dataset(p);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  CHECK_THROWS_AS(read_dataset(scratch("missing.jsonl")), DataError);
}

TEST_CASE("dataset build and write throughput") {
  WorldConfig c;
  c.n_cities = 1;
  c.districts_per_city = 5;
  c.hotels_per_district = 20;
  c.horizon_days = 140;
  const HotelWorld w = generate_world(c, 2);
  const auto start = std::chrono::steady_clock::now();
  std::vector<ForecastSample> xs;
  const std::vector<std::int32_t> origins = valid_origins(w, 30, 7);
  for (std::int32_t t : origins) {
    for (const Hotel& h : w.hotels) {
      if (xs.size() == 10000) break;
      xs.push_back(build_sample(w, h.hotel_id, t, 30, 7));
    }
  }
  REQUIRE(xs.size() == 10000);
  write_dataset(xs, scratch("big.jsonl"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 10.0);
}

TEST_CASE("world round trip") {
  const HotelWorld w = fixture::small_world(8);
  const fs::path p = scratch("world.json");
  write_world(w, p);
  const HotelWorld b = read_world(p);
  CHECK(b.seed == w.seed);
  CHECK(b.horizon == w.horizon);
  CHECK(b.hotels == w.hotels);
  CHECK(b.holidays == w.holidays);
  CHECK(b.events == w.events);
  CHECK(b.labels == w.labels);
  CHECK(b.walkins == w.walkins);
  check_same(build_sample(w, 3, 30, 14, 7), build_sample(b, 3, 30, 14, 7));
}

TEST_CASE("checkpoint") {
  TrainConfig c;
  c.L = 9;
  c.P = 3;
  c.D = 5;
  c.variant = Variant::itm_etg;
  CraftParams p = CraftParams::init(c.L, c.P, c.D, 4);
  fixture::jitter(p, 1);
  p.value_scale = 12.5;
  const std::string bytes = encode_checkpoint(c, p);
  CHECK(bytes.substr(0, 8) == "CRAFTCKP");
  Checkpoint back = decode_checkpoint(bytes);
  CHECK(to_config_text(back.config) == to_config_text(c));
  CHECK(back.params.value_scale == 12.5);
  const auto a = p.tensors(), b = back.params.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k]->name == b[k]->name);
    CHECK(a[k]->value == b[k]->value);
  }
  CHECK(encode_checkpoint(back.config, back.params) == bytes);

  const fs::path path = scratch("model.ckpt");
  save_checkpoint(path, c, p);
  CHECK(slurp(path) == bytes);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(encode_checkpoint(c, loaded.params) == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), ParseError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ParseError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 10)), ParseError);
  std::string ver = bytes;
  ver[8] = 2;
  try {
    (void)decode_checkpoint(ver);
    FAIL("expected DataError");
  } catch (const ParseError&) {
    FAIL("version mismatch is not a parse error");
  } catch (const DataError&) {
  }
}
