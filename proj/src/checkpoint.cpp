#include "craft/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "craft/error.hpp"

namespace craft {

namespace {

constexpr char kMagic[8] = {'C', 'R', 'A', 'F', 'T', 'C', 'K', 'P'};

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + at_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    at_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(at_, n);
    at_ += n;
    return s;
  }

  void need(std::uint64_t n) const {
    if (n > bytes_.size() - at_) throw ParseError("checkpoint: truncated");
  }
  bool done() const { return at_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t at_ = 0;
};

}  // namespace

std::string encode_checkpoint(const TrainConfig& config, CraftParams& params) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, to_config_text(config));
  put<std::int32_t>(out, params.L);
  put<std::int32_t>(out, params.P);
  put<std::int32_t>(out, params.D);
  put<double>(out, params.value_scale);
  const std::vector<ParamTensor*> ts = params.tensors();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ts.size()));
  for (const ParamTensor* t : ts) {
    put_string(out, t->name);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t->value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t->value.cols()));
    for (Eigen::Index i = 0; i < t->value.size(); ++i) put<double>(out, t->value.data()[i]);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError("checkpoint: bad magic");
  }
  const std::string body = bytes.substr(sizeof kMagic);
  Reader r(body);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: format version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  ck.config = train_config_from_map(parse_config_text(r.get_string()));
  const auto L = r.get<std::int32_t>();
  const auto P = r.get<std::int32_t>();
  const auto D = r.get<std::int32_t>();
  if (L != ck.config.L || P != ck.config.P || D != ck.config.D) {
    throw ParseError("checkpoint: model shape disagrees with its config");
  }
  ck.params = CraftParams::init(L, P, D, 0);
  ck.params.value_scale = r.get<double>();
  const auto count = r.get<std::uint32_t>();
  std::vector<ParamTensor*> ts = ck.params.tensors();
  if (count != ts.size()) throw ParseError("checkpoint: tensor count mismatch");
  for (ParamTensor* t : ts) {
    const std::string name = r.get_string();
    if (name != t->name) throw ParseError("checkpoint: unexpected tensor " + name);
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows != static_cast<std::uint64_t>(t->value.rows()) || cols != static_cast<std::uint64_t>(t->value.cols())) {
      throw ParseError("checkpoint: shape mismatch for " + name);
    }
    for (Eigen::Index i = 0; i < t->value.size(); ++i) t->value.data()[i] = r.get<double>();
    t->zero_grad();
  }
  if (!r.done()) throw ParseError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config, CraftParams& params) {
  const std::string bytes = encode_checkpoint(config, params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace craft
