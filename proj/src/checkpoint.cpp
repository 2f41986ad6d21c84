#include "rnf/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rnf/data.h"
#include "rnf/errors.h"

namespace rnf {

namespace {

constexpr char kMagic[8] = {'R', 'N', 'F', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out += static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const std::string& field) {
    need(sizeof(T), field);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string_view take(std::uint64_t n, const std::string& field) {
    need(n, field);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n, const std::string& field) {
    if (n > bytes_.size() - pos_) {
      throw LoadError(field, "truncated (needs " + std::to_string(n) + " bytes, " +
                                 std::to_string(bytes_.size() - pos_) + " left)");
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string encode_tensor(const Tensor& t) {
  std::string out;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put<std::uint64_t>(out, d);
  for (double v : t.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Tensor decode_tensor(std::string_view payload, const std::string& field) {
  Reader r(payload);
  const auto rank = r.get<std::uint32_t>(field + ".rank");
  if (rank > 8) throw LoadError(field + ".rank", "implausible rank " + std::to_string(rank));
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape.push_back(r.get<std::uint64_t>(field + ".dims"));
    count *= shape.back();
  }
  if (count > payload.size() / 8) throw LoadError(field + ".values", "truncated");
  std::vector<double> values(count);
  for (auto& v : values) v = std::bit_cast<double>(r.get<std::uint64_t>(field + ".values"));
  if (!r.done()) throw LoadError(field, "trailing bytes");
  return Tensor::from(shape, std::move(values), true);
}

}  // namespace

const std::string& Checkpoint::require(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw LoadError("meta." + key, "missing");
  return it->second;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(1 + ckpt.params.size()));

  auto section = [&out](const std::string& name, const std::string& payload) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint64_t>(out, payload.size());
    out += payload;
  };
  std::string meta;
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ArgumentError("checkpoint metadata '" + k + "' cannot be encoded");
    }
    meta += k + "=" + v + "\n";
  }
  section("meta", meta);
  for (const auto& [name, t] : ckpt.params) section("param/" + name, encode_tensor(t));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write checkpoint: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ConfigError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes);
  if (r.take(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic))) {
    throw LoadError("magic", "not a checkpoint file");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw LoadError("version", "found " + std::to_string(version) + ", expected " +
                                   std::to_string(kCheckpointVersion));
  }
  const auto sections = r.get<std::uint32_t>("section_count");
  Checkpoint ckpt;
  bool have_meta = false;
  for (std::uint32_t s = 0; s < sections; ++s) {
    const std::string where = "section[" + std::to_string(s) + "]";
    const auto name_len = r.get<std::uint32_t>(where + ".name_length");
    const std::string name(r.take(name_len, where + ".name"));
    const auto payload_len = r.get<std::uint64_t>(name + ".payload_length");
    const auto payload = r.take(payload_len, name + ".payload");
    if (name == "meta") {
      have_meta = true;
      std::istringstream lines{std::string(payload)};
      for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw LoadError("meta", "malformed line '" + line + "'");
        ckpt.meta[line.substr(0, eq)] = line.substr(eq + 1);
      }
    } else if (name.rfind("param/", 0) == 0) {
      ckpt.params.emplace_back(name.substr(6), decode_tensor(payload, name));
    } else {
      throw LoadError(name, "unknown section");
    }
  }
  if (!have_meta) throw LoadError("meta", "missing");
  if (!r.done()) throw LoadError("section_count", "trailing bytes after last section");
  return ckpt;
}

}  // namespace rnf
