#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mmbs/error.hpp"
#include "mmbs/model.hpp"

namespace mmbs {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'B', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw DataError("checkpoint is truncated");
  }

  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Model& m, const nlohmann::ordered_json& meta, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["model"] = to_json(m.config());
  header["token_vocab"] = m.token_vocab();
  header["answer_vocab"] = m.answer_vocab();
  header["meta"] = meta;
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  m.params().for_each([&](std::string_view name, const Tensor& t) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put<std::uint64_t>(out, t.rows);
    put<std::uint64_t>(out, t.cols);
    for (double v : t.data) put<double>(out, v);
  });
  put<std::uint64_t>(out, fnv1a(out));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("I/O failure writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) { return DataError("checkpoint '" + path.string() + "': " + why); };

  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw fail("not a checkpoint (bad magic or truncated)");
  }
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kVersion) throw fail("unsupported version " + std::to_string(version));

  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.substr(0, body))) throw fail("checksum mismatch (corrupt or truncated)");

  try {
    Reader r(bytes, body);
    r.take(sizeof(kMagic));
    r.get<std::uint32_t>();
    const auto header_len = r.get<std::uint64_t>();
    const auto header = nlohmann::ordered_json::parse(r.take(header_len));
    const ModelConfig cfg = model_config_from_json(header.at("model"));
    ModelParams params = ModelParams::zeros(cfg);
    params.for_each([&](std::string_view name, Tensor& t) {
      const auto name_len = r.get<std::uint32_t>();
      if (r.take(name_len) != name) throw fail("unexpected tensor order");
      const auto rows = r.get<std::uint64_t>();
      const auto cols = r.get<std::uint64_t>();
      if (rows != t.rows || cols != t.cols) throw fail("tensor '" + std::string(name) + "' has the wrong shape");
      for (auto& v : t.data) v = r.get<double>();
    });
    if (!r.done()) throw fail("trailing bytes");
    Model model(cfg, std::move(params), header.at("token_vocab").get<std::vector<std::string>>(),
                header.at("answer_vocab").get<std::vector<std::string>>());
    return {std::move(model), header.at("meta")};
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw fail(e.what());
  }
}

}  // namespace mmbs
