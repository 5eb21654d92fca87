#include "ragaseq/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <vector>

namespace ragaseq {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'G', 'S', 'Q', 'C', 'K', 'P', 'T'};

class Writer {
public:
  template <class U>
  void put(U value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(U));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<char>& bytes() { return bytes_; }

private:
  std::vector<char> bytes_;
};

class Reader {
public:
  explicit Reader(std::span<const char> data) : data_(data) {}

  template <class U>
  U get() {
    U value;
    get_bytes(&value, sizeof(U));
    return value;
  }
  void get_bytes(void* out, std::size_t n) {
    if (pos_ + n > data_.size()) throw Error("checkpoint: truncated file");
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

private:
  std::span<const char> data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const char> data) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace

std::string config_to_json(const ModelConfig& c) {
  nlohmann::json j = {{"vocab_size", c.vocab_size},     {"embed_dim", c.embed_dim},
                      {"lstm_hidden", c.lstm_hidden},   {"attention_dim", c.attention_dim},
                      {"dense1_units", c.dense1_units}, {"n_classes", c.n_classes},
                      {"dropout_rate", c.dropout_rate}, {"embedding_head", c.embedding_head},
                      {"embedding_dim", c.embedding_dim}, {"k_levels", c.k_levels},
                      {"clamp_octaves", c.clamp_octaves}, {"subseq_len", c.subseq_len}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    j.at("vocab_size").get_to(c.vocab_size);
    j.at("embed_dim").get_to(c.embed_dim);
    j.at("lstm_hidden").get_to(c.lstm_hidden);
    j.at("attention_dim").get_to(c.attention_dim);
    j.at("dense1_units").get_to(c.dense1_units);
    j.at("n_classes").get_to(c.n_classes);
    j.at("dropout_rate").get_to(c.dropout_rate);
    j.at("embedding_head").get_to(c.embedding_head);
    j.at("embedding_dim").get_to(c.embedding_dim);
    j.at("k_levels").get_to(c.k_levels);
    j.at("clamp_octaves").get_to(c.clamp_octaves);
    j.at("subseq_len").get_to(c.subseq_len);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: bad config header: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params) {
  params.check_shapes(config);
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  const auto header = config_to_json(config);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
  w.put_bytes(header.data(), header.size());
  const auto tensors = params.all();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (auto [name, value] : tensors) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(value->rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(value->cols()));
    w.put_bytes(value->data(), sizeof(float) * static_cast<std::size_t>(value->size()));
  }
  w.put<std::uint32_t>(crc(w.bytes()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("checkpoint: cannot open " + path.string() + " for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw Error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 4) throw Error("checkpoint: file too short: " + path.string());
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error("checkpoint: bad magic in " + path.string());

  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  const std::span<const char> body(bytes.data(), bytes.size() - 4);
  if (crc(body) != stored_crc) throw Error("checkpoint: checksum mismatch in " + path.string());

  Reader r(body);
  char magic[sizeof(kMagic)];
  r.get_bytes(magic, sizeof(magic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  std::string header(r.get<std::uint32_t>(), '\0');
  r.get_bytes(header.data(), header.size());

  Checkpoint ck;
  ck.config = config_from_json(header);
  ck.params = ModelParams::zeros(ck.config);
  auto tensors = ck.params.all();
  const auto count = r.get<std::uint32_t>();
  if (count != tensors.size()) throw Error("checkpoint: unexpected tensor count " + std::to_string(count));
  for (auto [name, value] : tensors) {
    std::string stored(r.get<std::uint16_t>(), '\0');
    r.get_bytes(stored.data(), stored.size());
    if (stored != name) throw Error("checkpoint: expected tensor " + std::string(name) + ", found " + stored);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (rows != value->rows() || cols != value->cols())
      throw Error("checkpoint: tensor " + stored + " shape does not match its config");
    r.get_bytes(value->data(), sizeof(float) * static_cast<std::size_t>(value->size()));
  }
  if (r.remaining() != 0) throw Error("checkpoint: trailing bytes in " + path.string());
  return ck;
}

ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  auto ck = load_checkpoint(path);
  if (!(ck.config == expected))
    throw Error("checkpoint: config in " + path.string() + " does not match the requested model");
  return std::move(ck.params);
}

}  // namespace ragaseq
