#pragma once

// Model container, little-endian:
//   "MOMB" | u32 version | u32 json_len | json
//   per tensor: u16 name_len | name | u8 dtype (0 = f32) | u8 rank | rank x u64 dims | f32 payload
//   u64 FNV-1a of every preceding byte

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/classifier/model.hpp"
#include "triage/error.hpp"
#include "triage/fnv.hpp"

namespace triage {

inline constexpr char kModelMagic[4] = {'M', 'O', 'M', 'B'};

namespace detail {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    buf_.append(b, n);
  }
  template <typename T>
  void put(T v) {
    raw(&v, sizeof v);
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const char> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  const char* take(std::size_t n, const char* what) {
    if (remaining() < n)
      throw FormatError(FormatError::Kind::kTruncated, pos_, std::string("truncated model file reading ") + what);
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T get(const char* what) {
    T v;
    std::memcpy(&v, take(sizeof v, what), sizeof v);
    return v;
  }

 private:
  std::span<const char> data_;
  std::size_t pos_ = 0;
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::ordered_json header_json(const ModelBundle& m) {
  nlohmann::ordered_json j;
  j["backend"] = to_string(m.backend);
  j["task"] = to_json(m.task);
  if (m.encoder) {
    j["encoder"] = to_json(*m.encoder);
  } else {
    j["encoder"] = nullptr;
  }
  j["linear"] = to_json(m.linear);
  j["train"] = to_json(m.train_config);
  const auto vocab = m.vocab.to_json();
  j["vocabulary"] = vocab;
  j["vocabulary_hash"] = hex64(fnv1a64(vocab.dump()));
  j["tensors"] = m.weights().size();
  return j;
}

}  // namespace detail

inline std::string model_to_bytes(const ModelBundle& m) {
  detail::ByteWriter w;
  w.raw(kModelMagic, 4);
  w.put<std::uint32_t>(ModelBundle::kFormatVersion);
  const std::string json = detail::header_json(m).dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(json.size()));
  w.raw(json.data(), json.size());
  for (const auto& t : m.weights()) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.raw(t.name.data(), t.name.size());
    w.put<std::uint8_t>(0);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.put<std::uint64_t>(d);
    for (Eigen::Index i = 0; i < t.value.size(); ++i) w.put<float>(static_cast<float>(t.value.data()[i]));
  }
  const std::uint64_t sum = fnv1a64(std::string_view(w.bytes()));
  w.put<std::uint64_t>(sum);
  return std::move(w.bytes());
}

inline ModelBundle model_from_bytes(std::span<const char> data) {
  using Kind = FormatError::Kind;
  detail::ByteReader r(data);
  if (data.size() < 4) throw FormatError(Kind::kTruncated, data.size(), "model file shorter than its magic");
  if (std::memcmp(r.take(4, "magic"), kModelMagic, 4) != 0)
    throw FormatError(Kind::kBadMagic, 0, "not a model container (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != ModelBundle::kFormatVersion)
    throw FormatError(Kind::kUnsupportedVersion, 4,
                      "unsupported model format version " + std::to_string(version));
  const auto json_len = r.get<std::uint32_t>("header length");
  const std::size_t json_offset = r.offset();
  const std::string json_text(r.take(json_len, "header"), json_len);

  struct RawTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    const char* payload;
    std::size_t offset;
  };
  std::vector<RawTensor> raw;
  while (r.remaining() > sizeof(std::uint64_t)) {
    RawTensor t;
    t.offset = r.offset();
    const auto name_len = r.get<std::uint16_t>("tensor name length");
    t.name.assign(r.take(name_len, "tensor name"), name_len);
    const auto dtype = r.get<std::uint8_t>("tensor dtype");
    if (dtype != 0) throw FormatError(Kind::kMalformed, t.offset, "unsupported tensor dtype " + std::to_string(dtype));
    const auto rank = r.get<std::uint8_t>("tensor rank");
    if (rank == 0 || rank > 2) throw FormatError(Kind::kMalformed, t.offset, "unsupported tensor rank");
    std::uint64_t count = 1;
    for (int i = 0; i < rank; ++i) {
      t.dims.push_back(r.get<std::uint64_t>("tensor dims"));
      if (t.dims.back() != 0 && count > (std::uint64_t{1} << 40) / t.dims.back())
        throw FormatError(Kind::kMalformed, t.offset, "tensor too large");
      count *= t.dims.back();
    }
    t.payload = r.take(count * sizeof(float), "tensor payload");
    raw.push_back(std::move(t));
  }
  if (r.remaining() < sizeof(std::uint64_t))
    throw FormatError(Kind::kTruncated, r.offset(), "model file ends before its checksum");
  const std::size_t checksum_offset = r.offset();
  const auto stored = r.get<std::uint64_t>("checksum");
  const auto actual = fnv1a64(std::string_view(data.data(), checksum_offset));
  if (stored != actual) throw FormatError(Kind::kChecksumMismatch, checksum_offset, "model checksum mismatch");

  ModelBundle m;
  try {
    const auto j = nlohmann::json::parse(json_text);
    m.backend = backend_from_string(j.at("backend").get<std::string>());
    m.task = task_config_from_json(j.at("task"));
    if (!j.at("encoder").is_null()) m.encoder = encoder_config_from_json(j.at("encoder"));
    m.linear = linear_config_from_json(j.at("linear"));
    m.train_config = train_config_from_json(j.at("train"));
    m.vocab = Vocabulary::from_json(j.at("vocabulary"));
    if (j.at("vocabulary_hash").get<std::string>() != detail::hex64(fnv1a64(m.vocab.to_json().dump())))
      throw FormatError(Kind::kMalformed, json_offset, "vocabulary hash does not match vocabulary");
    if (j.at("tensors").get<std::size_t>() != raw.size())
      throw FormatError(Kind::kMalformed, checksum_offset, "tensor count differs from header");
    if (m.backend == Backend::kTransformer && !m.encoder)
      throw FormatError(Kind::kMalformed, json_offset, "transformer model without encoder config");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(Kind::kMalformed, json_offset, std::string("invalid model header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(Kind::kMalformed, json_offset, std::string("invalid model header: ") + e.what());
  }

  // Expected layout comes from re-initializing with the stored configs.
  ModelOptions opts;
  if (m.encoder) opts.encoder = *m.encoder;
  opts.linear = m.linear;
  opts.max_seq_len = m.train_config.max_seq_len;
  const ModelBundle layout = init_model(m.backend, m.task, m.vocab, 0, opts);
  if (layout.weights().size() != raw.size())
    throw FormatError(Kind::kMalformed, json_offset, "tensor list does not match model configuration");

  std::vector<Tensor> tensors;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& want = layout.weights()[i];
    const auto& t = raw[i];
    if (t.name != want.name || t.dims != want.dims)
      throw FormatError(Kind::kMalformed, t.offset, "unexpected tensor " + t.name);
    Mat value(want.value.rows(), want.value.cols());
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      float f;
      std::memcpy(&f, t.payload + static_cast<std::size_t>(k) * sizeof(float), sizeof f);
      if (!std::isfinite(f)) throw FormatError(Kind::kMalformed, t.offset, "non-finite weight in " + t.name);
      value.data()[k] = f;
    }
    tensors.push_back({t.name, t.dims, std::move(value)});
  }
  m.set_weights(std::move(tensors));
  return m;
}

inline void save_model(const ModelBundle& m, const std::string& path) {
  if (!m.all_finite()) throw Error("refusing to save a model with non-finite weights");
  const std::string bytes = model_to_bytes(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing model: " + path);
}

inline ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_bytes(bytes);
}

/// Stable identifier of a model: hex FNV-1a of its serialized form.
inline std::string model_id(const ModelBundle& m) {
  return detail::hex64(fnv1a64(std::string_view(model_to_bytes(m))));
}

}  // namespace triage
