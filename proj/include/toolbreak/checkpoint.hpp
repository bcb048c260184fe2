#ifndef TOOLBREAK_CHECKPOINT_HPP
#define TOOLBREAK_CHECKPOINT_HPP

// Checkpoint file:
//   "TBSN" | u8 version | u64 text_length | text (UTF-8 key=value lines:
//   model spec, optimizer scalars, training metadata)
//   | u32 tensor_count | tensor_count x entry | payload
// entry: u16 name_length | name | u8 dtype (0 = f64, 1 = f32) | u8 rank
//        | rank x u64 extent | u64 byte offset into payload
// Payload values are little-endian. Tensors are stored in model order:
// parameters, buffers, then Adam moments ("adam.m.<param>", "adam.v.<param>").

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "toolbreak/error.hpp"
#include "toolbreak/kv_text.hpp"
#include "toolbreak/model.hpp"
#include "toolbreak/optim.hpp"
#include "toolbreak/signal_io.hpp"
#include "toolbreak/time_features.hpp"

namespace toolbreak {

inline constexpr std::array<char, 4> kCheckpointMagic{'T', 'B', 'S', 'N'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

enum class StoragePrecision : std::uint8_t { f64 = 0, f32 = 1 };

struct NamedTensor {
  std::string name;
  Tensor value;

  bool operator==(const NamedTensor&) const = default;
};

struct TrainingMetadata {
  std::uint64_t iterations = 0;
  std::uint64_t batch_size = 0;
  std::uint64_t seed = 0;
  std::string data_fingerprint;
  NormalizationStats normalization;
  /// Cadence of the raw signal the model was trained on.
  std::uint32_t sample_rate_hz = kDefaultSampleRateHz;
  std::string sample_mode = "prefix";
  std::vector<std::string> train_tools;
  std::string test_tool;
  double validation_fraction = 0.1;

  bool operator==(const TrainingMetadata&) const = default;
};

struct Checkpoint {
  ModelSpec spec;
  /// Parameters followed by buffers, in model order.
  std::vector<NamedTensor> tensors;
  OptimizerState optimizer;
  TrainingMetadata metadata;

  bool operator==(const Checkpoint&) const = default;
};

inline Checkpoint make_checkpoint(Model& model, const OptimizerState& optimizer, const TrainingMetadata& metadata) {
  Checkpoint c{model.spec(), {}, optimizer, metadata};
  for (auto* p : model.parameters()) c.tensors.push_back({p->name, p->value});
  for (auto* b : model.buffers()) c.tensors.push_back({b->name, b->value});
  return c;
}

/// Rebuilds a model with the checkpoint's spec and copies every tensor in by name.
inline Model restore_model(const Checkpoint& c) {
  Model model(c.spec, c.metadata.seed);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : c.tensors) by_name[t.name] = &t.value;
  auto assign = [&](const std::string& name, Tensor& slot) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + name + "'", 0, FormatError::Unit::byte);
    if (it->second->shape() != slot.shape())
      throw ShapeError("checkpoint tensor '" + name + "' has shape " + shape_string(it->second->shape()) +
                       ", model expects " + shape_string(slot.shape()));
    slot = *it->second;
  };
  for (auto* p : model.parameters()) assign(p->name, p->value);
  for (auto* b : model.buffers()) assign(b->name, b->value);
  return model;
}

namespace detail {

inline std::string join(const std::vector<std::string>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + xs[i];
  return s;
}

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto comma = s.find(',', start);
    out.push_back(s.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string checkpoint_text(const Checkpoint& c) {
  KvSection s;
  write_spec(c.spec, s);
  s.set("optimizer", std::string(to_string(c.optimizer.kind)));
  s.set("optimizer_step", c.optimizer.step_count);
  s.set("learning_rate", c.optimizer.learning_rate);
  s.set("adam_beta1", c.optimizer.beta1);
  s.set("adam_beta2", c.optimizer.beta2);
  s.set("adam_epsilon", c.optimizer.epsilon);
  s.set("iterations", c.metadata.iterations);
  s.set("batch_size", c.metadata.batch_size);
  s.set("seed", c.metadata.seed);
  s.set("data_fingerprint", c.metadata.data_fingerprint);
  s.set("norm_mu", c.metadata.normalization.mu);
  s.set("norm_sigma", c.metadata.normalization.sigma);
  s.set("sample_rate_hz", std::uint64_t{c.metadata.sample_rate_hz});
  s.set("sample_mode", c.metadata.sample_mode);
  s.set("train_tools", join(c.metadata.train_tools));
  s.set("test_tool", c.metadata.test_tool);
  s.set("validation_fraction", c.metadata.validation_fraction);
  KvDocument doc;
  doc.header = std::move(s);
  return doc.to_string();
}

inline void parse_checkpoint_text(const std::string& text, Checkpoint& c) {
  const auto doc = KvDocument::parse(text);
  const auto& s = doc.header;
  c.spec = read_spec(s);
  infer_shapes(c.spec);
  c.optimizer.kind = parse_optimizer_kind(s.get("optimizer"));
  c.optimizer.step_count = s.get_number<std::uint64_t>("optimizer_step");
  c.optimizer.learning_rate = s.get_number<double>("learning_rate");
  c.optimizer.beta1 = s.get_number<double>("adam_beta1");
  c.optimizer.beta2 = s.get_number<double>("adam_beta2");
  c.optimizer.epsilon = s.get_number<double>("adam_epsilon");
  c.metadata.iterations = s.get_number<std::uint64_t>("iterations");
  c.metadata.batch_size = s.get_number<std::uint64_t>("batch_size");
  c.metadata.seed = s.get_number<std::uint64_t>("seed");
  c.metadata.data_fingerprint = s.find("data_fingerprint").value_or("");
  c.metadata.normalization.mu = s.get_number<double>("norm_mu");
  c.metadata.normalization.sigma = s.get_number<double>("norm_sigma");
  c.metadata.sample_rate_hz = s.get_number<std::uint32_t>("sample_rate_hz");
  c.metadata.sample_mode = s.get("sample_mode");
  c.metadata.train_tools = split_commas(s.find("train_tools").value_or(""));
  c.metadata.test_tool = s.find("test_tool").value_or("");
  c.metadata.validation_fraction = s.get_number<double>("validation_fraction");
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& c, std::ostream& out, StoragePrecision precision = StoragePrecision::f64) {
  std::vector<NamedTensor> all = c.tensors;
  if (c.optimizer.kind == OptimizerKind::adam && !c.optimizer.first_moment.empty()) {
    // Moments follow parameter order, which is the leading part of `tensors`.
    for (std::size_t i = 0; i < c.optimizer.first_moment.size(); ++i)
      all.push_back({"adam.m." + c.tensors.at(i).name, c.optimizer.first_moment[i]});
    for (std::size_t i = 0; i < c.optimizer.second_moment.size(); ++i)
      all.push_back({"adam.v." + c.tensors.at(i).name, c.optimizer.second_moment[i]});
  }
  const std::string text = detail::checkpoint_text(c);
  const std::size_t width = precision == StoragePrecision::f64 ? 8 : 4;

  std::string head;
  head.append(kCheckpointMagic.data(), kCheckpointMagic.size());
  head.push_back(static_cast<char>(kCheckpointVersion));
  detail::put_le<std::uint64_t>(head, text.size());
  head += text;
  detail::put_le<std::uint32_t>(head, static_cast<std::uint32_t>(all.size()));
  std::uint64_t offset = 0;
  for (const auto& t : all) {
    detail::put_le<std::uint16_t>(head, static_cast<std::uint16_t>(t.name.size()));
    head += t.name;
    head.push_back(static_cast<char>(precision));
    head.push_back(static_cast<char>(t.value.rank()));
    for (auto e : t.value.shape()) detail::put_le<std::uint64_t>(head, e);
    detail::put_le<std::uint64_t>(head, offset);
    offset += t.value.size() * width;
  }
  out.write(head.data(), static_cast<std::streamsize>(head.size()));

  std::string chunk;
  for (const auto& t : all) {
    chunk.clear();
    chunk.reserve(t.value.size() * width);
    for (double v : t.value.data()) {
      if (precision == StoragePrecision::f64)
        detail::put_le<std::uint64_t>(chunk, std::bit_cast<std::uint64_t>(v));
      else
        detail::put_le<std::uint32_t>(chunk, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  }
}

inline Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint c;
  std::uint64_t pos = 0;
  auto read = [&](void* dst, std::size_t n, const char* what) {
    detail::read_exact(in, dst, n, pos, what);
    pos += n;
  };
  unsigned char fixed[13];
  read(fixed, sizeof(fixed), "header");
  if (std::memcmp(fixed, kCheckpointMagic.data(), 4) != 0)
    throw FormatError("bad magic, expected TBSN", 0, FormatError::Unit::byte);
  if (fixed[4] != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(fixed[4]), 4, FormatError::Unit::byte);
  const auto text_len = detail::get_le<std::uint64_t>(fixed + 5);
  if (text_len > (1u << 24)) throw FormatError("implausible spec block length", 5, FormatError::Unit::byte);
  std::string text(text_len, '\0');
  read(text.data(), text.size(), "spec block");
  try {
    detail::parse_checkpoint_text(text, c);
  } catch (const Error& e) {
    throw FormatError(std::string("bad spec block: ") + e.what(), 13, FormatError::Unit::byte);
  }

  struct Entry {
    std::string name;
    StoragePrecision precision;
    Shape shape;
    std::uint64_t offset;
    std::uint64_t table_pos;
  };
  unsigned char count_buf[4];
  read(count_buf, 4, "tensor table");
  const auto count = detail::get_le<std::uint32_t>(count_buf);
  std::vector<Entry> entries;
  std::uint64_t expected_offset = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.table_pos = pos;
    unsigned char len_buf[2];
    read(len_buf, 2, "tensor table");
    e.name.resize(detail::get_le<std::uint16_t>(len_buf));
    read(e.name.data(), e.name.size(), "tensor table");
    unsigned char dr[2];
    read(dr, 2, "tensor table");
    if (dr[0] > 1) throw FormatError("unknown dtype in tensor table", pos - 2, FormatError::Unit::byte);
    e.precision = static_cast<StoragePrecision>(dr[0]);
    for (unsigned r = 0; r < dr[1]; ++r) {
      unsigned char ext[8];
      read(ext, 8, "tensor table");
      e.shape.push_back(detail::get_le<std::uint64_t>(ext));
      if (e.shape.back() == 0) throw FormatError("zero extent in tensor table", pos - 8, FormatError::Unit::byte);
    }
    unsigned char off[8];
    read(off, 8, "tensor table");
    e.offset = detail::get_le<std::uint64_t>(off);
    if (e.offset != expected_offset)
      throw FormatError("tensor table offsets inconsistent for '" + e.name + "'", pos - 8, FormatError::Unit::byte);
    expected_offset += shape_size(e.shape) * (e.precision == StoragePrecision::f64 ? 8 : 4);
    entries.push_back(std::move(e));
  }

  std::map<std::string, Tensor> moments;
  std::vector<unsigned char> raw;
  for (const auto& e : entries) {
    const std::size_t width = e.precision == StoragePrecision::f64 ? 8 : 4;
    raw.resize(shape_size(e.shape) * width);
    read(raw.data(), raw.size(), "tensor payload");
    Tensor t(e.shape);
    for (std::size_t j = 0; j < t.size(); ++j) {
      t[j] = width == 8 ? std::bit_cast<double>(detail::get_le<std::uint64_t>(raw.data() + 8 * j))
                        : static_cast<double>(std::bit_cast<float>(detail::get_le<std::uint32_t>(raw.data() + 4 * j)));
    }
    if (e.name.starts_with("adam."))
      moments[e.name] = std::move(t);
    else
      c.tensors.push_back({e.name, std::move(t)});
  }

  // The table must describe exactly the model's parameters and buffers.
  std::vector<TensorSlot> expected = parameter_layout(c.spec);
  const std::size_t param_count = expected.size();
  for (auto& b : buffer_layout(c.spec)) expected.push_back(std::move(b));
  if (expected.size() != c.tensors.size())
    throw FormatError("tensor table does not match the model spec", 13 + text_len, FormatError::Unit::byte);
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (expected[i].name != c.tensors[i].name || expected[i].shape != c.tensors[i].value.shape())
      throw FormatError("tensor table entry '" + c.tensors[i].name + "' does not match the model spec",
                        13 + text_len, FormatError::Unit::byte);

  if (!moments.empty()) {
    for (std::size_t i = 0; i < param_count; ++i) {
      auto m = moments.find("adam.m." + expected[i].name);
      auto v = moments.find("adam.v." + expected[i].name);
      if (m == moments.end() || v == moments.end())
        throw FormatError("incomplete Adam moments for '" + expected[i].name + "'", 13 + text_len,
                          FormatError::Unit::byte);
      c.optimizer.first_moment.push_back(std::move(m->second));
      c.optimizer.second_moment.push_back(std::move(v->second));
    }
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path,
                            StoragePrecision precision = StoragePrecision::f64) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(c, out, precision);
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace toolbreak

#endif
