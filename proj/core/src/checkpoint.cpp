// Copyright 2026 The sparsekit Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparsekit/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <zlib.h>

namespace sparsekit {
namespace {

constexpr char kMagic[4] = {'S', 'P', 'R', 'S'};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large checkpoints.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    c = crc32(c, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(c);
}

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : buf(b) {}
  void need(std::size_t n) const {
    if (buf.size() - pos < n) throw ValidationError("checkpoint truncated");
  }
  std::uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{buf[pos++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{buf[pos++]} << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = buf.subspan(pos, n);
    pos += n;
    return s;
  }
  std::span<const std::uint8_t> buf;
  std::size_t pos = 0;
};

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

}  // namespace

void Checkpoint::add_tensor(std::string name, const Tensor& t) {
  if (contains(name)) throw ValidationError("duplicate checkpoint record '" + name + "'");
  CheckpointRecord r;
  r.name = std::move(name);
  r.type = RecordType::F32;
  r.dims = t.dims();
  r.values.assign(t.data().begin(), t.data().end());
  records_.push_back(std::move(r));
}

void Checkpoint::add_mask(std::string name, const SparsityMask& m) {
  if (contains(name)) throw ValidationError("duplicate checkpoint record '" + name + "'");
  CheckpointRecord r;
  r.name = std::move(name);
  r.type = RecordType::MaskBits;
  r.dims = {m.size()};
  r.mask = m;
  records_.push_back(std::move(r));
}

void Checkpoint::add_text(std::string name, std::string text) {
  if (contains(name)) throw ValidationError("duplicate checkpoint record '" + name + "'");
  CheckpointRecord r;
  r.name = std::move(name);
  r.type = RecordType::Text;
  r.dims = {text.size()};
  r.text = std::move(text);
  records_.push_back(std::move(r));
}

bool Checkpoint::contains(std::string_view name) const {
  for (const auto& r : records_) {
    if (r.name == name) return true;
  }
  return false;
}

const CheckpointRecord& Checkpoint::at(std::string_view name) const {
  for (const auto& r : records_) {
    if (r.name == name) return r;
  }
  throw ValidationError("checkpoint has no record '" + std::string(name) + "'");
}

Tensor Checkpoint::tensor(std::string_view name) const {
  const auto& r = at(name);
  if (r.type != RecordType::F32) throw ValidationError("record '" + r.name + "' is not a tensor");
  return Tensor(r.dims, r.values);
}

SparsityMask Checkpoint::mask(std::string_view name) const {
  const auto& r = at(name);
  if (r.type != RecordType::MaskBits) throw ValidationError("record '" + r.name + "' is not a mask");
  return r.mask;
}

const std::string& Checkpoint::text(std::string_view name) const {
  const auto& r = at(name);
  if (r.type != RecordType::Text) throw ValidationError("record '" + r.name + "' is not text");
  return r.text;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::set<std::string_view> names;
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(records_.size()));
  for (const auto& r : records_) {
    if (!names.insert(r.name).second) throw ValidationError("duplicate checkpoint record '" + r.name + "'");
    w.u32(static_cast<std::uint32_t>(r.name.size()));
    w.bytes(r.name.data(), r.name.size());
    w.u8(static_cast<std::uint8_t>(r.type));
    w.u32(static_cast<std::uint32_t>(r.dims.size()));
    for (std::size_t d : r.dims) w.u64(d);
    switch (r.type) {
      case RecordType::F32:
        for (float v : r.values) w.u32(std::bit_cast<std::uint32_t>(v));
        break;
      case RecordType::MaskBits: {
        const auto bytes = r.mask.to_bytes();
        w.bytes(bytes.data(), bytes.size());
        break;
      }
      case RecordType::Text:
        w.bytes(r.text.data(), r.text.size());
        break;
    }
  }
  w.u32(crc32_of(w.out));
  return std::move(w.out);
}

Checkpoint Checkpoint::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw ValidationError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ValidationError("not a checkpoint (bad magic)");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (tail.u32() != crc32_of(body)) throw ValidationError("checkpoint CRC mismatch");
  Reader r(body);
  r.take(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  Checkpoint ck;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord rec;
    const std::uint32_t len = r.u32();
    const auto name = r.take(len);
    rec.name.assign(name.begin(), name.end());
    if (!names.insert(rec.name).second) throw ValidationError("duplicate checkpoint record '" + rec.name + "'");
    const std::uint8_t type = r.u8();
    if (type > 2) throw ValidationError("unknown dtype in record '" + rec.name + "'");
    rec.type = static_cast<RecordType>(type);
    const std::uint32_t rank = r.u32();
    if (rank > 16) throw ValidationError("implausible rank in record '" + rec.name + "'");
    for (std::uint32_t d = 0; d < rank; ++d) rec.dims.push_back(r.u64());
    switch (rec.type) {
      case RecordType::F32: {
        const std::size_t n = shape_numel(rec.dims);
        r.need(n * 4);
        rec.values.resize(n);
        for (float& v : rec.values) v = std::bit_cast<float>(r.u32());
        break;
      }
      case RecordType::MaskBits: {
        if (rank != 1) throw ValidationError("mask record '" + rec.name + "' must have rank 1");
        const auto raw = r.take((rec.dims[0] + 7) / 8);
        rec.mask = SparsityMask::from_bytes(std::vector<std::uint8_t>(raw.begin(), raw.end()), rec.dims[0]);
        break;
      }
      case RecordType::Text: {
        if (rank != 1) throw ValidationError("text record '" + rec.name + "' must have rank 1");
        const auto raw = r.take(rec.dims[0]);
        rec.text.assign(raw.begin(), raw.end());
        break;
      }
    }
    ck.records_.push_back(std::move(rec));
  }
  if (r.pos != body.size()) throw ValidationError("trailing bytes in checkpoint");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize(bytes);
}

namespace {

void add_state(Checkpoint& ck, const ModelSpec& spec, const ModelState& s, const std::string& prefix) {
  for (std::size_t k : spec.weight_layer_indices()) {
    const auto& p = s.layers[k];
    const std::string base = prefix + spec.layers[k].name;
    ck.add_tensor(base + ".weight", p.weight);
    ck.add_tensor(base + ".bias", p.bias);
    if (!p.mask.empty()) ck.add_mask(base + ".mask", p.mask);
    if (!p.log_sigma2.empty()) ck.add_tensor(base + ".log_sigma2", p.log_sigma2);
    if (!p.log_alpha.empty()) ck.add_tensor(base + ".log_alpha", p.log_alpha);
  }
}

ModelState read_state(const Checkpoint& ck, const ModelSpec& spec, const std::string& prefix) {
  ModelState s;
  s.layers.resize(spec.layers.size());
  for (std::size_t k : spec.weight_layer_indices()) {
    auto& p = s.layers[k];
    const LayerSpec& l = spec.layers[k];
    const std::string base = prefix + l.name;
    p.weight = ck.tensor(base + ".weight");
    p.bias = ck.tensor(base + ".bias");
    if (p.weight.dims() != l.weight_shape() || p.bias.dims() != Shape{l.out}) {
      throw ValidationError("checkpoint layer '" + l.name + "' does not match model " + spec.name);
    }
    p.mask = ck.contains(base + ".mask") ? ck.mask(base + ".mask") : SparsityMask(p.weight.size(), true);
    if (p.mask.size() != p.weight.size()) throw ValidationError("checkpoint mask size mismatch on " + l.name);
    if (ck.contains(base + ".log_sigma2")) p.log_sigma2 = ck.tensor(base + ".log_sigma2");
    if (ck.contains(base + ".log_alpha")) p.log_alpha = ck.tensor(base + ".log_alpha");
  }
  return s;
}

}  // namespace

Checkpoint checkpoint_from_run(const TrainingRecord& run, const Config& config) {
  Checkpoint ck;
  ck.add_text("__config__", config.to_text());
  std::string meta;
  meta += "model = " + run.spec.name + "\n";
  meta += "method = " + std::string(to_string(run.config.method)) + "\n";
  meta += "config_hash = " + config.hash_hex() + "\n";
  meta += "seed = " + std::to_string(run.config.seed) + "\n";
  meta += "steps = " + std::to_string(run.steps_run) + "\n";
  meta += "train_sparsity = " + fmt(run.train_sparsity) + "\n";
  meta += "test_sparsity = " + fmt(run.test_sparsity) + "\n";
  meta += "test_accuracy = " + fmt(run.test_accuracy) + "\n";
  meta += "wall_clock = " + fmt(run.wall_clock) + "\n";
  ck.add_text("__meta__", meta);
  add_state(ck, run.spec, run.final_state, "");
  if (!run.initial.layers.empty()) add_state(ck, run.spec, run.initial, "init/");
  return ck;
}

LoadedRun run_from_checkpoint(const Checkpoint& ck) {
  LoadedRun out;
  out.config = Config::parse(ck.text("__config__"), "checkpoint config");
  const std::string& meta = ck.text("__meta__");
  std::size_t start = 0;
  while (start < meta.size()) {
    auto nl = meta.find('\n', start);
    if (nl == std::string::npos) nl = meta.size();
    const std::string line = meta.substr(start, nl - start);
    if (const auto eq = line.find(" = "); eq != std::string::npos) {
      out.meta[line.substr(0, eq)] = line.substr(eq + 3);
    }
    start = nl + 1;
  }
  out.spec = model_from_config(out.config);
  out.train = train_config_from(out.config);
  TrainingRecord& rec = out.record;
  rec.spec = out.spec;
  rec.config = out.train;
  rec.final_state = read_state(ck, out.spec, "");
  if (ck.contains("init/" + out.spec.layers[out.spec.weight_layer_indices().front()].name + ".weight")) {
    rec.initial = read_state(ck, out.spec, "init/");
  }
  auto num = [&](const char* key, double fallback) {
    const auto it = out.meta.find(key);
    return it == out.meta.end() ? fallback : std::stod(it->second);
  };
  rec.steps_run = static_cast<Step>(num("steps", 0));
  rec.train_sparsity = num("train_sparsity", 0);
  rec.test_sparsity = num("test_sparsity", 0);
  rec.test_accuracy = num("test_accuracy", -1);
  rec.wall_clock = num("wall_clock", 0);
  rec.layers = layer_sparsity(out.spec, test_time_masks(out.spec, rec.final_state, test_time_options(out.train)));
  return out;
}

}  // namespace sparsekit
