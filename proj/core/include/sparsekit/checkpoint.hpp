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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparsekit/config.hpp"
#include "sparsekit/mask.hpp"
#include "sparsekit/tensor.hpp"
#include "sparsekit/train.hpp"

namespace sparsekit {

// Binary layout, all integers little-endian:
//   "SPRS" | u32 version | u32 record count | records... | u32 CRC-32
// record: u32 name length | name (UTF-8) | u8 dtype | u32 rank | u64 dims[rank] | payload
// dtype 0: f32 values; 1: mask bits, LSB-first, rank 1; 2: UTF-8 text, rank 1
// (dim = byte length). The CRC covers every byte before it.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class RecordType : std::uint8_t { F32 = 0, MaskBits = 1, Text = 2 };

struct CheckpointRecord {
  std::string name;
  RecordType type = RecordType::F32;
  Shape dims;
  std::vector<float> values;
  SparsityMask mask;
  std::string text;
};

class Checkpoint {
 public:
  void add_tensor(std::string name, const Tensor& t);
  void add_mask(std::string name, const SparsityMask& m);
  void add_text(std::string name, std::string text);

  bool contains(std::string_view name) const;
  const CheckpointRecord& at(std::string_view name) const;
  Tensor tensor(std::string_view name) const;
  SparsityMask mask(std::string_view name) const;
  const std::string& text(std::string_view name) const;
  const std::vector<CheckpointRecord>& records() const noexcept { return records_; }

  std::vector<std::uint8_t> serialize() const;
  // Throws ValidationError on bad magic, version, CRC, truncation or
  // duplicate names.
  static Checkpoint deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::vector<CheckpointRecord> records_;
};

// Records "__config__" (full config text), "__meta__" (run results as
// key = value lines) and per weight layer <layer>.{weight,bias,mask,
// log_sigma2,log_alpha} plus the pre-training state under "init/".
Checkpoint checkpoint_from_run(const TrainingRecord& run, const Config& config);

struct LoadedRun {
  Config config;
  ModelSpec spec;
  TrainConfig train;
  TrainingRecord record;  // spec, config, initial, final_state and summary fields
  std::map<std::string, std::string> meta;
};

LoadedRun run_from_checkpoint(const Checkpoint& ckpt);

}  // namespace sparsekit
