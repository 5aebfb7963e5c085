// Copyright 2026 The htrner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>

#include "htrner/net.hpp"
#include "htrner/symbol_table.hpp"

namespace htrner {

// On disk: magic "HTRNER01", a u32 little-endian header length, a UTF-8
// JSON header (config, symbol table, array shapes, payload CRC32), then the
// arrays as little-endian f64 in header order. Save -> load -> save is
// byte-exact, including the RNG state.
struct Checkpoint {
  NetworkConfig config;
  SymbolTable symbols;
  ParamStore params;
  ParamStore velocity;  // momentum buffers; empty under plain SGD
  int epoch = 0;        // completed epochs in the current phase
  double best_valid_cer = -1.0;  // percent; negative = no validation yet
  int best_epoch = -1;
  std::string rng_state;
  std::string phase = "train";
  std::string provenance = "scratch";
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);

// Throws DataError on bad magic, unknown version, checksum mismatch, or
// non-finite parameter values.
Checkpoint load_checkpoint(const std::string& path);

// Equality of everything except num_classes (the output head). Throws
// ConfigError naming the first mismatched field.
void check_architecture_compatible(const NetworkConfig& a,
                                   const NetworkConfig& b);

// Fine-tuning start: the source parameters with the output layer
// reinitialized for the new alphabet. Non-output values are preserved
// bit-exact.
ParamStore transfer_init(const Checkpoint& source, const SymbolTable& new_table,
                         std::uint64_t seed);

}  // namespace htrner
