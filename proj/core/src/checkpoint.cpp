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

#include "htrner/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "htrner/error.hpp"

namespace htrner {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written as raw little-endian doubles");

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'H', 'T', 'R', 'N', 'E', 'R', '0', '1'};

json config_to_json(const NetworkConfig& c) {
  json blocks = json::array();
  for (const ConvBlockSpec& b : c.conv_blocks)
    blocks.push_back(json{{"filters", b.filters},
                          {"kernel_h", b.kernel_h},
                          {"kernel_w", b.kernel_w},
                          {"pool_h", b.pool_h},
                          {"pool_w", b.pool_w}});
  return json{{"input_height", c.input_height},
              {"conv_blocks", blocks},
              {"lstm_layers", c.lstm_layers},
              {"lstm_hidden", c.lstm_hidden},
              {"num_classes", c.num_classes},
              {"leaky_slope", c.leaky_slope},
              {"leaky_threshold", c.leaky_threshold},
              {"bn_epsilon", c.bn_epsilon},
              {"bn_momentum", c.bn_momentum}};
}

NetworkConfig config_from_json(const json& j) {
  NetworkConfig c;
  c.input_height = j.at("input_height").get<int>();
  for (const json& jb : j.at("conv_blocks"))
    c.conv_blocks.push_back(ConvBlockSpec{
        jb.at("filters").get<int>(), jb.at("kernel_h").get<int>(),
        jb.at("kernel_w").get<int>(), jb.at("pool_h").get<int>(),
        jb.at("pool_w").get<int>()});
  c.lstm_layers = j.at("lstm_layers").get<int>();
  c.lstm_hidden = j.at("lstm_hidden").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.leaky_threshold = j.at("leaky_threshold").get<double>();
  c.bn_epsilon = j.at("bn_epsilon").get<double>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  return c;
}

json shapes_json(const ParamStore& store) {
  json out = json::array();
  for (const auto& [name, value] : store)
    out.push_back(json{{"name", name},
                       {"rows", static_cast<int>(value.rows())},
                       {"cols", static_cast<int>(value.cols())}});
  return out;
}

void append_store(std::string& payload, const ParamStore& store) {
  for (const auto& [name, value] : store) {
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double v = value(r, c);
        char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        payload.append(bytes, sizeof(double));
      }
    }
  }
}

ParamStore read_store(const json& shapes, const char*& cursor,
                      const char* end, const std::string& what) {
  ParamStore store;
  for (const json& js : shapes) {
    const std::string name = js.at("name").get<std::string>();
    const int rows = js.at("rows").get<int>();
    const int cols = js.at("cols").get<int>();
    if (rows < 0 || cols < 0)
      throw DataError("checkpoint: negative shape for " + name);
    const std::size_t bytes =
        static_cast<std::size_t>(rows) * cols * sizeof(double);
    if (static_cast<std::size_t>(end - cursor) < bytes)
      throw DataError("checkpoint: payload truncated in " + what);
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double v;
        std::memcpy(&v, cursor, sizeof(double));
        cursor += sizeof(double);
        if (!std::isfinite(v))
          throw DataError("checkpoint: non-finite value in " + name);
        m(r, c) = v;
      }
    }
    store[name] = std::move(m);
  }
  return store;
}

std::uint32_t crc_of(const std::string& data) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()),
            static_cast<uInt>(data.size())));
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::string payload;
  append_store(payload, checkpoint.params);
  append_store(payload, checkpoint.velocity);

  json header;
  header["version"] = 1;
  header["config"] = config_to_json(checkpoint.config);
  header["scheme"] = to_string(checkpoint.symbols.scheme());
  header["symbols"] = checkpoint.symbols.symbols();
  header["params"] = shapes_json(checkpoint.params);
  header["velocity"] = shapes_json(checkpoint.velocity);
  header["epoch"] = checkpoint.epoch;
  header["best_valid_cer"] = checkpoint.best_valid_cer;
  header["best_epoch"] = checkpoint.best_epoch;
  header["rng_state"] = checkpoint.rng_state;
  header["phase"] = checkpoint.phase;
  header["provenance"] = checkpoint.provenance;
  header["payload_bytes"] = payload.size();
  header["payload_crc32"] = crc_of(payload);
  const std::string header_text = header.dump();
  if (header_text.size() > 0xffffffffull)
    throw DataError("checkpoint: header too large");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
  char len_bytes[4];
  std::memcpy(len_bytes, &len, 4);
  out.write(len_bytes, 4);
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + 4 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  std::uint32_t header_len;
  std::memcpy(&header_len, bytes.data() + sizeof(kMagic), 4);
  const std::size_t header_start = sizeof(kMagic) + 4;
  if (bytes.size() < header_start + header_len)
    throw DataError("checkpoint: truncated header in " + path);

  json header;
  try {
    header = json::parse(bytes.substr(header_start, header_len));
  } catch (const json::exception& e) {
    throw DataError("checkpoint: bad header JSON: " + std::string(e.what()));
  }
  if (header.at("version").get<int>() != 1)
    throw DataError("checkpoint: unsupported version " +
                    header.at("version").dump());

  const std::string payload = bytes.substr(header_start + header_len);
  if (payload.size() != header.at("payload_bytes").get<std::size_t>())
    throw DataError("checkpoint: truncated payload in " + path);
  if (crc_of(payload) != header.at("payload_crc32").get<std::uint32_t>())
    throw DataError("checkpoint: payload checksum mismatch in " + path);

  Checkpoint ck;
  ck.config = config_from_json(header.at("config"));
  ck.symbols = SymbolTable::from_symbols(
      header.at("symbols").get<std::vector<std::string>>(),
      scheme_from_string(header.at("scheme").get<std::string>()));
  const char* cursor = payload.data();
  const char* end = payload.data() + payload.size();
  ck.params = read_store(header.at("params"), cursor, end, "params");
  ck.velocity = read_store(header.at("velocity"), cursor, end, "velocity");
  if (cursor != end)
    throw DataError("checkpoint: trailing payload bytes in " + path);
  ck.epoch = header.at("epoch").get<int>();
  ck.best_valid_cer = header.at("best_valid_cer").get<double>();
  ck.best_epoch = header.at("best_epoch").get<int>();
  ck.rng_state = header.at("rng_state").get<std::string>();
  ck.phase = header.at("phase").get<std::string>();
  ck.provenance = header.at("provenance").get<std::string>();
  if (ck.config.num_classes != static_cast<int>(ck.symbols.size()))
    throw DataError("checkpoint: num_classes disagrees with symbol table");
  return ck;
}

void check_architecture_compatible(const NetworkConfig& a,
                                   const NetworkConfig& b) {
  auto fail = [](const char* field) {
    throw ConfigError(std::string("incompatible architecture: ") + field);
  };
  if (a.input_height != b.input_height) fail("input_height");
  if (a.conv_blocks.size() != b.conv_blocks.size()) fail("conv_blocks");
  for (std::size_t i = 0; i < a.conv_blocks.size(); ++i) {
    const ConvBlockSpec& x = a.conv_blocks[i];
    const ConvBlockSpec& y = b.conv_blocks[i];
    if (x.filters != y.filters || x.kernel_h != y.kernel_h ||
        x.kernel_w != y.kernel_w || x.pool_h != y.pool_h ||
        x.pool_w != y.pool_w)
      fail("conv_blocks");
  }
  if (a.lstm_layers != b.lstm_layers) fail("lstm_layers");
  if (a.lstm_hidden != b.lstm_hidden) fail("lstm_hidden");
  if (a.leaky_slope != b.leaky_slope) fail("leaky_slope");
  if (a.leaky_threshold != b.leaky_threshold) fail("leaky_threshold");
  if (a.bn_epsilon != b.bn_epsilon) fail("bn_epsilon");
  if (a.bn_momentum != b.bn_momentum) fail("bn_momentum");
}

ParamStore transfer_init(const Checkpoint& source, const SymbolTable& new_table,
                         std::uint64_t seed) {
  return replace_output_layer(source.params,
                              static_cast<int>(new_table.size()), seed);
}

}  // namespace htrner
