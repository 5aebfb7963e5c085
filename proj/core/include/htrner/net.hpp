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

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "htrner/image.hpp"
#include "htrner/rng.hpp"

namespace htrner {

struct ConvBlockSpec {
  int filters = 0;
  int kernel_h = 3;
  int kernel_w = 3;
  int pool_h = 2;
  int pool_w = 2;
};

// Line recognizer: conv+pool blocks with batch norm and leaky ReLU, stacked
// bidirectional LSTMs over the surviving columns, linear + log-softmax head.
struct NetworkConfig {
  int input_height = 64;
  std::vector<ConvBlockSpec> conv_blocks;
  int lstm_layers = 3;
  int lstm_hidden = 256;
  int num_classes = 2;
  double leaky_slope = 0.01;
  double leaky_threshold = 0.0;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;

  // Reference architecture: filters (16, 32, 48, 64), 3x3 kernels, pools
  // (2,2) (2,2) (2,1) (2,1), so height shrinks 16x and width 4x.
  static NetworkConfig reference(int num_classes);
};

// Throws ConfigError on inconsistent settings. Kernels must be odd (same
// padding), the product of pool heights must divide input_height, and block
// and layer counts stay in single digits so parameter names sort naturally.
void validate_config(const NetworkConfig& config);

// Per-frame feature size after flattening: channels * remaining height.
int frame_dim(const NetworkConfig& config);

// Frames produced for a given image width (each pool stage floors). Throws
// DataError when the image is too narrow to survive pooling.
int frame_count(const NetworkConfig& config, int image_width);

// Named parameter arrays. Conv kernels are stored flattened to
// filters x (in_channels * kernel_h * kernel_w); vectors are n x 1 columns.
// Batch-norm running statistics live here too but are not trainable.
using ParamStore = std::map<std::string, Eigen::MatrixXd>;

// Running statistics ("bn*.running_*") are state, not parameters.
bool is_trainable(const std::string& name);

// Glorot-uniform weights drawn from `rng` in a fixed order, zero biases,
// LSTM forget-gate bias +1, batch-norm scale 1 / shift 0 / mean 0 / var 1.
ParamStore init_params(const NetworkConfig& config, Rng& rng);

// Total stored values (including running statistics) and the trainable
// subset, both closed-form from the config.
std::size_t param_count(const NetworkConfig& config);
std::size_t trainable_param_count(const NetworkConfig& config);

double leaky_relu(double x, double slope, double threshold);

enum class NetMode { train, eval };

// Per-channel batch statistics gathered by a train-mode forward. The forward
// itself never mutates running statistics; callers fold deltas in with
// apply_running_stats, one forward at a time, to stay deterministic under
// parallel batch evaluation.
struct BnBatchStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};
struct RunningStatsDelta {
  std::vector<BnBatchStats> blocks;  // one entry per conv block
};

void apply_running_stats(ParamStore& params, const RunningStatsDelta& delta,
                         const NetworkConfig& config);

struct ConvBlockCache {
  std::vector<Eigen::MatrixXd> input;   // in_channels maps, h x w
  Eigen::MatrixXd bn_out;               // filters x (h*w), pre-activation
  Eigen::MatrixXd xhat;                 // filters x (h*w)
  Eigen::VectorXd inv_std;              // per channel
  std::vector<Eigen::MatrixXi> pool_arg;  // argmax flat index per output cell
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
};

struct LstmDirCache {
  Eigen::MatrixXd gates;   // 4H x T, post-activation, gate order i,f,g,o
  Eigen::MatrixXd c;       // H x T
  Eigen::MatrixXd tanh_c;  // H x T
  Eigen::MatrixXd h;       // H x T
};

struct LstmLayerCache {
  Eigen::MatrixXd input;  // D x T
  LstmDirCache fwd;
  LstmDirCache bwd;  // indexed by processing step over the reversed sequence
};

struct ForwardCache {
  bool train_mode = false;
  std::vector<ConvBlockCache> conv;
  std::vector<LstmLayerCache> lstm;
  Eigen::MatrixXd head_input;  // 2H x T
  Eigen::MatrixXd log_probs;   // T x K
};

struct NetForward {
  Eigen::MatrixXd log_probs;  // T x K, rows log-sum-exp to 0
  RunningStatsDelta stats;    // filled in train mode
  std::shared_ptr<ForwardCache> cache;  // set when want_cache
};

NetForward net_forward(const GrayImage& image, const ParamStore& params,
                       const NetworkConfig& config, NetMode mode,
                       bool want_cache);

struct NetBackward {
  ParamStore grads;             // trainable names only
  Eigen::MatrixXd input_grad;  // input_height x width
};

// Exact gradients for grad_log_probs (T x K) through the cached forward.
NetBackward net_backward(const Eigen::MatrixXd& grad_log_probs,
                         const ForwardCache& cache, const ParamStore& params,
                         const NetworkConfig& config);

// Copies every parameter bit-exact except the output layer, which is
// reinitialized for `new_num_classes` from the given seed.
ParamStore replace_output_layer(const ParamStore& params, int new_num_classes,
                                std::uint64_t seed);

}  // namespace htrner
