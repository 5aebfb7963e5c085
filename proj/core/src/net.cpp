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

#include "htrner/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "htrner/error.hpp"

namespace htrner {

namespace {

std::string conv_name(int block, const char* leaf) {
  return "conv" + std::to_string(block) + "." + leaf;
}
std::string bn_name(int block, const char* leaf) {
  return "bn" + std::to_string(block) + "." + leaf;
}
std::string lstm_name(int layer, const char* dir, const char* leaf) {
  return "lstm" + std::to_string(layer) + "." + dir + "." + leaf;
}

int pool_height_product(const NetworkConfig& config) {
  int p = 1;
  for (const ConvBlockSpec& b : config.conv_blocks) p *= b.pool_h;
  return p;
}

// Input feature dimension of LSTM layer `layer`.
int lstm_input_dim(const NetworkConfig& config, int layer) {
  return layer == 0 ? frame_dim(config) : 2 * config.lstm_hidden;
}

Eigen::MatrixXd glorot(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Patch matrix for same-padding convolution: (C*kh*kw) x (h*w), column
// index r*w + c. Out-of-image taps are zero.
Eigen::MatrixXd im2col(const std::vector<Eigen::MatrixXd>& maps, int kh,
                       int kw) {
  const int channels = static_cast<int>(maps.size());
  const int h = static_cast<int>(maps[0].rows());
  const int w = static_cast<int>(maps[0].cols());
  const int pad_h = (kh - 1) / 2;
  const int pad_w = (kw - 1) / 2;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(channels * kh * kw, h * w);
  for (int ch = 0; ch < channels; ++ch) {
    const Eigen::MatrixXd& m = maps[ch];
    for (int dr = 0; dr < kh; ++dr) {
      for (int dc = 0; dc < kw; ++dc) {
        const int row = (ch * kh + dr) * kw + dc;
        for (int r = 0; r < h; ++r) {
          const int sr = r + dr - pad_h;
          if (sr < 0 || sr >= h) continue;
          for (int c = 0; c < w; ++c) {
            const int sc = c + dc - pad_w;
            if (sc < 0 || sc >= w) continue;
            patches(row, r * w + c) = m(sr, sc);
          }
        }
      }
    }
  }
  return patches;
}

// Adjoint of im2col: scatter-add patch gradients back onto input maps.
std::vector<Eigen::MatrixXd> col2im(const Eigen::MatrixXd& grad_patches,
                                    int channels, int h, int w, int kh,
                                    int kw) {
  const int pad_h = (kh - 1) / 2;
  const int pad_w = (kw - 1) / 2;
  std::vector<Eigen::MatrixXd> maps(
      channels, Eigen::MatrixXd::Zero(h, w));
  for (int ch = 0; ch < channels; ++ch) {
    Eigen::MatrixXd& m = maps[ch];
    for (int dr = 0; dr < kh; ++dr) {
      for (int dc = 0; dc < kw; ++dc) {
        const int row = (ch * kh + dr) * kw + dc;
        for (int r = 0; r < h; ++r) {
          const int sr = r + dr - pad_h;
          if (sr < 0 || sr >= h) continue;
          for (int c = 0; c < w; ++c) {
            const int sc = c + dc - pad_w;
            if (sc < 0 || sc >= w) continue;
            m(sr, sc) += grad_patches(row, r * w + c);
          }
        }
      }
    }
  }
  return maps;
}

const Eigen::MatrixXd& param(const ParamStore& params,
                             const std::string& name) {
  auto it = params.find(name);
  if (it == params.end())
    throw ConfigError("missing parameter: " + name);
  return it->second;
}

}  // namespace

NetworkConfig NetworkConfig::reference(int num_classes) {
  NetworkConfig c;
  c.conv_blocks = {
      {16, 3, 3, 2, 2}, {32, 3, 3, 2, 2}, {48, 3, 3, 2, 1}, {64, 3, 3, 2, 1}};
  c.num_classes = num_classes;
  return c;
}

void validate_config(const NetworkConfig& config) {
  if (config.input_height < 1)
    throw ConfigError("net: input_height must be positive");
  if (config.conv_blocks.empty() || config.conv_blocks.size() > 9)
    throw ConfigError("net: conv block count must be in [1, 9]");
  if (config.lstm_layers < 1 || config.lstm_layers > 9)
    throw ConfigError("net: lstm layer count must be in [1, 9]");
  if (config.lstm_hidden < 1) throw ConfigError("net: lstm_hidden < 1");
  if (config.num_classes < 2) throw ConfigError("net: num_classes < 2");
  if (!(config.bn_epsilon > 0)) throw ConfigError("net: bn_epsilon <= 0");
  if (config.bn_momentum < 0 || config.bn_momentum >= 1)
    throw ConfigError("net: bn_momentum outside [0, 1)");
  for (const ConvBlockSpec& b : config.conv_blocks) {
    if (b.filters < 1) throw ConfigError("net: conv filters < 1");
    if (b.kernel_h < 1 || b.kernel_w < 1 || b.kernel_h % 2 == 0 ||
        b.kernel_w % 2 == 0)
      throw ConfigError("net: kernels must be odd for same padding");
    if (b.pool_h < 1 || b.pool_w < 1)
      throw ConfigError("net: pool sizes must be positive");
  }
  if (config.input_height % pool_height_product(config) != 0)
    throw ConfigError(
        "net: product of pool heights must divide input_height");
}

int frame_dim(const NetworkConfig& config) {
  const int h = config.input_height / pool_height_product(config);
  return config.conv_blocks.back().filters * h;
}

int frame_count(const NetworkConfig& config, int image_width) {
  int w = image_width;
  for (const ConvBlockSpec& b : config.conv_blocks) {
    w /= b.pool_w;
    if (w < 1)
      throw DataError("net: image narrower than the total pooling factor");
  }
  return w;
}

bool is_trainable(const std::string& name) {
  return name.find("running_") == std::string::npos;
}

ParamStore init_params(const NetworkConfig& config, Rng& rng) {
  validate_config(config);
  ParamStore p;
  // Draw order is fixed: conv blocks in order, then LSTM layers (fwd then
  // bwd), then the head. Reordering draws would silently change every
  // seeded experiment.
  int in_channels = 1;
  for (std::size_t b = 0; b < config.conv_blocks.size(); ++b) {
    const ConvBlockSpec& blk = config.conv_blocks[b];
    const int fan = in_channels * blk.kernel_h * blk.kernel_w;
    // Glorot for conv counts receptive-field fan-out.
    const double limit =
        std::sqrt(6.0 / (fan + blk.filters * blk.kernel_h * blk.kernel_w));
    Eigen::MatrixXd w(blk.filters, fan);
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    const int bi = static_cast<int>(b);
    p[conv_name(bi, "weight")] = std::move(w);
    p[conv_name(bi, "bias")] = Eigen::MatrixXd::Zero(blk.filters, 1);
    p[bn_name(bi, "scale")] = Eigen::MatrixXd::Ones(blk.filters, 1);
    p[bn_name(bi, "shift")] = Eigen::MatrixXd::Zero(blk.filters, 1);
    p[bn_name(bi, "running_mean")] = Eigen::MatrixXd::Zero(blk.filters, 1);
    p[bn_name(bi, "running_var")] = Eigen::MatrixXd::Ones(blk.filters, 1);
    in_channels = blk.filters;
  }
  const int hidden = config.lstm_hidden;
  for (int l = 0; l < config.lstm_layers; ++l) {
    const int d = lstm_input_dim(config, l);
    for (const char* dir : {"fwd", "bwd"}) {
      p[lstm_name(l, dir, "w_ih")] = glorot(4 * hidden, d, rng);
      p[lstm_name(l, dir, "w_hh")] = glorot(4 * hidden, hidden, rng);
      Eigen::MatrixXd bias = Eigen::MatrixXd::Zero(4 * hidden, 1);
      bias.block(hidden, 0, hidden, 1).setOnes();  // forget gate
      p[lstm_name(l, dir, "bias")] = std::move(bias);
    }
  }
  p["out.weight"] = glorot(config.num_classes, 2 * hidden, rng);
  p["out.bias"] = Eigen::MatrixXd::Zero(config.num_classes, 1);
  return p;
}

std::size_t param_count(const NetworkConfig& config) {
  std::size_t n = 0;
  int in_channels = 1;
  for (const ConvBlockSpec& b : config.conv_blocks) {
    n += static_cast<std::size_t>(b.filters) * in_channels * b.kernel_h *
         b.kernel_w;          // conv weight
    n += b.filters;           // conv bias
    n += 4ull * b.filters;    // bn scale, shift, running mean, running var
    in_channels = b.filters;
  }
  const std::size_t hidden = static_cast<std::size_t>(config.lstm_hidden);
  for (int l = 0; l < config.lstm_layers; ++l) {
    const std::size_t d = static_cast<std::size_t>(lstm_input_dim(config, l));
    n += 2 * (4 * hidden * d + 4 * hidden * hidden + 4 * hidden);
  }
  n += static_cast<std::size_t>(config.num_classes) * 2 * hidden;
  n += static_cast<std::size_t>(config.num_classes);
  return n;
}

std::size_t trainable_param_count(const NetworkConfig& config) {
  std::size_t n = param_count(config);
  for (const ConvBlockSpec& b : config.conv_blocks)
    n -= 2ull * b.filters;  // running mean + var
  return n;
}

double leaky_relu(double x, double slope, double threshold) {
  return x > threshold ? x : slope * x;
}

void apply_running_stats(ParamStore& params, const RunningStatsDelta& delta,
                         const NetworkConfig& config) {
  if (delta.blocks.size() != config.conv_blocks.size())
    throw ConfigError("apply_running_stats: block count mismatch");
  const double m = config.bn_momentum;
  for (std::size_t b = 0; b < delta.blocks.size(); ++b) {
    const int bi = static_cast<int>(b);
    Eigen::MatrixXd& mean = params.at(bn_name(bi, "running_mean"));
    Eigen::MatrixXd& var = params.at(bn_name(bi, "running_var"));
    mean.col(0) = m * mean.col(0) + (1.0 - m) * delta.blocks[b].mean;
    var.col(0) = m * var.col(0) + (1.0 - m) * delta.blocks[b].var;
  }
}

namespace {

struct BlockForwardOut {
  std::vector<Eigen::MatrixXd> pooled;
  BnBatchStats stats;
};

BlockForwardOut conv_block_forward(const std::vector<Eigen::MatrixXd>& input,
                                   int block, const ParamStore& params,
                                   const NetworkConfig& config, NetMode mode,
                                   ConvBlockCache* cache) {
  const ConvBlockSpec& spec = config.conv_blocks[static_cast<std::size_t>(block)];
  const int h = static_cast<int>(input[0].rows());
  const int w = static_cast<int>(input[0].cols());
  const int filters = spec.filters;
  const int area = h * w;

  const Eigen::MatrixXd patches = im2col(input, spec.kernel_h, spec.kernel_w);
  Eigen::MatrixXd conv_out =
      param(params, conv_name(block, "weight")) * patches;
  conv_out.colwise() += param(params, conv_name(block, "bias")).col(0);

  // Batch norm over this item's spatial positions.
  const Eigen::MatrixXd& scale = param(params, bn_name(block, "scale"));
  const Eigen::MatrixXd& shift = param(params, bn_name(block, "shift"));
  Eigen::VectorXd mean(filters), var(filters), inv_std(filters);
  if (mode == NetMode::train) {
    if (area < 2)
      throw DataError("batch norm needs at least two spatial positions");
    mean = conv_out.rowwise().mean();
    for (int f = 0; f < filters; ++f) {
      const auto centered = conv_out.row(f).array() - mean(f);
      var(f) = centered.square().sum() / area;
    }
  } else {
    mean = param(params, bn_name(block, "running_mean")).col(0);
    var = param(params, bn_name(block, "running_var")).col(0);
  }
  for (int f = 0; f < filters; ++f)
    inv_std(f) = 1.0 / std::sqrt(var(f) + config.bn_epsilon);

  Eigen::MatrixXd xhat(filters, area);
  Eigen::MatrixXd bn_out(filters, area);
  for (int f = 0; f < filters; ++f) {
    xhat.row(f) = ((conv_out.row(f).array() - mean(f)) * inv_std(f)).matrix();
    bn_out.row(f) =
        (xhat.row(f).array() * scale(f, 0) + shift(f, 0)).matrix();
  }

  Eigen::MatrixXd act(filters, area);
  for (int f = 0; f < filters; ++f)
    for (int j = 0; j < area; ++j)
      act(f, j) =
          leaky_relu(bn_out(f, j), config.leaky_slope, config.leaky_threshold);

  const int out_h = h / spec.pool_h;
  const int out_w = w / spec.pool_w;
  if (out_h < 1 || out_w < 1)
    throw DataError("net: feature map collapsed to zero under pooling");

  BlockForwardOut out;
  out.pooled.assign(static_cast<std::size_t>(filters),
                    Eigen::MatrixXd(out_h, out_w));
  std::vector<Eigen::MatrixXi> pool_arg;
  if (cache)
    pool_arg.assign(static_cast<std::size_t>(filters),
                    Eigen::MatrixXi(out_h, out_w));
  for (int f = 0; f < filters; ++f) {
    for (int pr = 0; pr < out_h; ++pr) {
      for (int pc = 0; pc < out_w; ++pc) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = -1;
        for (int dr = 0; dr < spec.pool_h; ++dr) {
          for (int dc = 0; dc < spec.pool_w; ++dc) {
            const int r = pr * spec.pool_h + dr;
            const int c = pc * spec.pool_w + dc;
            const double v = act(f, r * w + c);
            if (v > best) {
              best = v;
              best_idx = r * w + c;
            }
          }
        }
        out.pooled[static_cast<std::size_t>(f)](pr, pc) = best;
        if (cache) pool_arg[static_cast<std::size_t>(f)](pr, pc) = best_idx;
      }
    }
  }

  if (mode == NetMode::train) {
    out.stats.mean = mean;
    out.stats.var = var;
  }
  if (cache) {
    cache->input = input;
    cache->bn_out = std::move(bn_out);
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
    cache->pool_arg = std::move(pool_arg);
    cache->in_h = h;
    cache->in_w = w;
    cache->out_h = out_h;
    cache->out_w = out_w;
  }
  return out;
}

// One direction over `input` (D x T) in column order 0..T-1.
void lstm_dir_forward(const Eigen::MatrixXd& input, const Eigen::MatrixXd& w_ih,
                      const Eigen::MatrixXd& w_hh, const Eigen::MatrixXd& bias,
                      LstmDirCache& cache) {
  const int t_len = static_cast<int>(input.cols());
  const int hidden = static_cast<int>(w_hh.cols());
  cache.gates.resize(4 * hidden, t_len);
  cache.c.resize(hidden, t_len);
  cache.tanh_c.resize(hidden, t_len);
  cache.h.resize(hidden, t_len);

  Eigen::MatrixXd pre = w_ih * input;  // 4H x T, input part batched
  pre.colwise() += bias.col(0);
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(hidden);
  for (int t = 0; t < t_len; ++t) {
    Eigen::VectorXd a = pre.col(t) + w_hh * h_prev;
    for (int j = 0; j < hidden; ++j) {
      const double i = sigmoid(a(j));
      const double f = sigmoid(a(hidden + j));
      const double g = std::tanh(a(2 * hidden + j));
      const double o = sigmoid(a(3 * hidden + j));
      const double c = f * c_prev(j) + i * g;
      const double tc = std::tanh(c);
      cache.gates(j, t) = i;
      cache.gates(hidden + j, t) = f;
      cache.gates(2 * hidden + j, t) = g;
      cache.gates(3 * hidden + j, t) = o;
      cache.c(j, t) = c;
      cache.tanh_c(j, t) = tc;
      cache.h(j, t) = o * tc;
    }
    h_prev = cache.h.col(t);
    c_prev = cache.c.col(t);
  }
}

// BPTT for one direction. grad_h is dLoss/dh per step (H x T, processing
// order). Returns dLoss/dinput and accumulates parameter grads.
Eigen::MatrixXd lstm_dir_backward(const Eigen::MatrixXd& input,
                                  const Eigen::MatrixXd& w_ih,
                                  const Eigen::MatrixXd& w_hh,
                                  const LstmDirCache& cache,
                                  const Eigen::MatrixXd& grad_h,
                                  Eigen::MatrixXd& d_w_ih,
                                  Eigen::MatrixXd& d_w_hh,
                                  Eigen::MatrixXd& d_bias) {
  const int t_len = static_cast<int>(input.cols());
  const int hidden = static_cast<int>(w_hh.cols());
  Eigen::MatrixXd da_all(4 * hidden, t_len);  // pre-activation grads per step

  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(hidden);
  for (int t = t_len - 1; t >= 0; --t) {
    Eigen::VectorXd dh = grad_h.col(t) + dh_next;
    Eigen::VectorXd da(4 * hidden);
    for (int j = 0; j < hidden; ++j) {
      const double i = cache.gates(j, t);
      const double f = cache.gates(hidden + j, t);
      const double g = cache.gates(2 * hidden + j, t);
      const double o = cache.gates(3 * hidden + j, t);
      const double tc = cache.tanh_c(j, t);
      const double c_prev = t > 0 ? cache.c(j, t - 1) : 0.0;

      const double do_ = dh(j) * tc;
      double dc = dh(j) * o * (1.0 - tc * tc) + dc_next(j);
      const double di = dc * g;
      const double dg = dc * i;
      const double df = dc * c_prev;
      dc_next(j) = dc * f;

      da(j) = di * i * (1.0 - i);
      da(hidden + j) = df * f * (1.0 - f);
      da(2 * hidden + j) = dg * (1.0 - g * g);
      da(3 * hidden + j) = do_ * o * (1.0 - o);
    }
    da_all.col(t) = da;
    dh_next = w_hh.transpose() * da;
  }

  d_w_ih += da_all * input.transpose();
  // h_{t-1} matrix: column t holds h at t-1 (zero for t = 0).
  Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(hidden, t_len);
  if (t_len > 1) h_prev.rightCols(t_len - 1) = cache.h.leftCols(t_len - 1);
  d_w_hh += da_all * h_prev.transpose();
  d_bias.col(0) += da_all.rowwise().sum();
  return w_ih.transpose() * da_all;
}

Eigen::MatrixXd reverse_cols(const Eigen::MatrixXd& m) {
  return m.rowwise().reverse();
}

}  // namespace

NetForward net_forward(const GrayImage& image, const ParamStore& params,
                       const NetworkConfig& config, NetMode mode,
                       bool want_cache) {
  validate_config(config);
  if (image.height() != config.input_height)
    throw DataError("net_forward: image height " +
                    std::to_string(image.height()) + " != configured " +
                    std::to_string(config.input_height));
  frame_count(config, image.width());  // width feasibility

  NetForward result;
  if (want_cache) {
    result.cache = std::make_shared<ForwardCache>();
    result.cache->train_mode = mode == NetMode::train;
    result.cache->conv.resize(config.conv_blocks.size());
    result.cache->lstm.resize(static_cast<std::size_t>(config.lstm_layers));
  }

  // Single input channel from the image.
  std::vector<Eigen::MatrixXd> maps(1);
  maps[0].resize(image.height(), image.width());
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c) maps[0](r, c) = image.at(r, c);

  for (std::size_t b = 0; b < config.conv_blocks.size(); ++b) {
    ConvBlockCache* cache =
        want_cache ? &result.cache->conv[b] : nullptr;
    BlockForwardOut out = conv_block_forward(maps, static_cast<int>(b), params,
                                             config, mode, cache);
    maps = std::move(out.pooled);
    if (mode == NetMode::train) result.stats.blocks.push_back(out.stats);
  }

  // Column flattening: frame t stacks column t of every channel map,
  // channel-major (feature index = channel * height + row).
  const int channels = static_cast<int>(maps.size());
  const int fh = static_cast<int>(maps[0].rows());
  const int t_len = static_cast<int>(maps[0].cols());
  Eigen::MatrixXd x(channels * fh, t_len);
  for (int ch = 0; ch < channels; ++ch)
    x.block(ch * fh, 0, fh, t_len) = maps[ch];

  for (int l = 0; l < config.lstm_layers; ++l) {
    LstmLayerCache local;
    LstmLayerCache& cache =
        want_cache ? result.cache->lstm[static_cast<std::size_t>(l)] : local;
    cache.input = std::move(x);
    lstm_dir_forward(cache.input, param(params, lstm_name(l, "fwd", "w_ih")),
                     param(params, lstm_name(l, "fwd", "w_hh")),
                     param(params, lstm_name(l, "fwd", "bias")), cache.fwd);
    const Eigen::MatrixXd reversed = reverse_cols(cache.input);
    lstm_dir_forward(reversed, param(params, lstm_name(l, "bwd", "w_ih")),
                     param(params, lstm_name(l, "bwd", "w_hh")),
                     param(params, lstm_name(l, "bwd", "bias")), cache.bwd);
    const int hidden = config.lstm_hidden;
    x.resize(2 * hidden, t_len);
    x.topRows(hidden) = cache.fwd.h;
    x.bottomRows(hidden) = reverse_cols(cache.bwd.h);
  }

  const Eigen::MatrixXd& w_out = param(params, "out.weight");
  const Eigen::MatrixXd& b_out = param(params, "out.bias");
  if (want_cache) result.cache->head_input = x;
  Eigen::MatrixXd scores = w_out * x;  // K x T
  scores.colwise() += b_out.col(0);

  const int k = static_cast<int>(scores.rows());
  result.log_probs.resize(t_len, k);
  for (int t = 0; t < t_len; ++t) {
    const double m = scores.col(t).maxCoeff();
    const double lse =
        m + std::log((scores.col(t).array() - m).exp().sum());
    result.log_probs.row(t) = (scores.col(t).array() - lse).transpose();
  }
  if (want_cache) result.cache->log_probs = result.log_probs;
  return result;
}

NetBackward net_backward(const Eigen::MatrixXd& grad_log_probs,
                         const ForwardCache& cache, const ParamStore& params,
                         const NetworkConfig& config) {
  if (cache.log_probs.rows() != grad_log_probs.rows() ||
      cache.log_probs.cols() != grad_log_probs.cols())
    throw DataError("net_backward: gradient shape mismatch with forward");

  const int t_len = static_cast<int>(grad_log_probs.rows());
  const int k = static_cast<int>(grad_log_probs.cols());
  const int hidden = config.lstm_hidden;

  NetBackward out;
  for (const auto& [name, value] : params)
    if (is_trainable(name))
      out.grads[name] = Eigen::MatrixXd::Zero(value.rows(), value.cols());

  // Log-softmax backward: dscore = g - softmax * sum(g), per frame.
  Eigen::MatrixXd dscores(k, t_len);
  for (int t = 0; t < t_len; ++t) {
    const Eigen::VectorXd g = grad_log_probs.row(t).transpose();
    const Eigen::VectorXd p =
        cache.log_probs.row(t).transpose().array().exp().matrix();
    dscores.col(t) = g - p * g.sum();
  }

  const Eigen::MatrixXd& w_out = param(params, "out.weight");
  out.grads["out.weight"] += dscores * cache.head_input.transpose();
  out.grads["out.bias"].col(0) += dscores.rowwise().sum();
  Eigen::MatrixXd dx = w_out.transpose() * dscores;  // 2H x T

  for (int l = config.lstm_layers - 1; l >= 0; --l) {
    const LstmLayerCache& lc = cache.lstm[static_cast<std::size_t>(l)];
    const Eigen::MatrixXd grad_fwd = dx.topRows(hidden);
    const Eigen::MatrixXd grad_bwd = reverse_cols(dx.bottomRows(hidden));

    Eigen::MatrixXd d_in_fwd = lstm_dir_backward(
        lc.input, param(params, lstm_name(l, "fwd", "w_ih")),
        param(params, lstm_name(l, "fwd", "w_hh")), lc.fwd, grad_fwd,
        out.grads[lstm_name(l, "fwd", "w_ih")],
        out.grads[lstm_name(l, "fwd", "w_hh")],
        out.grads[lstm_name(l, "fwd", "bias")]);

    const Eigen::MatrixXd reversed_input = reverse_cols(lc.input);
    Eigen::MatrixXd d_in_bwd = lstm_dir_backward(
        reversed_input, param(params, lstm_name(l, "bwd", "w_ih")),
        param(params, lstm_name(l, "bwd", "w_hh")), lc.bwd, grad_bwd,
        out.grads[lstm_name(l, "bwd", "w_ih")],
        out.grads[lstm_name(l, "bwd", "w_hh")],
        out.grads[lstm_name(l, "bwd", "bias")]);

    dx = d_in_fwd + reverse_cols(d_in_bwd);
  }

  // Unflatten frames back to channel maps.
  const ConvBlockCache& last = cache.conv.back();
  const int channels = config.conv_blocks.back().filters;
  const int fh = last.out_h;
  std::vector<Eigen::MatrixXd> dmaps(static_cast<std::size_t>(channels));
  for (int ch = 0; ch < channels; ++ch)
    dmaps[static_cast<std::size_t>(ch)] = dx.block(ch * fh, 0, fh, t_len);

  for (int b = static_cast<int>(config.conv_blocks.size()) - 1; b >= 0; --b) {
    const ConvBlockCache& cc = cache.conv[static_cast<std::size_t>(b)];
    const ConvBlockSpec& spec = config.conv_blocks[static_cast<std::size_t>(b)];
    const int filters = spec.filters;
    const int area = cc.in_h * cc.in_w;

    // Pool backward: all gradient flows to the argmax tap.
    Eigen::MatrixXd dact = Eigen::MatrixXd::Zero(filters, area);
    for (int f = 0; f < filters; ++f) {
      const Eigen::MatrixXi& arg = cc.pool_arg[static_cast<std::size_t>(f)];
      const Eigen::MatrixXd& dm = dmaps[static_cast<std::size_t>(f)];
      for (int pr = 0; pr < cc.out_h; ++pr)
        for (int pc = 0; pc < cc.out_w; ++pc)
          dact(f, arg(pr, pc)) += dm(pr, pc);
    }

    // Leaky ReLU backward against the cached pre-activation.
    Eigen::MatrixXd dbn(filters, area);
    for (int f = 0; f < filters; ++f)
      for (int j = 0; j < area; ++j)
        dbn(f, j) = dact(f, j) * (cc.bn_out(f, j) > config.leaky_threshold
                                      ? 1.0
                                      : config.leaky_slope);

    // Batch norm backward.
    const Eigen::MatrixXd& scale = param(params, bn_name(b, "scale"));
    Eigen::MatrixXd dconv(filters, area);
    for (int f = 0; f < filters; ++f) {
      const auto dyr = dbn.row(f).array();
      const auto xh = cc.xhat.row(f).array();
      out.grads[bn_name(b, "shift")](f, 0) += dyr.sum();
      out.grads[bn_name(b, "scale")](f, 0) += (dyr * xh).sum();
      const Eigen::ArrayXXd dxhat = dyr * scale(f, 0);
      if (cache.train_mode) {
        const double sum_dxhat = dxhat.sum();
        const double sum_dxhat_xhat = (dxhat * xh).sum();
        dconv.row(f) = (cc.inv_std(f) / area *
                        (area * dxhat - sum_dxhat - xh * sum_dxhat_xhat))
                           .matrix();
      } else {
        dconv.row(f) = (dxhat * cc.inv_std(f)).matrix();
      }
    }

    // Conv backward.
    const Eigen::MatrixXd patches =
        im2col(cc.input, spec.kernel_h, spec.kernel_w);
    out.grads[conv_name(b, "weight")] += dconv * patches.transpose();
    out.grads[conv_name(b, "bias")].col(0) += dconv.rowwise().sum();
    const Eigen::MatrixXd dpatches =
        param(params, conv_name(b, "weight")).transpose() * dconv;
    dmaps = col2im(dpatches, static_cast<int>(cc.input.size()), cc.in_h,
                   cc.in_w, spec.kernel_h, spec.kernel_w);
  }

  out.input_grad = std::move(dmaps[0]);
  return out;
}

ParamStore replace_output_layer(const ParamStore& params, int new_num_classes,
                                std::uint64_t seed) {
  if (new_num_classes < 2)
    throw ConfigError("replace_output_layer: num_classes < 2");
  const Eigen::MatrixXd& old_w = param(params, "out.weight");
  const int in_dim = static_cast<int>(old_w.cols());

  ParamStore out = params;
  Rng rng(seed);
  out["out.weight"] = glorot(new_num_classes, in_dim, rng);
  out["out.bias"] = Eigen::MatrixXd::Zero(new_num_classes, 1);
  return out;
}

}  // namespace htrner
