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

#include "htrner/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "htrner/error.hpp"

namespace htrner {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kBlank = 0;

void check_inputs(const Eigen::MatrixXd& log_probs,
                  const std::vector<int>& label) {
  if (label.empty()) throw DataError("ctc: empty label");
  if (log_probs.rows() < 1 || log_probs.cols() < 2)
    throw DataError("ctc: log_probs must be T x K with K >= 2");
  const int k = static_cast<int>(log_probs.cols());
  for (int s : label)
    if (s <= 0 || s >= k) throw DataError("ctc: label symbol out of range");
}

// Blank-interleaved label: blank, l1, blank, ..., lL, blank.
std::vector<int> augment(const std::vector<int>& label) {
  std::vector<int> out(2 * label.size() + 1, kBlank);
  for (std::size_t i = 0; i < label.size(); ++i) out[2 * i + 1] = label[i];
  return out;
}

}  // namespace

double logsumexp(const double* values, int n) {
  double m = kNegInf;
  for (int i = 0; i < n; ++i) m = std::max(m, values[i]);
  if (m == kNegInf) return kNegInf;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(values[i] - m);
  return m + std::log(sum);
}

int min_frames(const std::vector<int>& label) {
  if (label.empty()) throw DataError("min_frames: empty label");
  int frames = static_cast<int>(label.size());
  for (std::size_t i = 1; i < label.size(); ++i)
    if (label[i] == label[i - 1]) ++frames;
  return frames;
}

CtcResult ctc_loss(const Eigen::MatrixXd& log_probs,
                   const std::vector<int>& label) {
  check_inputs(log_probs, label);
  const int t_len = static_cast<int>(log_probs.rows());
  if (t_len < min_frames(label))
    throw InfeasibleTarget("ctc: label needs " +
                           std::to_string(min_frames(label)) +
                           " frames, got " + std::to_string(t_len));

  const std::vector<int> lab = augment(label);
  const int s_len = static_cast<int>(lab.size());

  // A skip transition s-2 -> s is legal when it does not jump over a
  // mandatory blank between equal symbols.
  auto skip_ok = [&](int s) {
    return s >= 2 && lab[s] != kBlank && lab[s] != lab[s - 2];
  };

  CtcResult res;
  res.alpha.setConstant(t_len, s_len, kNegInf);
  res.beta.setConstant(t_len, s_len, kNegInf);
  Eigen::MatrixXd& alpha = res.alpha;
  Eigen::MatrixXd& beta = res.beta;

  alpha(0, 0) = log_probs(0, lab[0]);
  if (s_len > 1) alpha(0, 1) = log_probs(0, lab[1]);
  for (int t = 1; t < t_len; ++t) {
    for (int s = 0; s < s_len; ++s) {
      double terms[3];
      int n = 0;
      terms[n++] = alpha(t - 1, s);
      if (s >= 1) terms[n++] = alpha(t - 1, s - 1);
      if (skip_ok(s)) terms[n++] = alpha(t - 1, s - 2);
      const double in = logsumexp(terms, n);
      alpha(t, s) = in == kNegInf ? kNegInf : in + log_probs(t, lab[s]);
    }
  }

  double tail[2];
  int tail_n = 0;
  tail[tail_n++] = alpha(t_len - 1, s_len - 1);
  if (s_len > 1) tail[tail_n++] = alpha(t_len - 1, s_len - 2);
  const double log_p = logsumexp(tail, tail_n);
  if (log_p == kNegInf)
    throw NumericError("ctc: label probability underflowed to zero");
  res.loss = -log_p;

  // beta(t, s) excludes the emission at t, so alpha(t, s) + beta(t, s) is
  // the mass of all complete paths through (t, s) and their per-frame
  // logsumexp equals log_p for every t.
  beta(t_len - 1, s_len - 1) = 0.0;
  if (s_len > 1) beta(t_len - 1, s_len - 2) = 0.0;
  for (int t = t_len - 2; t >= 0; --t) {
    for (int s = 0; s < s_len; ++s) {
      double terms[3];
      int n = 0;
      terms[n++] = beta(t + 1, s) + log_probs(t + 1, lab[s]);
      if (s + 1 < s_len)
        terms[n++] = beta(t + 1, s + 1) + log_probs(t + 1, lab[s + 1]);
      if (s + 2 < s_len && skip_ok(s + 2))
        terms[n++] = beta(t + 1, s + 2) + log_probs(t + 1, lab[s + 2]);
      beta(t, s) = logsumexp(terms, n);
    }
  }

  // d loss / d log_probs(t, k) = -sum over lattice states labeled k of the
  // state posterior at t.
  res.grad.setZero(t_len, log_probs.cols());
  for (int t = 0; t < t_len; ++t) {
    for (int s = 0; s < s_len; ++s) {
      const double joint = alpha(t, s) + beta(t, s);
      if (joint == kNegInf) continue;
      res.grad(t, lab[s]) -= std::exp(joint - log_p);
    }
  }
  return res;
}

double ctc_brute_force(const Eigen::MatrixXd& log_probs,
                       const std::vector<int>& label) {
  check_inputs(log_probs, label);
  const int t_len = static_cast<int>(log_probs.rows());
  const int k = static_cast<int>(log_probs.cols());

  std::vector<int> path(t_len, 0);
  double total = kNegInf;
  // Odometer enumeration of all K^T paths.
  while (true) {
    // Collapse repeats then drop blanks.
    std::vector<int> collapsed;
    for (int t = 0; t < t_len; ++t) {
      if (t > 0 && path[t] == path[t - 1]) continue;
      if (path[t] != kBlank) collapsed.push_back(path[t]);
    }
    if (collapsed == label) {
      double lp = 0.0;
      for (int t = 0; t < t_len; ++t) lp += log_probs(t, path[t]);
      const double terms[2] = {total, lp};
      total = logsumexp(terms, 2);
    }
    int pos = t_len - 1;
    while (pos >= 0 && path[pos] == k - 1) path[pos--] = 0;
    if (pos < 0) break;
    ++path[pos];
  }
  if (total == kNegInf)
    throw NumericError("ctc_brute_force: no path matches the label");
  return -total;
}

std::vector<int> best_path_decode(const Eigen::MatrixXd& log_probs) {
  std::vector<int> out;
  int prev = -1;
  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    Eigen::Index best;
    log_probs.row(t).maxCoeff(&best);
    const int sym = static_cast<int>(best);
    if (sym != prev && sym != kBlank) out.push_back(sym);
    prev = sym;
  }
  return out;
}

}  // namespace htrner
