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
#include <vector>

namespace htrner {

// log_probs matrices are T x K (frames by symbols), each row a log
// distribution. Blank is symbol 0. Labels hold indices in [1, K).

struct CtcResult {
  double loss = 0.0;                 // negative log probability of the label
  Eigen::MatrixXd grad;              // d loss / d log_probs, T x K
  Eigen::MatrixXd alpha;             // augmented-lattice forward, T x (2L+1)
  Eigen::MatrixXd beta;              // backward excluding emission at t
};

// Smallest frame count that can emit the label: its length plus one extra
// frame per adjacent repeated symbol.
int min_frames(const std::vector<int>& label);

// Forward-backward loss and gradient. Throws InfeasibleTarget when T <
// min_frames(label), DataError on an empty label or bad indices.
CtcResult ctc_loss(const Eigen::MatrixXd& log_probs,
                   const std::vector<int>& label);

// Exhaustive reference: sums the probability of every length-T symbol path
// that collapses to the label. Exponential in T; for test oracles only.
double ctc_brute_force(const Eigen::MatrixXd& log_probs,
                       const std::vector<int>& label);

// Per-frame argmax, collapse adjacent repeats, drop blanks.
std::vector<int> best_path_decode(const Eigen::MatrixXd& log_probs);

// Numerically safe log(sum(exp)) with -inf handled as "absent".
double logsumexp(const double* values, int n);

}  // namespace htrner
