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

#include "htrner/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "htrner/error.hpp"
#include "htrner/utf8.hpp"

namespace htrner {

const std::string& to_string(TrackKind t) {
  static const std::string kBasic = "basic";
  static const std::string kComplete = "complete";
  return t == TrackKind::basic ? kBasic : kComplete;
}

TrackKind track_from_string(const std::string& name) {
  if (name == "basic") return TrackKind::basic;
  if (name == "complete") return TrackKind::complete;
  throw ConfigError("unknown track: " + name);
}

namespace {

std::size_t levenshtein(const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1);
  std::vector<std::size_t> cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

double cer(const std::string& hyp, const std::string& ref) {
  const std::vector<char32_t> r = utf8::decode(ref);
  if (r.empty()) throw DataError("cer: empty reference");
  const std::vector<char32_t> h = utf8::decode(hyp);
  return static_cast<double>(levenshtein(h, r)) / static_cast<double>(r.size());
}

std::size_t edit_distance(const std::vector<int>& a,
                          const std::vector<int>& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1);
  std::vector<std::size_t> cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

bool labels_match(const AnnotatedWord& gt, const AnnotatedWord& pred,
                  TrackKind track) {
  if (gt.category != pred.category) return false;
  if (track == TrackKind::complete && gt.person != pred.person) return false;
  return true;
}

}  // namespace

double word_contribution(const AnnotatedWord& gt,
                         const std::vector<AnnotatedWord>& predictions,
                         TrackKind track, std::vector<bool>& used) {
  if (used.size() != predictions.size())
    throw std::invalid_argument("word_contribution: used/predictions size");

  // Exact transcript plus matching labels wins outright; earliest such
  // prediction is consumed.
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (used[i]) continue;
    if (predictions[i].transcript == gt.transcript &&
        labels_match(gt, predictions[i], track)) {
      used[i] = true;
      return 1.0;
    }
  }

  // Otherwise the label-matching prediction with the lowest transcript CER
  // is consumed; earliest index breaks ties. A prediction at CER >= 1
  // contributes nothing and is left for later words: consuming it would
  // only starve a subsequent ground-truth word of a real match.
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (used[i]) continue;
    if (!labels_match(gt, predictions[i], track)) continue;
    const double c = cer(predictions[i].transcript, gt.transcript);
    if (c < best) {
      best = c;
      best_index = i;
    }
  }
  if (best_index == predictions.size() || best >= 1.0) return 0.0;
  used[best_index] = true;
  return 1.0 - best;
}

namespace {

// Maximum-weight one-to-one assignment via shortest augmenting paths
// (Hungarian algorithm with potentials). `weight` is n x m with entries in
// [0, 1]; rows beyond the matching stay unassigned at zero gain. Returns the
// per-row matched weight.
//
// An optimal assignment, unlike sequential greedy consumption, makes two
// metric properties hold unconditionally: loosening the label gate (basic
// vs complete track) can only raise the score, and permuting predictions
// never changes it.
std::vector<double> assignment_gains(const std::vector<std::vector<double>>& weight) {
  const int n = static_cast<int>(weight.size());
  const int m = n == 0 ? 0 : static_cast<int>(weight[0].size());
  std::vector<double> gains(n, 0.0);
  if (n == 0 || m == 0) return gains;

  // Minimization form over a square matrix padded with zero-gain cells.
  const int dim = std::max(n, m);
  auto cost = [&](int i, int j) {
    if (i < n && j < m) return 1.0 - weight[i][j];
    return 1.0;  // dummy row/column: gain 0
  };

  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(dim + 1, 0.0), v(dim + 1, 0.0);
  std::vector<int> match_col(dim + 1, 0);  // column -> row, 1-based
  std::vector<int> way(dim + 1, 0);
  for (int i = 1; i <= dim; ++i) {
    match_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(dim + 1, kInf);
    std::vector<bool> visited(dim + 1, false);
    do {
      visited[j0] = true;
      const int i0 = match_col[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= dim; ++j) {
        if (visited[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= dim; ++j) {
        if (visited[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const int j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (int j = 1; j <= dim; ++j) {
    const int i = match_col[j];
    if (i >= 1 && i <= n && j <= m) gains[i - 1] = weight[i - 1][j - 1];
  }
  return gains;
}

}  // namespace

RecordScore score_record(const AnnotatedRecord& gt, const AnnotatedRecord& pred,
                         TrackKind track, ScoreOptions options) {
  RecordScore out;
  out.record_id = gt.record_id;

  std::vector<const AnnotatedWord*> scorable;
  for (const AnnotatedWord& w : gt.words) {
    if (options.score_all_words || w.category != SemanticCategory::other)
      scorable.push_back(&w);
  }
  out.scorable_words = static_cast<int>(scorable.size());
  out.has_scorable = out.scorable_words > 0;
  if (!out.has_scorable) return out;

  std::vector<std::vector<double>> weight(
      scorable.size(), std::vector<double>(pred.words.size(), 0.0));
  for (std::size_t i = 0; i < scorable.size(); ++i) {
    for (std::size_t j = 0; j < pred.words.size(); ++j) {
      if (!labels_match(*scorable[i], pred.words[j], track)) continue;
      if (pred.words[j].transcript == scorable[i]->transcript) {
        weight[i][j] = 1.0;
      } else {
        weight[i][j] = std::max(
            0.0, 1.0 - cer(pred.words[j].transcript, scorable[i]->transcript));
      }
    }
  }

  out.contributions = assignment_gains(weight);
  double sum = 0.0;
  for (double c : out.contributions) sum += c;
  out.score = 100.0 * sum / static_cast<double>(out.scorable_words);
  return out;
}

double score_dataset(
    const std::vector<std::pair<AnnotatedRecord, AnnotatedRecord>>& pairs,
    TrackKind track, ScoreOptions options) {
  double sum = 0.0;
  int counted = 0;
  for (const auto& [gt, pred] : pairs) {
    const RecordScore s = score_record(gt, pred, track, options);
    if (!s.has_scorable) continue;
    sum += s.score;
    ++counted;
  }
  if (counted == 0) throw DataError("score_dataset: no scorable records");
  return sum / static_cast<double>(counted);
}

std::string score_report_csv(const std::vector<RecordScore>& scores,
                             TrackKind track) {
  std::string out = "record_id,track,scorable_words,score\n";
  char buf[64];
  for (const RecordScore& s : scores) {
    std::snprintf(buf, sizeof(buf), "%d,%.2f", s.scorable_words, s.score);
    out += s.record_id + "," + to_string(track) + "," + buf + "\n";
  }
  return out;
}

}  // namespace htrner
