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

#include <string>
#include <vector>

#include "htrner/types.hpp"

namespace htrner {

// Scoring mode: `basic` requires the semantic category to match, `complete`
// requires category and person.
enum class TrackKind { basic, complete };

const std::string& to_string(TrackKind t);
TrackKind track_from_string(const std::string& name);

struct ScoreOptions {
  // Score every ground-truth word instead of only the entity words
  // (category != other).
  bool score_all_words = false;
};

// Character error rate: Levenshtein distance over code points divided by the
// reference length. May exceed 1. Throws on an empty reference.
double cer(const std::string& hyp, const std::string& ref);

// Edit distance between two symbol-index sequences (used for train/valid
// CER over encoded targets).
std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b);

// Contribution of one ground-truth word given the not-yet-consumed
// predictions. `used` marks consumed predictions and is updated when a
// prediction is matched. Returns a value in [0, 1].
double word_contribution(const AnnotatedWord& gt,
                         const std::vector<AnnotatedWord>& predictions,
                         TrackKind track, std::vector<bool>& used);

struct RecordScore {
  std::string record_id;
  std::vector<double> contributions;  // one per scorable ground-truth word
  int scorable_words = 0;
  double score = 0.0;  // 100 * mean contribution; 0 when nothing scorable
  bool has_scorable = false;
};

// Scores one record: an optimal one-to-one assignment between scorable
// ground-truth words and predictions, maximizing the summed contributions.
// Contributions are reported in ground-truth order. Optimality (rather than
// sequential consumption) guarantees that loosening the label gate never
// lowers the score and that prediction order is irrelevant.
RecordScore score_record(const AnnotatedRecord& gt, const AnnotatedRecord& pred,
                         TrackKind track, ScoreOptions options = {});

// Mean record score over records with at least one scorable word.
double score_dataset(
    const std::vector<std::pair<AnnotatedRecord, AnnotatedRecord>>& pairs,
    TrackKind track, ScoreOptions options = {});

// CSV rows "record_id,track,scorable_words,score" for a per-record report.
std::string score_report_csv(const std::vector<RecordScore>& scores,
                             TrackKind track);

}  // namespace htrner
