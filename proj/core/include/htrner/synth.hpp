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
#include <vector>

#include "htrner/data.hpp"
#include "htrner/image.hpp"

namespace htrner {

// Synthetic marriage-license pages: every record renders as one page of
// three short lines (husband clause, parents clause, wife clause) written in
// a procedural script. Each character has a fixed stroke skeleton; instances
// vary by jitter, slant, stroke width, and additive noise.
struct SynthConfig {
  int n_records = 500;
  int line_height = 64;  // nominal line band height on the page

  // Split fractions by record index; the remainder is the test split.
  double train_fraction = 0.72;
  double valid_fraction = 0.08;

  // Probability that an eligible content word in a test record is drawn
  // from the held-out vocabulary slice instead of the shared one.
  double oov_rate = 0.0557;

  double noise = 0.03;      // additive pixel noise sigma
  double jitter = 1.1;      // stroke endpoint jitter in pixels
  double slant = 0.07;      // per-word shear sigma
  double thickness = 2.1;   // mean stroke radius in pixels

  // Content vocabularies; the trailing ~15% of names, surnames, occupations
  // and locations form the held-out pool. Empty fields use built-ins.
  std::vector<std::string> names;
  std::vector<std::string> surnames;
  std::vector<std::string> occupations;
  std::vector<std::string> locations;
  std::vector<std::string> states;
};

struct SynthPage {
  GrayImage image;
  PageManifest manifest;  // image path filled in by write_synth_dataset
};

// Deterministic in (seed, config); page i depends only on the seed, i, and
// the config, so generation order cannot change the output.
std::vector<SynthPage> synth_generate(std::uint64_t seed,
                                      const SynthConfig& config);

// Writes pages/page_NNNNN.png plus manifest.json under out_dir.
void write_synth_dataset(const std::vector<SynthPage>& pages,
                         const std::string& out_dir);

// Fraction of test-split word instances whose transcript never occurs in
// the train or valid splits.
double oov_fraction(const std::vector<SynthPage>& pages);

}  // namespace htrner
