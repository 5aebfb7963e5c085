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

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "htrner/rng.hpp"
#include "htrner/tag_codec.hpp"
#include "htrner/types.hpp"

namespace {

using namespace htrner;

// A record shaped like one page of a marriage register: forty-odd words,
// half of them tagged entities across several persons.
AnnotatedRecord make_record() {
  Rng rng(23);
  const std::vector<std::string> pool = {
      "esposat", "joan",   "vila",    "moliner", "de",     "reus",
      "fill",    "clara",  "fuster",  "y",       "ab",     "maria",
      "donsella","filla",  "lluis",   "pages",   "barcelona", "anna",
      "serra",   "teixidor"};
  AnnotatedRecord rec;
  rec.record_id = "bench";
  for (int i = 0; i < 42; ++i) {
    AnnotatedWord w;
    w.transcript = pool[rng.below(pool.size())];
    if (i % 2 == 0) {
      w.category = kAllCategories[rng.below(4)];  // entity categories
      w.person = kAllPersons[rng.below(7)];       // everything but none
    }
    rec.words.push_back(w);
  }
  return rec;
}

void BM_Encode(benchmark::State& state) {
  const auto scheme = kAllSchemes[static_cast<std::size_t>(state.range(0))];
  const AnnotatedRecord rec = make_record();
  const SymbolTable table = build_symbol_table({rec}, scheme);
  for (auto _ : state) {
    auto symbols = encode(rec, scheme, table);
    benchmark::DoNotOptimize(symbols.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(rec.words.size()));
}

void BM_DecodeStrict(benchmark::State& state) {
  const auto scheme = kAllSchemes[static_cast<std::size_t>(state.range(0))];
  const AnnotatedRecord rec = make_record();
  const SymbolTable table = build_symbol_table({rec}, scheme);
  const auto symbols = encode(rec, scheme, table);
  for (auto _ : state) {
    auto decoded = decode(symbols, scheme, table, DecodeMode::strict);
    benchmark::DoNotOptimize(decoded.words.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(symbols.size()));
}

// Repair mode sees network output, which can break the grammar anywhere;
// feed it a stream with every third tag dropped.
void BM_DecodeRepair(benchmark::State& state) {
  const auto scheme = kAllSchemes[static_cast<std::size_t>(state.range(0))];
  const AnnotatedRecord rec = make_record();
  const SymbolTable table = build_symbol_table({rec}, scheme);
  const auto symbols = encode(rec, scheme, table);
  std::vector<int> broken;
  int tag_seen = 0;
  for (int s : symbols) {
    if (table.is_tag(s) && ++tag_seen % 3 == 0) continue;
    broken.push_back(s);
  }
  for (auto _ : state) {
    auto decoded = decode(broken, scheme, table, DecodeMode::repair);
    benchmark::DoNotOptimize(decoded.words.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(broken.size()));
}

void BM_BuildTable(benchmark::State& state) {
  const AnnotatedRecord rec = make_record();
  CodecOptions options;
  options.closed_world = true;
  for (auto _ : state) {
    auto table = build_symbol_table({rec}, TagScheme::combined, options);
    benchmark::DoNotOptimize(table.size());
  }
}

}  // namespace

// 0..3 index kAllSchemes: open_close, single_separate, change_of_person,
// combined.
BENCHMARK(BM_Encode)->DenseRange(0, 3);
BENCHMARK(BM_DecodeStrict)->DenseRange(0, 3);
BENCHMARK(BM_DecodeRepair)->DenseRange(0, 3);
BENCHMARK(BM_BuildTable);
