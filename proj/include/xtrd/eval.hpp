/* Copyright 2026 The xtrd Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "xtrd/mask.hpp"

namespace xtrd {

using Words = std::vector<std::string>;

struct WerReport {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t n_ref_words = 0;
  double wer = 0.0;

  std::size_t errors() const { return substitutions + insertions + deletions; }
};

inline nlohmann::json to_json(const WerReport& r) {
  return {{"substitutions", r.substitutions},
          {"insertions", r.insertions},
          {"deletions", r.deletions},
          {"n_ref_words", r.n_ref_words},
          {"wer", r.wer}};
}

/// Lowercases and splits on whitespace.
inline Words normalize_words(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream iss(lower);
  Words out;
  for (std::string w; iss >> w;) out.push_back(w);
  return out;
}

/// Minimum-edit alignment of one pair. Among optimal alignments the backtrace
/// takes a substitution first, then an insertion, then a deletion.
inline WerReport align(const Words& ref, const Words& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1), d[i][j - 1] + 1, d[i - 1][j] + 1});

  WerReport r;
  r.n_ref_words = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const std::size_t cost = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      if (d[i][j] == d[i - 1][j - 1] + cost) {
        r.substitutions += cost;
        --i, --j;
        continue;
      }
    }
    if (j > 0 && d[i][j] == d[i][j - 1] + 1) {
      ++r.insertions;
      --j;
    } else {
      ++r.deletions;
      --i;
    }
  }
  r.wer = n ? double(r.errors()) / double(n) : double(r.errors());
  return r;
}

/// Corpus WER: errors and reference words are pooled before dividing. An
/// empty reference corpus divides by one.
inline WerReport wer(const std::vector<Words>& refs, const std::vector<Words>& hyps) {
  if (refs.size() != hyps.size())
    throw Error("wer: " + std::to_string(refs.size()) + " references but " + std::to_string(hyps.size()) +
                " hypotheses");
  WerReport total;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const WerReport r = align(refs[k], hyps[k]);
    total.substitutions += r.substitutions;
    total.insertions += r.insertions;
    total.deletions += r.deletions;
    total.n_ref_words += r.n_ref_words;
  }
  total.wer = double(total.errors()) / double(std::max<std::size_t>(total.n_ref_words, 1));
  return total;
}

inline WerReport wer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
  std::vector<Words> r, h;
  for (const auto& s : refs) r.push_back(normalize_words(s));
  for (const auto& s : hyps) h.push_back(normalize_words(s));
  return wer(r, h);
}

inline constexpr double kFrameHopMs = 20.0;

inline double frames_to_ms(std::size_t frames, double hop_ms = kFrameHopMs) {
  return double(frames) * hop_ms;
}

struct CostReport {
  std::vector<std::size_t> attended_keys;  // per chunk, shared by its queries
  std::vector<std::size_t> chunk_frames;   // per chunk, queries
  std::size_t total_attended_keys = 0;     // sum over chunks
  std::size_t total_query_key_pairs = 0;   // sum of queries x keys
  std::size_t peak_cache_frames = 0;
  double chunk_duration_ms = 0.0;

  std::size_t steady_state_keys() const {
    return attended_keys.empty() ? 0 : *std::max_element(attended_keys.begin(), attended_keys.end());
  }
};

inline nlohmann::json to_json(const CostReport& c) {
  return {{"attended_keys", c.attended_keys},
          {"chunk_frames", c.chunk_frames},
          {"total_attended_keys", c.total_attended_keys},
          {"total_query_key_pairs", c.total_query_key_pairs},
          {"peak_cache_frames", c.peak_cache_frames},
          {"chunk_duration_ms", c.chunk_duration_ms}};
}

inline CostReport cost_report(MaskSpec spec, std::size_t total_frames) {
  spec.total_frames = total_frames;
  spec.validate();
  CostReport r;
  for (std::size_t n = 0; n < spec.num_chunks(); ++n) {
    const std::size_t keys = attended_count(spec, n);
    const std::size_t q = std::min(total_frames, (n + 1) * spec.chunk_frames) - n * spec.chunk_frames;
    r.attended_keys.push_back(keys);
    r.chunk_frames.push_back(q);
    r.total_attended_keys += keys;
    r.total_query_key_pairs += keys * q;
    r.peak_cache_frames = std::max(r.peak_cache_frames, cached_frames_before(spec, n));
  }
  r.chunk_duration_ms = frames_to_ms(std::min(spec.chunk_frames, total_frames));
  return r;
}

}  // namespace xtrd
