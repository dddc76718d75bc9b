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

#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "xtrd/eval.hpp"
#include "xtrd/search.hpp"

namespace xtrd {
namespace {

ModelConfig tiny_config(std::size_t vocab = 3, InputKind input = InputKind::kFeatures) {
  ModelConfig c;
  c.input = input;
  c.feature_dim = 3;
  c.frontend_hidden = 8;
  c.encoder.n_layers = 1;
  c.encoder.n_heads = 2;
  c.encoder.d_model = 8;
  c.encoder.d_ffn = 16;
  c.embed_dim = 6;
  c.context = 2;
  c.joiner_dim = 8;
  c.vocab_size = vocab;
  return c;
}

TransducerModel<double> random_model(std::uint64_t seed, std::size_t vocab = 3,
                                     InputKind input = InputKind::kFeatures) {
  auto m = TransducerModel<double>::create(tiny_config(vocab, input), seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (auto& v : m.params().get("joiner.out_b").storage()) v = nd(rng);
  for (auto& v : m.params().get("joiner.out_w").storage()) v *= 3.0;
  return m;
}

Tensor<double> random_enc(std::size_t t, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor<double> x({t, d});
  for (auto& v : x.storage()) v = nd(rng);
  return x;
}

Utterance random_utt(std::size_t t, std::size_t d, std::mt19937_64& rng) {
  Utterance u;
  u.id = "u";
  u.features = random_enc(t, d, rng).cast<float>();
  return u;
}

TEST(Greedy, AlwaysBlankModelEmitsNothing) {
  auto m = random_model(1);
  m.params().get("joiner.out_w").fill(0.0);
  m.params().get("joiner.out_b")[0] = 50.0;
  std::mt19937_64 rng(1);
  EXPECT_TRUE(greedy_decode(m, random_enc(10, 8, rng)).empty());
  EXPECT_TRUE(beam_search(m, random_enc(10, 8, rng), DecodeConfig{}).front().tokens.empty());
}

TEST(Greedy, EmptyInput) {
  auto m = random_model(2);
  EXPECT_TRUE(greedy_decode(m, Tensor<double>()).empty());
  auto nb = beam_search(m, Tensor<double>(), DecodeConfig{});
  ASSERT_EQ(nb.size(), 1u);
  EXPECT_TRUE(nb[0].tokens.empty());
  EXPECT_EQ(nb[0].log_prob, 0.0);
}

TEST(Greedy, SymbolCapBoundsOutput) {
  auto m = random_model(3);
  m.params().get("joiner.out_w").fill(0.0);
  m.params().get("joiner.out_b")[1] = 50.0;  // never blank
  std::mt19937_64 rng(3);
  EXPECT_EQ(greedy_decode(m, random_enc(5, 8, rng), 3).size(), 15u);
  DecodeConfig cfg;
  cfg.max_symbols_per_frame = 3;
  EXPECT_EQ(beam_search(m, random_enc(5, 8, rng), cfg).front().tokens.size(), 15u);
}

TEST(Beam, WidthOneEqualsGreedy) {
  std::mt19937_64 rng(4);
  std::size_t nonempty = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto m = random_model(100 + seed, 4);
    auto enc = random_enc(12, 8, rng);
    DecodeConfig cfg;
    cfg.beam_width = 1;
    cfg.max_symbols_per_frame = 3;
    const auto greedy = greedy_decode(m, enc, 3);
    EXPECT_EQ(beam_search(m, enc, cfg).front().tokens, greedy) << seed;
    nonempty += greedy.empty() ? 0 : 1;
  }
  EXPECT_GT(nonempty, 25u);
}

// Exhaustive enumeration of every path the frame-synchronous search can take:
// per frame up to `cap` emissions, then a blank unless the cap was reached.
void enumerate(const TransducerModel<double>& m, const Tensor<double>& enc, std::size_t cap, std::size_t t,
               std::size_t emitted, std::vector<int>& prefix, double score,
               std::map<std::vector<int>, double>& out) {
  if (t == enc.dim(0)) {
    auto [it, fresh] = out.emplace(prefix, score);
    if (!fresh) it->second = kernels::log_add_exp(it->second, score);
    return;
  }
  if (emitted == cap) {
    enumerate(m, enc, cap, t + 1, 0, prefix, score, out);
    return;
  }
  const auto& ps = m.params();
  auto pred = predictor_step(ps, m.config().predictor(), context_of(prefix, m.config().context));
  auto lp = joiner_log_probs(ps, joiner_project_encoder(ps, kernels::slice_rows(enc, t, 1)),
                             joiner_project_predictor(ps, pred));
  enumerate(m, enc, cap, t + 1, 0, prefix, score + lp[0], out);
  for (std::size_t k = 1; k < lp.numel(); ++k) {
    prefix.push_back(int(k));
    enumerate(m, enc, cap, t, emitted + 1, prefix, score + lp[k], out);
    prefix.pop_back();
  }
}

TEST(Beam, ExhaustiveOracle) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = random_model(200 + seed, 3);
    auto enc = random_enc(3, 8, rng);
    std::map<std::vector<int>, double> exact;
    std::vector<int> prefix;
    enumerate(m, enc, 2, 0, 0, prefix, 0.0, exact);
    auto best = std::max_element(exact.begin(), exact.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });

    DecodeConfig wide;
    wide.beam_width = 100000;
    wide.max_symbols_per_frame = 2;
    auto nb = beam_search(m, enc, wide);
    EXPECT_EQ(nb.size(), exact.size());
    EXPECT_EQ(nb.front().tokens, best->first);
    EXPECT_NEAR(nb.front().log_prob, best->second, 1e-9);
    for (const auto& h : nb) EXPECT_NEAR(h.log_prob, exact.at(h.tokens), 1e-9);

    DecodeConfig narrow = wide;
    narrow.beam_width = 4;
    auto nb4 = beam_search(m, enc, narrow);
    EXPECT_LE(nb4.size(), 4u);
    for (std::size_t i = 1; i < nb4.size(); ++i) EXPECT_GE(nb4[i - 1].log_prob, nb4[i].log_prob);
    // Retained scores never exceed the exact marginal of their sequence.
    for (const auto& h : nb4) EXPECT_LE(h.log_prob, exact.at(h.tokens) + 1e-9);
    EXPECT_LE(nb4.front().log_prob, best->second + 1e-9);
  }
}

TEST(Beam, MergesIdenticalSequences) {
  std::mt19937_64 rng(6);
  auto m = random_model(6, 3);
  DecodeConfig cfg;
  cfg.beam_width = 16;
  auto nb = beam_search(m, random_enc(6, 8, rng), cfg);
  std::set<std::vector<int>> seen;
  for (const auto& h : nb) EXPECT_TRUE(seen.insert(h.tokens).second);
}

TEST(Session, EmptyStream) {
  auto m = random_model(7);
  DecodeConfig cfg;
  cfg.mask = {4, LeftContext::chunks(1), 0, 1};
  auto s = stream_open(m, cfg);
  EXPECT_EQ(s.frames_emitted(), 0u);
  auto r = s.finalize();
  EXPECT_TRUE(r.best.tokens.empty());
  EXPECT_THROW(s.finalize(), Error);
  std::mt19937_64 rng(7);
  EXPECT_THROW(s.push_features(random_utt(4, 3, rng).features), Error);
}

TEST(Session, IndependentIdenticalSessions) {
  auto m = random_model(8);
  DecodeConfig cfg;
  cfg.mask = {4, LeftContext::chunks(1), 2, 1};
  std::mt19937_64 rng(8);
  auto u = random_utt(19, 3, rng);
  auto a = stream_open(m, cfg), b = stream_open(m, cfg);
  a.push_features(u.features);
  b.push_features(u.features);
  auto ra = a.finalize(), rb = b.finalize();
  EXPECT_EQ(ra.best.tokens, rb.best.tokens);
  EXPECT_EQ(ra.best.log_prob, rb.best.log_prob);
}

TEST(Session, StreamingEqualsOfflineOnGrid) {
  std::mt19937_64 rng(9);
  auto m = random_model(9, 4);
  for (std::size_t c : std::vector<std::size_t>{1, 2, 4, 16, kFullAttentionChunk})
    for (auto l : {LeftContext::chunks(0), LeftContext::chunks(1), LeftContext::full()})
      for (std::size_t s : {0, 4}) {
        DecodeConfig cfg;
        cfg.mask = {c, l, s, 1};
        auto u = random_utt(21, 3, rng);
        auto off = decode_offline(m, u, cfg);
        auto sess = stream_open(m, cfg);
        sess.push_features(u.features);
        auto r = sess.finalize();
        EXPECT_EQ(r.best.tokens, off.front().tokens);
        EXPECT_NEAR(r.best.log_prob, off.front().log_prob, 1e-9);
        EXPECT_EQ(r.frames, 21u);
        // Per-chunk accounting agrees with the mask geometry.
        const MaskSpec spec = cfg.mask.with_total(21);
        ASSERT_EQ(r.chunks.size(), spec.num_chunks());
        for (std::size_t n = 0; n < r.chunks.size(); ++n) {
          EXPECT_EQ(r.chunks[n].attended_keys, attended_count(spec, n));
          EXPECT_EQ(r.chunks[n].cached_frames, cached_frames_before(spec, n));
        }
        auto cost = cost_report(cfg.mask, 21);
        std::size_t total = 0;
        for (const auto& ch : r.chunks) total += ch.attended_keys;
        EXPECT_EQ(total, cost.total_attended_keys);
      }
}

TEST(Session, PushGranularityInvariance) {
  std::mt19937_64 rng(10);
  auto m = random_model(10, 4);
  DecodeConfig cfg;
  cfg.mask = {4, LeftContext::chunks(1), 1, 1};
  auto u = random_utt(30, 3, rng);
  auto run = [&](std::vector<std::size_t> pieces) {
    auto s = stream_open(m, cfg);
    std::size_t off = 0;
    for (std::size_t p : pieces) {
      p = std::min(p, 30 - off);
      if (p == 0) break;
      s.push_features(kernels::slice_rows(u.features, off, p));
      off += p;
    }
    if (off < 30) s.push_features(kernels::slice_rows(u.features, off, 30 - off));
    return s.finalize();
  };
  auto whole = run({30});
  auto ones = run(std::vector<std::size_t>(30, 1));
  auto odd = run({3, 7, 1, 5, 9});
  EXPECT_EQ(whole.best.tokens, ones.best.tokens);
  EXPECT_EQ(whole.best.log_prob, ones.best.log_prob);
  EXPECT_EQ(whole.best.tokens, odd.best.tokens);
  EXPECT_EQ(whole.best.log_prob, odd.best.log_prob);
}

TEST(Session, AudioStreamingMatchesOfflineAndFlushesTail) {
  auto m = random_model(11, 4, InputKind::kAudio);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> ud(-0.5f, 0.5f);
  Utterance u;
  u.id = "a";
  u.samples.resize(320 * 10 + 100);  // 10 whole hops plus a 100-sample tail
  for (auto& v : u.samples) v = ud(rng);
  for (std::size_t c : std::vector<std::size_t>{2, 4, kFullAttentionChunk}) {
    DecodeConfig cfg;
    cfg.mask = {c, LeftContext::chunks(1), 2, 1};
    auto off = decode_offline(m, u, cfg);
    auto run = [&](std::size_t piece) {
      auto s = stream_open(m, cfg);
      for (std::size_t i = 0; i < u.samples.size(); i += piece)
        s.push_samples(std::span<const float>(u.samples).subspan(i, std::min(piece, u.samples.size() - i)));
      return s.finalize();
    };
    auto small = run(5120), big = run(40960), odd = run(777);
    EXPECT_EQ(small.frames, 11u);
    EXPECT_EQ(small.best.tokens, off.front().tokens);
    EXPECT_EQ(big.best.tokens, off.front().tokens);
    EXPECT_EQ(odd.best.tokens, off.front().tokens);
    EXPECT_EQ(small.best.log_prob, big.best.log_prob);
  }
}

TEST(Session, FinalizeWithoutRemainderKeepsLastState) {
  auto m = random_model(12, 4);
  DecodeConfig cfg;
  cfg.mask = {4, LeftContext::chunks(1), 0, 1};
  std::mt19937_64 rng(12);
  auto u = random_utt(8, 3, rng);
  auto s = stream_open(m, cfg);
  auto partial = s.push_features(u.features);
  auto r = s.finalize();
  EXPECT_EQ(r.best.tokens, partial.tokens);
  EXPECT_EQ(r.best.log_prob, partial.log_prob);
  EXPECT_EQ(r.chunks.size(), 2u);
}

TEST(Session, WrongInputKind) {
  auto m = random_model(13);
  DecodeConfig cfg;
  cfg.mask = {4, LeftContext::chunks(1), 0, 1};
  auto s = stream_open(m, cfg);
  std::vector<float> wave(640, 0.0f);
  EXPECT_THROW(s.push_samples(wave), Error);
}

}  // namespace
}  // namespace xtrd
