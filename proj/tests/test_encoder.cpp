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

#include <random>

#include <gtest/gtest.h>

#include "xtrd/encoder.hpp"
#include "xtrd/frontend.hpp"

namespace xtrd {
namespace {

template <typename T>
Tensor<T> random_frames(std::size_t t, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor<T> x({t, d});
  for (auto& v : x.storage()) v = T(nd(rng));
  return x;
}

template <typename T>
ParameterStore<T> random_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  ParameterStore<T> ps;
  std::mt19937_64 rng(seed);
  init_encoder(ps, cfg, rng);
  // Non-trivial norms and biases so every parameter matters.
  std::normal_distribution<double> nd(0.0, 0.2);
  for (auto& [name, t] : ps.all())
    if (t.rank() == 1)
      for (auto& v : t.storage()) v += T(nd(rng));
  return ps;
}

template <typename T>
Tensor<T> stream_all(const ParameterStore<T>& ps, const EncoderConfig& cfg, const MaskSpec& spec,
                     const Tensor<T>& x) {
  auto st = encoder_open_stream<T>(cfg, spec);
  std::vector<Tensor<T>> outs;
  for (std::size_t s = 0; s < x.dim(0); s += spec.chunk_frames) {
    const std::size_t n = std::min(spec.chunk_frames, x.dim(0) - s);
    outs.push_back(encoder_push_chunk(st, ps, kernels::slice_rows(x, s, n)));
  }
  EXPECT_EQ(st.frames_emitted, x.dim(0));
  return kernels::concat_rows<T>(outs);
}

TEST(Encoder, NoLayersIsInputPlusPositions) {
  EncoderConfig cfg;
  cfg.n_layers = 0;
  std::mt19937_64 rng(1);
  auto x = random_frames<double>(7, cfg.d_model, rng);
  auto y = encode_offline(ParameterStore<double>(), cfg, x, MaskSpec::full_attention(7));
  EXPECT_EQ(y, kernels::add(x, positional_encoding<double>(0, 7, cfg.d_model)));
}

TEST(Encoder, FullAttentionMatchesUnmaskedForward) {
  EncoderConfig cfg;
  auto ps = random_encoder<double>(cfg, 2);
  std::mt19937_64 rng(2);
  auto x = random_frames<double>(9, cfg.d_model, rng);
  auto masked = encode_offline(ps, cfg, x, MaskSpec::full_attention(9));
  // Same stack with plain softmax attention.
  Graph<double> g(false);
  Binder<double> p(g, ps);
  Var<double> h = ag::add(g.constant(x), g.constant(positional_encoding<double>(0, 9, cfg.d_model)));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = layer_prefix(l);
    Var<double> a = ag::layer_norm(h, p(pre + "ln1.gain"), p(pre + "ln1.bias"));
    Var<double> q = ag::linear(a, p(pre + "attn.wq"), p(pre + "attn.bq"));
    Var<double> k = ag::linear(a, p(pre + "attn.wk"), p(pre + "attn.bk"));
    Var<double> v = ag::linear(a, p(pre + "attn.wv"), p(pre + "attn.bv"));
    const std::size_t dh = cfg.d_model / cfg.n_heads;
    std::vector<Var<double>> heads;
    for (std::size_t hd = 0; hd < cfg.n_heads; ++hd) {
      auto s = ag::scale(ag::matmul(ag::slice_cols(q, hd * dh, dh), ag::transpose(ag::slice_cols(k, hd * dh, dh))),
                         1.0 / std::sqrt(double(dh)));
      heads.push_back(ag::matmul(ag::softmax(s), ag::slice_cols(v, hd * dh, dh)));
    }
    h = ag::add(h, ag::linear(ag::concat_cols(heads), p(pre + "attn.wo"), p(pre + "attn.bo")));
    Var<double> b = ag::layer_norm(h, p(pre + "ln2.gain"), p(pre + "ln2.bias"));
    h = ag::add(h, ag::linear(ag::gelu(ag::linear(b, p(pre + "ffn.w1"), p(pre + "ffn.b1"))), p(pre + "ffn.w2"),
                              p(pre + "ffn.b2")));
  }
  EXPECT_EQ(masked, h.value());
}

TEST(Encoder, OpenStream) {
  EncoderConfig cfg;
  auto st = encoder_open_stream<float>(cfg, {4, LeftContext::chunks(0), 0, 1});
  EXPECT_EQ(st.frames_emitted, 0u);
  EXPECT_EQ(st.cached_frames(), 0u);
}

TEST(Encoder, SinglePushEqualsOfflineBitwise) {
  EncoderConfig cfg;
  auto ps = random_encoder<float>(cfg, 3);
  std::mt19937_64 rng(3);
  auto x = random_frames<float>(11, cfg.d_model, rng);
  auto st = encoder_open_stream<float>(cfg, {16, LeftContext::full(), 0, 1});
  EXPECT_EQ(encoder_push_chunk(st, ps, x), encode_offline(ps, cfg, x, MaskSpec::full_attention(11)));
}

TEST(Encoder, TwoPushesNoContextAreIndependent) {
  EncoderConfig cfg;
  auto ps = random_encoder<double>(cfg, 4);
  std::mt19937_64 rng(4);
  auto x = random_frames<double>(8, cfg.d_model, rng);
  auto st = encoder_open_stream<double>(cfg, {4, LeftContext::chunks(0), 0, 1});
  auto y0 = encoder_push_chunk(st, ps, kernels::slice_rows(x, 0, 4));
  auto y1 = encoder_push_chunk(st, ps, kernels::slice_rows(x, 4, 4));
  EXPECT_EQ(y0, encode_offline(ps, cfg, kernels::slice_rows(x, 0, 4), MaskSpec::full_attention(4)));
  // Second chunk alone, shifted so its positional encoding matches frames 4..7.
  auto shifted = kernels::add(kernels::slice_rows(x, 4, 4),
                              kernels::add(positional_encoding<double>(4, 4, cfg.d_model),
                                           kernels::scale(positional_encoding<double>(0, 4, cfg.d_model), -1.0)));
  EXPECT_LE(max_abs_diff(y1, encode_offline(ps, cfg, shifted, MaskSpec::full_attention(4))), 1e-12);
}

TEST(Encoder, StreamingEqualsOfflineC4L1) {
  EncoderConfig cfg;
  auto ps = random_encoder<float>(cfg, 5);
  std::mt19937_64 rng(5);
  auto x = random_frames<float>(23, cfg.d_model, rng);
  MaskSpec spec{4, LeftContext::chunks(1), 0, 23};
  EXPECT_LE(max_abs_diff(stream_all(ps, cfg, spec, x), encode_offline(ps, cfg, x, spec)), 1e-5f);
}

TEST(Encoder, StreamingEqualsOfflineGrid) {
  EncoderConfig cfg;
  auto ps32 = random_encoder<float>(cfg, 6);
  auto ps64 = random_encoder<double>(cfg, 6);
  std::mt19937_64 rng(6);
  for (std::size_t c : {1, 2, 4, 16})
    for (auto l : {LeftContext::chunks(0), LeftContext::chunks(1), LeftContext::chunks(2), LeftContext::full()})
      for (std::size_t s : {0, 1, 4, 16}) {
        const std::size_t t = 37;
        MaskSpec spec{c, l, s, t};
        auto x = random_frames<double>(t, cfg.d_model, rng);
        auto xf = x.cast<float>();
        EXPECT_LE(max_abs_diff(stream_all(ps32, cfg, spec, xf), encode_offline(ps32, cfg, xf, spec)), 1e-5f);
        EXPECT_LE(max_abs_diff(stream_all(ps64, cfg, spec, x), encode_offline(ps64, cfg, x, spec)), 1e-10);
      }
}

TEST(Encoder, CacheBound) {
  EncoderConfig cfg;
  auto ps = random_encoder<float>(cfg, 7);
  std::mt19937_64 rng(7);
  for (std::size_t l : {0, 1, 2, 3})
    for (std::size_t s : {0, 3}) {
      MaskSpec spec{4, LeftContext::chunks(l), s, 1};
      auto st = encoder_open_stream<float>(cfg, spec);
      for (int n = 0; n < 8; ++n) {
        encoder_push_chunk(st, ps, random_frames<float>(4, cfg.d_model, rng));
        for (const auto& lc : st.layers) {
          EXPECT_LE(lc.retained_frames(), l * 4);
          EXPECT_LE(lc.sink_k.size(), s);
        }
        EXPECT_EQ(st.frames_emitted, std::size_t(4 * (n + 1)));
      }
    }
  auto full = encoder_open_stream<float>(cfg, {4, LeftContext::full(), 0, 1});
  for (int n = 0; n < 5; ++n) encoder_push_chunk(full, ps, random_frames<float>(4, cfg.d_model, rng));
  EXPECT_EQ(full.cached_frames(), 20u);
}

TEST(Encoder, PushErrors) {
  EncoderConfig cfg;
  auto ps = random_encoder<float>(cfg, 8);
  std::mt19937_64 rng(8);
  auto st = encoder_open_stream<float>(cfg, {4, LeftContext::chunks(1), 0, 1});
  EXPECT_THROW(encoder_push_chunk(st, ps, random_frames<float>(5, cfg.d_model, rng)), Error);
  encoder_push_chunk(st, ps, random_frames<float>(3, cfg.d_model, rng));
  EXPECT_THROW(encoder_push_chunk(st, ps, random_frames<float>(4, cfg.d_model, rng)), Error);
  auto st2 = encoder_open_stream<float>(cfg, {4, LeftContext::chunks(1), 0, 1});
  encoder_close_stream(st2);
  EXPECT_THROW(encoder_push_chunk(st2, ps, random_frames<float>(4, cfg.d_model, rng)), Error);
}

FrontEndConfig small_frontend() {
  FrontEndConfig f;
  f.hidden = 16;
  f.d_model = 8;
  return f;
}

TEST(FrontEnd, Examples) {
  auto cfg = small_frontend();
  ParameterStore<double> ps;
  std::mt19937_64 rng(9);
  init_frontend(ps, cfg, rng);
  std::vector<float> zeros(960, 0.0f);
  auto y = frontend_chunk(ps, zeros, cfg);
  ASSERT_EQ(y.dim(0), 3u);
  for (std::size_t r = 1; r < 3; ++r)
    for (std::size_t j = 0; j < cfg.d_model; ++j) EXPECT_EQ(y.at(r, j), y.at(0, j));
  EXPECT_EQ(frontend_chunk(ps, std::vector<float>(640, 0.1f), cfg).dim(0), 2u);
  EXPECT_THROW(frontend_chunk(ps, std::vector<float>{}, cfg), Error);
  EXPECT_THROW(frontend_chunk(ps, std::vector<float>(100, 0.0f), cfg), Error);
}

TEST(FrontEnd, ChunkLocality) {
  auto cfg = small_frontend();
  ParameterStore<double> ps;
  std::mt19937_64 rng(10);
  init_frontend(ps, cfg, rng);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> wave(320 * 4 * 3 + 100);
  for (auto& v : wave) v = u(rng);
  auto run = [&](const std::vector<float>& w) {
    Graph<double> g(false);
    Binder<double> p(g, ps);
    return frontend_utterance(p, w, 4, cfg).value();
  };
  auto base = run(wave);
  ASSERT_EQ(base.dim(0), 13u);
  for (std::size_t k = 0; k < 4; ++k) {
    auto w = wave;
    for (std::size_t i = k * 1280; i < std::min(w.size(), (k + 1) * 1280); ++i) w[i] += 0.5f;
    auto out = run(w);
    for (std::size_t f = 0; f < 13; ++f) {
      bool same = true;
      for (std::size_t j = 0; j < cfg.d_model; ++j) same = same && out.at(f, j) == base.at(f, j);
      EXPECT_EQ(same, f / 4 != k) << "frame " << f << " chunk " << k;
    }
  }
}

}  // namespace
}  // namespace xtrd
