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

// xtrd command-line tool: synthetic data, training, decoding, mask inspection
// and WER scoring. Exit codes: 0 ok, 1 runtime failure, 2 usage or config.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "xtrd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xtrd;

namespace {

/// Bad invocation that CLI11 cannot catch on its own (missing input files).
class UsageError : public Error {
 public:
  using Error::Error;
};

bool verbose() {
  const char* v = std::getenv("XTRD_VERBOSE");
  return v && *v && std::string(v) != "0";
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

std::size_t parse_chunk(const std::string& s) {
  if (s == "full" || s == "inf") return kFullAttentionChunk;
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || ptr != s.data() + s.size() || n == 0)
    throw UsageError("chunk size must be a positive integer or 'full', got '" + s + "'");
  return n;
}

LeftContext parse_left(const std::string& s) {
  try {
    return LeftContext::parse(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

json mask_json(const MaskSpec& m) {
  return {{"chunk_frames", detail::chunk_json(m.chunk_frames)},
          {"left_context", detail::left_json(m.left_context)},
          {"sink_frames", m.sink_frames}};
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

// ---------------------------------------------------------------- synth-data

struct SynthArgs {
  std::string config, out;
  std::size_t n_utts = 100;
  std::optional<std::uint64_t> seed;
};

int cmd_synth_data(const SynthArgs& a) {
  require_file(a.config, "config");
  const RunConfig cfg = load_run_config(a.config);
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  const bool audio = cfg.model.input == InputKind::kAudio;
  const auto data = gen_synthetic(cfg.data, a.n_utts, seed, audio);
  const auto manifest = write_dataset(a.out, data, Vocab::synthetic(cfg.data.vocab_size));
  auto info = open_out(fs::path(a.out) / "dataset.json");
  info << json{{"config", to_json(cfg)}, {"seed", seed}, {"n_utts", a.n_utts}, {"audio", audio}}.dump(2) << "\n";
  std::cout << json{{"manifest", manifest.string()}, {"n_utts", data.size()}, {"seed", seed}}.dump() << "\n";
  return 0;
}

// --------------------------------------------------------------------- train

struct TrainArgs {
  std::string config, data, dev, out, resume;
};

bool same_model(const RunConfig& a, const RunConfig& b) {
  return to_json(a).at("model") == to_json(b).at("model") && a.seed == b.seed;
}

int cmd_train(const TrainArgs& a) {
  require_file(a.config, "config");
  require_file(a.data, "manifest");
  if (!a.dev.empty()) require_file(a.dev, "dev manifest");
  const RunConfig cfg = load_run_config(a.config);
  const Vocab vocab = Vocab::synthetic(cfg.data.vocab_size);
  const auto train = load_dataset(a.data, vocab, true);
  const auto dev = a.dev.empty() ? train : load_dataset(a.dev, vocab, true);

  auto model = TransducerModel<float>::create(cfg.model, sub_stream(cfg.seed, kStreamInit)());
  Trainer<float> trainer(model, cfg.train, cfg.seed);
  double best = std::numeric_limits<double>::infinity();
  if (!a.resume.empty()) {
    require_file(a.resume, "checkpoint");
    auto ck = load_checkpoint<float>(a.resume);
    if (!same_model(ck.config, cfg)) throw ConfigError("checkpoint model or seed differs from --config");
    load_params_into(model, ck.params);
    trainer.state() = ck.trainer;
    best = ck.extra.value("best_dev_nll", best);
  }

  // Dev nll uses the decode geometry from the config.
  const MaskSpec dev_mask = cfg.decode.mask;
  const fs::path out(a.out);
  fs::create_directories(out);
  std::ofstream log(out / "metrics.jsonl", a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (a.resume.empty()) log << json{{"config", to_json(cfg)}}.dump() << "\n";

  while (trainer.state().epoch < cfg.train.epochs) {
    const EpochMetrics em = trainer.train_epoch(train);
    const double dev_nll = mean_nll(model, dev, dev_mask);
    json chunks = json::array();
    for (auto c : em.chunk_sizes_used) chunks.push_back(detail::chunk_json(c));
    json line{{"epoch", em.epoch},
              {"mean_nll", em.mean_nll},
              {"dev_nll", dev_nll},
              {"lr_final", em.lr_trace.empty() ? 0.0 : em.lr_trace.back()},
              {"steps", em.steps},
              {"skipped_steps", em.skipped_steps},
              {"chunk_sizes_used", chunks}};
    const bool improved = dev_nll < best;
    if (improved) best = dev_nll;
    const json extra{{"epoch", em.epoch}, {"dev_nll", dev_nll}, {"best_dev_nll", best}};
    save_checkpoint(out / "last.xtrd", model, trainer.state(), cfg, extra);
    if (improved) save_checkpoint(out / "best.xtrd", model, trainer.state(), cfg, extra);
    line["best"] = improved;
    log << line.dump() << "\n" << std::flush;
    std::cout << line.dump() << "\n" << std::flush;
  }
  return 0;
}

// -------------------------------------------------------------------- decode

struct DecodeArgs {
  std::string ckpt, data, out, mode = "offline";
  std::optional<std::string> chunk_frames, left_context;
  std::optional<std::size_t> sink_frames, beam, max_symbols;
  bool full_attention = false, timing = false;
};

json hypothesis_json(const Hypothesis& h, const Vocab& vocab) {
  return {{"text", vocab.decode(h.tokens)}, {"tokens", h.tokens}, {"log_prob", h.log_prob}};
}

int cmd_decode(const DecodeArgs& a) {
  require_file(a.ckpt, "checkpoint");
  require_file(a.data, "manifest");
  if (a.mode != "offline" && a.mode != "streaming") throw UsageError("--mode must be offline or streaming");
  const auto ck = load_checkpoint<float>(a.ckpt);
  const auto model = model_from_checkpoint(ck);
  const Vocab vocab = model.vocab();

  DecodeConfig dc = ck.config.decode;
  if (a.chunk_frames) dc.mask.chunk_frames = parse_chunk(*a.chunk_frames);
  if (a.left_context) dc.mask.left_context = parse_left(*a.left_context);
  if (a.sink_frames) dc.mask.sink_frames = *a.sink_frames;
  if (a.beam) dc.beam_width = *a.beam;
  if (a.max_symbols) dc.max_symbols_per_frame = *a.max_symbols;
  if (a.full_attention) {
    if (a.mode == "streaming") throw UsageError("--full-attention is an offline decode");
    dc.mask = MaskSpec{};
  }
  try {
    dc.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const auto data = load_dataset(a.data, vocab, false);
  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;

  RunConfig embedded = ck.config;
  embedded.decode = dc;
  out << json{{"config", to_json(embedded)}, {"mode", a.mode}, {"checkpoint", a.ckpt}}.dump() << "\n";

  std::vector<Words> refs, hyps;
  bool have_refs = true;
  for (const auto& u : data) {
    const std::size_t frames = model.num_frames(u);
    const CostReport cost = cost_report(dc.mask, std::max<std::size_t>(frames, 1));
    json rec{{"utterance_id", u.id}, {"frames", frames}};
    Hypothesis best;
    if (a.mode == "offline") {
      const auto t0 = std::chrono::steady_clock::now();
      best = decode_offline(model, u, dc).front();
      if (a.timing)
        rec["elapsed_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      rec["attended_keys_total"] = frames ? cost.total_attended_keys : 0;
      rec["chunks"] = cost.attended_keys.size();
    } else {
      auto session = stream_open(model, dc);
      if (u.is_audio())
        session.push_samples(u.samples);
      else if (!u.features.empty())
        session.push_features(u.features);
      const StreamResult r = session.finalize();
      best = r.best;
      json chunks = json::array();
      std::size_t total = 0;
      for (const auto& c : r.chunks) {
        json cj{{"index", c.index}, {"frames", c.frames}, {"attended_keys", c.attended_keys},
                {"cached_frames", c.cached_frames}};
        if (a.timing) cj["elapsed_ms"] = c.elapsed_ms;
        chunks.push_back(cj);
        total += c.attended_keys;
      }
      rec["chunks"] = chunks;
      rec["attended_keys_total"] = total;
    }
    const json h = hypothesis_json(best, vocab);
    rec["text"] = h["text"];
    rec["tokens"] = h["tokens"];
    rec["log_prob"] = h["log_prob"];
    rec["cost"] = to_json(cost);
    if (!u.tokens.empty()) {
      rec["ref"] = vocab.decode(u.tokens);
      refs.push_back(normalize_words(rec["ref"]));
      hyps.push_back(normalize_words(rec["text"]));
    } else {
      have_refs = false;
    }
    out << rec.dump() << "\n";
    if (verbose()) std::cerr << u.id << ": " << rec["text"].get<std::string>() << "\n";
  }
  json summary{{"n_utts", data.size()}, {"mask", mask_json(dc.mask)}};
  if (have_refs && !data.empty()) summary["wer"] = to_json(wer(refs, hyps));
  out << json{{"summary", summary}}.dump() << "\n";
  return 0;
}

// -------------------------------------------------------------- inspect-mask

struct MaskArgs {
  std::string chunk_frames = "16", left_context = "full";
  std::size_t sink_frames = 0, frames = 64;
  bool no_grid = false;
};

constexpr std::size_t kMaxGridFrames = 512;

int cmd_inspect_mask(const MaskArgs& a) {
  if (a.frames < 1) throw UsageError("--frames must be >= 1");
  MaskSpec spec{parse_chunk(a.chunk_frames), parse_left(a.left_context), a.sink_frames, a.frames};
  const BoolMask m = build_mask(spec);
  for (std::size_t i = 0; i < a.frames; ++i)
    for (std::size_t j = 0; j < a.frames; ++j)
      if (m(i, j) != allowed(spec, i, j))
        throw Error("mask disagrees with allowed() at (" + std::to_string(i) + ", " + std::to_string(j) + ")");

  if (!a.no_grid && a.frames <= kMaxGridFrames) {
    for (std::size_t i = 0; i < a.frames; ++i) {
      std::string row(a.frames, '.');
      for (std::size_t j = 0; j < a.frames; ++j)
        if (m(i, j)) row[j] = '#';
      std::cout << row << "\n";
    }
  }
  json counts = json::array();
  for (std::size_t n = 0; n < spec.num_chunks(); ++n) {
    const auto r = detail::chunk_key_range(spec, n);
    counts.push_back(json{{"chunk", n},
                      {"attended_count", attended_count(spec, n)},
                      {"keys_begin", r.begin},
                      {"keys_end", r.end},
                      {"cached_frames", cached_frames_before(spec, n)}});
  }
  std::cout << json{{"mask", mask_json(spec)},
                    {"frames", a.frames},
                    {"grid", !a.no_grid && a.frames <= kMaxGridFrames},
                    {"chunks", counts},
                    {"cost", to_json(cost_report(spec, a.frames))}}
                   .dump()
            << "\n";
  return 0;
}

// ------------------------------------------------------------------ eval-wer

struct WerArgs {
  std::string ref, hyp;
};

/// utterance_id -> text from any JSON-lines file; lines without both keys
/// (decode headers and summaries) are skipped.
std::vector<std::pair<std::string, std::string>> read_transcripts(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.is_object() && j.contains("utterance_id") && j.contains("text") && j["text"].is_string())
      out.emplace_back(j["utterance_id"].get<std::string>(), j["text"].get<std::string>());
  }
  return out;
}

int cmd_eval_wer(const WerArgs& a) {
  require_file(a.ref, "reference");
  require_file(a.hyp, "hypothesis");
  const auto refs = read_transcripts(a.ref);
  std::map<std::string, std::string> hyp_by_id;
  for (auto& [id, text] : read_transcripts(a.hyp)) hyp_by_id[id] = text;
  std::vector<std::string> r, h;
  for (const auto& [id, text] : refs) {
    auto it = hyp_by_id.find(id);
    if (it == hyp_by_id.end()) throw Error("no hypothesis for utterance '" + id + "'");
    r.push_back(text);
    h.push_back(it->second);
  }
  std::cout << to_json(wer(r, h)).dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xtrd: chunked-attention streaming transducer toolkit"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth-data", "generate a synthetic dataset and manifest");
  synth->add_option("--config", sa.config, "run config JSON")->required();
  synth->add_option("--out", sa.out, "output directory")->required();
  synth->add_option("--n-utts", sa.n_utts, "number of utterances");
  synth->add_option("--seed", sa.seed, "dataset seed (default: config seed)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a transducer");
  train->add_option("--config", ta.config, "run config JSON")->required();
  train->add_option("--data", ta.data, "training manifest")->required();
  train->add_option("--dev", ta.dev, "dev manifest (default: training set)");
  train->add_option("--out", ta.out, "output directory")->required();
  train->add_option("--resume", ta.resume, "checkpoint to continue from");

  DecodeArgs da;
  auto* decode = app.add_subcommand("decode", "decode a manifest");
  decode->add_option("--ckpt", da.ckpt, "checkpoint")->required();
  decode->add_option("--data", da.data, "manifest")->required();
  decode->add_option("--out", da.out, "output JSON lines (default: stdout)");
  decode->add_option("--chunk-frames", da.chunk_frames, "chunk size in frames or 'full'");
  decode->add_option("--left-context", da.left_context, "left context in chunks or 'full'");
  decode->add_option("--sink-frames", da.sink_frames, "attention sink frames");
  decode->add_option("--beam", da.beam, "beam width");
  decode->add_option("--max-symbols", da.max_symbols, "symbol cap per frame");
  decode->add_option("--mode", da.mode, "offline or streaming");
  decode->add_flag("--full-attention", da.full_attention, "non-streaming decode");
  decode->add_flag("--timing", da.timing, "add wall-clock timings");

  MaskArgs ma;
  auto* mask = app.add_subcommand("inspect-mask", "print a chunk mask and its key counts");
  mask->add_option("--chunk-frames", ma.chunk_frames, "chunk size in frames or 'full'");
  mask->add_option("--left-context", ma.left_context, "left context in chunks or 'full'");
  mask->add_option("--sink-frames", ma.sink_frames, "attention sink frames");
  mask->add_option("--frames", ma.frames, "utterance length T");
  mask->add_flag("--no-grid", ma.no_grid, "JSON only");

  WerArgs wa;
  auto* ev = app.add_subcommand("eval-wer", "score hypotheses against references");
  ev->add_option("--ref", wa.ref, "reference manifest or transcript JSON lines")->required();
  ev->add_option("--hyp", wa.hyp, "hypothesis JSON lines (e.g. decode output)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth_data(sa);
    if (*train) return cmd_train(ta);
    if (*decode) return cmd_decode(da);
    if (*mask) return cmd_inspect_mask(ma);
    if (*ev) return cmd_eval_wer(wa);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
