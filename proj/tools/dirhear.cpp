// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line front end: gen-data, train, eval, separate, stream, bench, info.

#include <poll.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dirhear/config/engine_config.hpp"
#include "dirhear/engine/stream.hpp"
#include "dirhear/nn/arch.hpp"
#include "dirhear/room/dataset.hpp"
#include "dirhear/train/trainer.hpp"

using namespace dirhear;
namespace fs = std::filesystem;

namespace {

constexpr int kExitError = 1;
constexpr int kExitMissingFile = 2;

struct MissingFile : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<double> theta_deg;
};

EngineConfig engine(const Common& c) {
  EngineConfig e = c.config.empty() ? EngineConfig{} : load_engine_config(c.config);
  if (c.seed) {
    e.seed = *c.seed;
    e.train.seed = *c.seed;
  }
  if (c.theta_deg) e.theta = wrap_angle(deg2rad(*c.theta_deg));
  return e;
}

std::shared_ptr<const ModelWeights<float>> load_weights(const std::string& path) {
  if (path.empty()) throw MissingFile("no weights given (--weights or paths.weights)");
  if (!fs::exists(path)) throw MissingFile("weights file not found: " + path);
  return std::make_shared<const ModelWeights<float>>(load_checkpoint<float>(path));
}

// The config's array, or the matching preset when no config was given.
ArrayGeometry array_for(const Common& c, const EngineConfig& e, const ModelConfig& m) {
  if (c.config.empty() && m.mics != e.array.size()) {
    if (m.mics == 4) return array_preset("circle4");
    throw Error(Errc::config, "weights expect " + std::to_string(m.mics) + " mics; pass a config with that array");
  }
  require(e.array.size() == m.mics, Errc::config,
          "weights expect " + std::to_string(m.mics) + " mics, configured array has " + std::to_string(e.array.size()));
  return e.array;
}

void print_eval(const EvalSummary& s) {
  std::printf("clips %zu skipped %zu mean_si_sdri %.3f dB mean_sdri %.3f dB\n", s.records.size(), s.skipped,
              s.mean_si_sdri, s.mean_sdri);
}

// ---------------------------------------------------------------- info

nlohmann::json info_json(const ModelConfig& m) {
  StateBytes sb = state_bytes(m);
  return {{"params", count_params(m)},
          {"macs_per_second", macs_per_second(m)},
          {"receptive_field_s", receptive_field_seconds(m)},
          {"receptive_field_samples", receptive_field_samples(m)},
          {"lookahead_ms", lookahead_ms(m)},
          {"input_channels", m.in_channels()},
          {"state_strided_bytes", sb.strided_bytes},
          {"state_plain_bytes", sb.plain_bytes},
          {"state_reduction", sb.reduction()}};
}

void print_info(const std::string& name, const ModelConfig& m) {
  StateBytes sb = state_bytes(m);
  std::printf("model            %s (k=%d N=%d M=%d H=%d C=%d D=%d, %d mics%s)\n", name.c_str(), m.k, m.N, m.M, m.H,
              m.C, m.D, m.mics, m.use_beamformers ? "" : ", no beamformer inputs");
  std::printf("params           %.3fM (%zu)\n", double(count_params(m)) / 1e6, count_params(m));
  std::printf("MAC/s            %.3fG\n", macs_per_second(m) / 1e9);
  std::printf("receptive field  %.3f s (%ld samples)\n", receptive_field_seconds(m), receptive_field_samples(m));
  std::printf("lookahead        %.2f ms\n", lookahead_ms(m));
  std::printf("state cache      strided %.0f B, plain TCN %.0f B, reduction %.1f%%\n", sb.strided_bytes, sb.plain_bytes,
              100.0 * sb.reduction());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dirhear: directional hearing with beamformers and a complex-valued network"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config, "JSON engine config")->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "seed for all randomness");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "render a simulated dataset");
  std::string gen_out;
  std::size_t gen_count = 0;
  int gen_jobs = 1;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--count", gen_count, "number of clips")->required();
  gen->add_option("--jobs", gen_jobs, "worker threads")->check(CLI::PositiveNumber);

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string tr_train, tr_val, tr_out, tr_model;
  std::optional<int> tr_epochs, tr_batch;
  std::optional<double> tr_lr, tr_crop, tr_budget;
  std::optional<long> tr_steps;
  bool tr_resume = false, tr_no_bf = false, tr_verbose = false;
  train->add_option("--train", tr_train, "training dataset directory");
  train->add_option("--val", tr_val, "validation dataset directory");
  train->add_option("--out", tr_out, "checkpoint and log directory");
  train->add_option("--model", tr_model, "model preset (hybridbeam, hybridbeam-plus, toy)");
  train->add_option("--epochs", tr_epochs, "maximum epochs");
  train->add_option("--batch", tr_batch, "clips per optimizer step");
  train->add_option("--lr", tr_lr, "Adam learning rate");
  train->add_option("--crop-seconds", tr_crop, "random training crop length, 0 for whole clips");
  train->add_option("--time-budget", tr_budget, "wall-clock limit in seconds");
  train->add_option("--max-steps", tr_steps, "stop after this many steps");
  train->add_flag("--no-beamformers", tr_no_bf, "feed only the aligned mic channels");
  train->add_flag("--resume", tr_resume, "continue from last.ckpt in --out");
  train->add_flag("--verbose", tr_verbose, "log each step and epoch to stderr");

  // eval
  auto* eval = app.add_subcommand("eval", "score a model or a baseline on a dataset");
  std::string ev_weights, ev_data, ev_out, ev_baseline;
  std::size_t ev_limit = 0;
  eval->add_option("--weights", ev_weights, "checkpoint");
  eval->add_option("--data", ev_data, "dataset directory");
  eval->add_option("--out", ev_out, "per-clip TSV");
  eval->add_option("--baseline", ev_baseline, "mvdr or mixture instead of a model")
      ->check(CLI::IsMember({"mvdr", "mixture"}));
  eval->add_option("--limit", ev_limit, "score only the first N clips");

  // separate
  auto* sep = app.add_subcommand("separate", "separate one multichannel WAV");
  std::string sp_weights, sp_in, sp_out;
  bool sp_offline = false, sp_streaming = false;
  sep->add_option("--weights", sp_weights, "checkpoint");
  sep->add_option("--input", sp_in, "multichannel 16 kHz WAV")->required();
  sep->add_option("--output", sp_out, "mono WAV")->required();
  sep->add_option("--theta", common.theta_deg, "target direction in degrees");
  auto* f_stream = sep->add_flag("--streaming", sp_streaming, "128-sample block engine (default)");
  sep->add_flag("--offline", sp_offline, "whole-signal pipeline")->excludes(f_stream);

  // stream
  auto* strm = app.add_subcommand("stream", "separate raw float32 frames from stdin to stdout");
  std::string st_weights;
  int st_control = -1;
  bool st_align = false;
  strm->add_option("--weights", st_weights, "checkpoint");
  strm->add_option("--theta", common.theta_deg, "initial target direction in degrees");
  strm->add_option("--control-fd", st_control, "descriptor carrying 'theta <degrees>' and 'reset' lines");
  strm->add_flag("--align", st_align, "drop the engine delay and flush at EOF so output lines up with input");

  // bench
  auto* bn = app.add_subcommand("bench", "time the block engine");
  std::string bn_weights, bn_model;
  double bn_seconds = 10.0;
  bool bn_json = false;
  bn->add_option("--weights", bn_weights, "checkpoint (random weights of --model when omitted)");
  bn->add_option("--model", bn_model, "model preset");
  bn->add_option("--duration", bn_seconds, "seconds of audio")->check(CLI::PositiveNumber);
  bn->add_flag("--json", bn_json, "machine-readable report");

  // info
  auto* info = app.add_subcommand("info", "architecture arithmetic of a config");
  std::string in_model;
  bool in_json = false;
  info->add_option("--model", in_model, "model preset");
  info->add_flag("--json", in_json, "machine-readable report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    EngineConfig e = engine(common);

    if (*gen) {
      const std::string hash = dataset_config_hash(e.scene, e.seed, gen_count);
      auto metas = write_dataset(gen_out, e.scene, gen_count, e.seed, hash, gen_jobs);
      int counts[5] = {0, 0, 0, 0, 0};
      for (const auto& m : metas) ++counts[std::min(4, m.source_count)];
      std::printf("wrote %zu clips to %s (config %s; 1/2/3/4 sources: %d/%d/%d/%d)\n", metas.size(), gen_out.c_str(),
                  hash.c_str(), counts[1], counts[2], counts[3], counts[4]);
      return 0;
    }

    if (*train) {
      ModelConfig m = e.model;
      if (!tr_model.empty()) {
        m = ModelConfig::preset(tr_model);
        m.mics = e.array.size();
      }
      if (tr_no_bf) m.use_beamformers = false;
      TrainConfig tc = e.train;
      if (tr_epochs) tc.epochs = *tr_epochs;
      if (tr_batch) tc.batch = *tr_batch;
      if (tr_lr) tc.adam.lr = *tr_lr;
      if (tr_crop) tc.crop_seconds = *tr_crop;
      if (tr_budget) tc.time_budget_s = *tr_budget;
      if (tr_steps) tc.max_steps = *tr_steps;
      tc.verbose = tr_verbose;
      const std::string tdir = tr_train.empty() ? e.paths.train_dir : tr_train;
      const std::string vdir = tr_val.empty() ? e.paths.val_dir : tr_val;
      const std::string odir = tr_out.empty() ? e.paths.out_dir : tr_out;
      require(!tdir.empty() && !odir.empty(), Errc::config, "train needs --train and --out");
      Trainer t(m, tc, e.array, e.beam, tdir, vdir, odir);
      auto r = t.run(tr_resume);
      for (const auto& ep : r.epochs)
        std::printf("epoch %d steps %ld train_loss %.4f val_si_sdri %.3f dB lr %.3g\n", ep.epoch, ep.steps,
                    ep.train_loss, ep.val_si_sdri, ep.lr);
      std::printf("best val_si_sdri %.3f dB, %ld steps%s; best %s\n", r.best_val_si_sdri, r.steps,
                  r.stopped_early ? " (budget reached)" : "", r.best_path.c_str());
      return 0;
    }

    if (*eval) {
      const std::string data = ev_data.empty() ? e.paths.dataset : ev_data;
      require(!data.empty(), Errc::config, "eval needs --data");
      DatasetIndex d = read_manifest(data);
      ClipSeparator s;
      if (ev_baseline == "mvdr") s = mvdr_separator(e.array, e.beam);
      else if (ev_baseline == "mixture") s = mixture_separator();
      else {
        auto w = load_weights(ev_weights.empty() ? e.paths.weights : ev_weights);
        s = network_separator(w, array_for(common, e, w->config), e.beam);
      }
      auto sum = evaluate(d, s, ev_limit);
      if (!ev_out.empty()) write_eval(ev_out, sum);
      print_eval(sum);
      return 0;
    }

    if (*sep) {
      auto w = load_weights(sp_weights.empty() ? e.paths.weights : sp_weights);
      ArrayGeometry g = array_for(common, e, w->config);
      auto x = read_wav<double>(sp_in);
      require(int(x.channels()) == w->config.mics, Errc::shape,
              sp_in + ": has " + std::to_string(x.channels()) + " channels, weights expect " +
                  std::to_string(w->config.mics));
      std::vector<float> y;
      if (sp_offline) y = separate_offline(*w, g, e.theta, e.beam, x);
      else {
        Stream<float> st(std::make_shared<const CompiledModel<float>>(*w), g, e.theta, e.beam);
        y = separate_streaming(st, x);
      }
      MultichannelBuffer<float> out(1, y.size());
      out[0] = std::move(y);
      write_wav(sp_out, out, WavFormat::float32);
      return 0;
    }

    if (*strm) {
      auto w = load_weights(st_weights.empty() ? e.paths.weights : st_weights);
      ArrayGeometry g = array_for(common, e, w->config);
      Stream<float> st(std::make_shared<const CompiledModel<float>>(*w), g, e.theta, e.beam);
      const int C = g.size();
      std::vector<float> raw(std::size_t(C) * kBlockSize);
      MultichannelBuffer<double> blk(C, kBlockSize);
      std::vector<const double*> in(C);
      for (int c = 0; c < C; ++c) in[c] = blk[c].data();
      std::vector<float> out(kBlockSize);
      std::string pending;
      long skip = st_align ? st.delay_samples() : 0, in_samples = 0, out_samples = 0;
      auto poll_control = [&] {
        if (st_control < 0) return;
        pollfd p{st_control, POLLIN, 0};
        while (::poll(&p, 1, 0) > 0 && (p.revents & POLLIN)) {
          char buf[256];
          ssize_t n = ::read(st_control, buf, sizeof buf);
          if (n <= 0) {
            st_control = -1;
            return;
          }
          pending.append(buf, std::size_t(n));
          for (std::size_t nl; (nl = pending.find('\n')) != std::string::npos;) {
            std::istringstream cmd(pending.substr(0, nl));
            pending.erase(0, nl + 1);
            std::string verb;
            double v = 0;
            cmd >> verb;
            if (verb == "theta" && (cmd >> v)) st.set_theta(deg2rad(v));
            else if (verb == "reset") st.reset();
            else if (!verb.empty()) std::cerr << "dirhear: ignored control line '" << verb << "'\n";
          }
        }
      };
      auto emit = [&] {
        long from = std::min<long>(skip, kBlockSize);
        skip -= from;
        long n = kBlockSize - from;
        if (st_align) n = std::min(n, in_samples - out_samples);
        if (n > 0) std::fwrite(out.data() + from, sizeof(float), std::size_t(n), stdout);
        out_samples += std::max(0L, n);
      };
      for (bool eof = false; !eof;) {
        std::size_t got = std::fread(raw.data(), sizeof(float), raw.size(), stdin);
        eof = got < raw.size();
        std::size_t frames = got / C;
        if (frames == 0 && eof) break;
        for (int c = 0; c < C; ++c)
          for (int t = 0; t < kBlockSize; ++t) blk[c][t] = std::size_t(t) < frames ? raw[std::size_t(t) * C + c] : 0.0;
        in_samples += long(frames);
        poll_control();
        st.process_block(in.data(), out.data());
        emit();
        std::fflush(stdout);
      }
      if (st_align) {
        for (auto& ch : blk.data) std::fill(ch.begin(), ch.end(), 0.0);
        while (out_samples < in_samples) {
          st.process_block(in.data(), out.data());
          emit();
        }
        std::fflush(stdout);
      }
      return 0;
    }

    if (*bn) {
      std::shared_ptr<const ModelWeights<float>> w;
      if (!bn_weights.empty()) w = load_weights(bn_weights);
      else {
        ModelConfig m = bn_model.empty() ? e.model : ModelConfig::preset(bn_model);
        m.mics = e.array.size();
        auto rw = std::make_shared<ModelWeights<float>>(m);
        init_weights(*rw, e.seed);
        w = rw;
      }
      ArrayGeometry g = array_for(common, e, w->config);
      BenchReport r = bench(*w, g, bn_seconds, e.seed, e.beam);
      if (bn_json) {
        nlohmann::json j;
        j["blocks"] = r.blocks;
        for (const auto& s : r.stages) j["stages"][s.name] = {{"mean_ms", s.mean_ms}, {"p95_ms", s.p95_ms}};
        j["budget"] = {{"buffer_ms", r.budget.buffer_ms},
                       {"processing_ms", r.budget.processing_ms},
                       {"lookahead_ms", r.budget.lookahead_ms},
                       {"end_to_end_ms", r.budget.end_to_end_ms()},
                       {"realtime", r.budget.realtime()}};
        j["cache"] = {{"strided_bytes", r.cache.strided_bytes},
                      {"plain_bytes", r.cache.plain_bytes},
                      {"reduction", r.cache.reduction()}};
        std::printf("%s\n", j.dump(2).c_str());
        return 0;
      }
      std::printf("blocks           %ld (%.1f s of audio, %d mics)\n", r.blocks, bn_seconds, g.size());
      for (const auto& s : r.stages)
        std::printf("%-16s mean %.3f ms  p95 %.3f ms per 8 ms block\n", s.name.c_str(), s.mean_ms, s.p95_ms);
      std::printf("buffer           %.1f ms\n", r.budget.buffer_ms);
      std::printf("processing       %.3f ms\n", r.budget.processing_ms);
      std::printf("lookahead        %.1f ms\n", r.budget.lookahead_ms);
      std::printf("end-to-end       %.3f ms\n", r.budget.end_to_end_ms());
      std::printf("real-time        %s\n", r.budget.realtime() ? "yes" : "no");
      std::printf("cache traffic    strided %.0f B vs plain TCN %.0f B per block, reduction %.1f%%\n",
                  r.cache.strided_bytes, r.cache.plain_bytes, 100.0 * r.cache.reduction());
      return 0;
    }

    if (*info) {
      ModelConfig m = e.model;
      std::string name = e.model_preset;
      if (!in_model.empty()) {
        m = ModelConfig::preset(in_model);
        m.mics = e.array.size();
        name = in_model;
      }
      m.validate();
      if (in_json) std::printf("%s\n", info_json(m).dump(2).c_str());
      else print_info(name, m);
      return 0;
    }
  } catch (const MissingFile& ex) {
    std::fprintf(stderr, "dirhear: %s\n", ex.what());
    return kExitMissingFile;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "dirhear: %s\n", ex.what());
    return kExitError;
  }
  return kExitError;
}
