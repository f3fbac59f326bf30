// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Training loop, validation and dataset evaluation.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dirhear/nn/model.hpp"
#include "dirhear/room/dataset.hpp"
#include "dirhear/train/adam.hpp"
#include "dirhear/train/metrics.hpp"

namespace dirhear {

struct TrainConfig {
  AdamParams adam;
  LossWeights loss;
  int batch = 4;
  int epochs = 20;
  double crop_seconds = 0;    // 0 trains on whole clips
  uint64_t seed = 1;
  double time_budget_s = 0;   // wall-clock limit, 0 for none
  long max_steps = 0;         // 0 for none
  int plateau_patience = 2;   // epochs without validation gain before halving lr
  double min_lr = 1e-5;
  std::size_t cache_mb = 2048;  // prebeam feature cache for the training set
  bool verbose = false;

  void validate() const {
    adam.validate();
    require(batch >= 1, Errc::config, "batch must be >= 1");
    require(epochs >= 1, Errc::config, "epochs must be >= 1");
    require(crop_seconds >= 0, Errc::config, "crop_seconds must be >= 0");
    require(time_budget_s >= 0 && max_steps >= 0, Errc::config, "budgets must be >= 0");
    require(plateau_patience >= 1, Errc::config, "plateau_patience must be >= 1");
    require(loss.si_sdr >= 0 && loss.l1 >= 0, Errc::config, "loss weights must be >= 0");
  }
};

// Network input and targets for one clip.
struct ClipFeatures {
  Mat<float> input;           // in_channels x padded length
  std::vector<float> target;  // groundtruth, clip length
  std::vector<float> mix0;    // mixture at mic 0
  std::size_t bytes() const { return std::size_t(input.size() + target.size() + mix0.size()) * sizeof(float); }
};

// Prebeam on the clip's (noisy) input direction, zero-extended by the
// decoder lookahead as in separate_offline.
inline ClipFeatures clip_features(const LoadedClip& clip, const ArrayGeometry& g, const ModelConfig& c,
                                  const BeamParams& bp) {
  require(int(clip.mixture.channels()) == c.mics && g.size() == c.mics, Errc::shape,
          clip.meta.mix_file + ": has " + std::to_string(clip.mixture.channels()) + " channels, model expects " +
              std::to_string(c.mics));
  const std::size_t L = clip.mixture.samples();
  MultichannelBuffer<double> x(c.mics, L + std::size_t(c.lookahead_samples()));
  for (int m = 0; m < c.mics; ++m) std::copy(clip.mixture[m].begin(), clip.mixture[m].end(), x[m].begin());
  ClipFeatures f;
  f.input = network_input<float>(run_prebeam_offline(x, g, clip.meta.theta_input, bp), c);
  f.target = clip.groundtruth;
  f.mix0 = clip.mixture[0];
  return f;
}

// ---------------------------------------------------------------- evaluation

struct EvalRecord {
  std::size_t index = 0;
  int sources = 0;
  double si_sdr_mix = 0, si_sdr_out = 0, si_sdri = 0;
  double sdr_mix = 0, sdr_out = 0, sdri = 0;
};

struct EvalSummary {
  std::vector<EvalRecord> records;
  std::size_t skipped = 0;
  double mean_si_sdri = 0, mean_sdri = 0;
};

using ClipSeparator = std::function<std::vector<float>(const LoadedClip&)>;

inline EvalRecord score_clip(std::size_t index, int sources, const std::vector<float>& out,
                             const std::vector<float>& mix0, const std::vector<float>& gt) {
  EvalRecord r;
  r.index = index;
  r.sources = sources;
  r.si_sdr_mix = si_sdr(mix0, gt);
  r.si_sdr_out = si_sdr(out, gt);
  r.si_sdri = r.si_sdr_out - r.si_sdr_mix;
  r.sdr_mix = sdr(mix0, gt);
  r.sdr_out = sdr(out, gt);
  r.sdri = r.sdr_out - r.sdr_mix;
  return r;
}

inline void finish_summary(EvalSummary& s) {
  s.mean_si_sdri = s.mean_sdri = 0;
  for (const auto& r : s.records) {
    s.mean_si_sdri += r.si_sdri;
    s.mean_sdri += r.sdri;
  }
  if (!s.records.empty()) {
    s.mean_si_sdri /= double(s.records.size());
    s.mean_sdri /= double(s.records.size());
  }
}

// Clips without groundtruth are skipped with a warning. limit 0 = all clips.
inline EvalSummary evaluate(const DatasetIndex& d, const ClipSeparator& sep, std::size_t limit = 0,
                            std::ostream* warn = &std::cerr) {
  EvalSummary s;
  std::size_t n = limit ? std::min(limit, d.clips.size()) : d.clips.size();
  for (std::size_t i = 0; i < n; ++i) {
    LoadedClip clip = load_clip(d, d.clips[i]);
    double gpow = 0;
    for (float v : clip.groundtruth) gpow += double(v) * v;
    if (clip.groundtruth.empty() || gpow == 0) {
      if (warn) *warn << "warning: " << d.clips[i].gt_file << " missing or silent, clip skipped\n";
      ++s.skipped;
      continue;
    }
    auto out = sep(clip);
    require(out.size() == clip.groundtruth.size(), Errc::internal, "separator returned the wrong length");
    s.records.push_back(score_clip(clip.meta.index, clip.meta.source_count, out, clip.mixture[0], clip.groundtruth));
  }
  finish_summary(s);
  return s;
}

inline ClipSeparator network_separator(std::shared_ptr<const ModelWeights<float>> w, const ArrayGeometry& g,
                                       const BeamParams& bp) {
  return [w, g, bp](const LoadedClip& clip) {
    ClipFeatures f = clip_features(clip, g, w->config, bp);
    Mat<float> y = forward_offline(*w, f.input);
    return std::vector<float>(y.data(), y.data() + clip.mixture.samples());
  };
}

// Output of the online MVDR alone (prebeam row 1).
inline ClipSeparator mvdr_separator(const ArrayGeometry& g, const BeamParams& bp) {
  return [g, bp](const LoadedClip& clip) {
    auto pre = run_prebeam_offline(clip.mixture.cast<double>(), g, clip.meta.theta_input, bp);
    return std::vector<float>(pre[1].begin(), pre[1].end());
  };
}

inline ClipSeparator mixture_separator() {
  return [](const LoadedClip& clip) { return clip.mixture[0]; };
}

inline void write_eval(const std::string& path, const EvalSummary& s) {
  std::ostringstream o;
  o << "index\tsources\tsi_sdr_mix\tsi_sdr_out\tsi_sdri\tsdr_mix\tsdr_out\tsdri\n";
  char buf[256];
  for (const auto& r : s.records) {
    std::snprintf(buf, sizeof buf, "%zu\t%d\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\n", r.index, r.sources, r.si_sdr_mix,
                  r.si_sdr_out, r.si_sdri, r.sdr_mix, r.sdr_out, r.sdri);
    o << buf;
  }
  std::snprintf(buf, sizeof buf, "# clips %zu skipped %zu mean_si_sdri %.4f mean_sdri %.4f\n", s.records.size(),
                s.skipped, s.mean_si_sdri, s.mean_sdri);
  o << buf;
  atomic_write_file(path, to_bytes(o.str()));
}

// ---------------------------------------------------------------- training

struct EpochSummary {
  int epoch = 0;
  long steps = 0;
  double train_loss = 0;
  double val_si_sdri = 0;
  double lr = 0;
  double seconds = 0;
};

struct TrainResult {
  std::vector<EpochSummary> epochs;
  std::vector<double> step_losses;
  double best_val_si_sdri = -1e30;
  long steps = 0;
  bool stopped_early = false;
  std::string best_path, last_path;
};

namespace detail {

inline constexpr char kTrainMagic[8] = {'D', 'H', 'T', 'R', 'A', 'I', 'N', '1'};

struct TrainPosition {
  int epoch = 0, batch = 0, bad_epochs = 0;
  long step = 0;
  double lr = 0, best = -1e30;
};

}  // namespace detail

class Trainer {
 public:
  Trainer(const ModelConfig& mc, const TrainConfig& tc, const ArrayGeometry& g, const BeamParams& bp,
          const std::string& train_dir, const std::string& val_dir, const std::string& out_dir)
      : mc_(mc), tc_(tc), g_(g), bp_(bp), out_(out_dir) {
    mc_.validate();
    tc_.validate();
    g_.validate();
    bp_.validate();
    require(g_.size() == mc_.mics, Errc::config,
            "array has " + std::to_string(g_.size()) + " mics, model config expects " + std::to_string(mc_.mics));
    train_ = read_manifest(train_dir);
    require(!train_.clips.empty(), Errc::config, "training set " + train_dir + " is empty");
    if (!val_dir.empty()) val_ = read_manifest(val_dir);
    // channel mismatch must surface before any step runs
    for (const DatasetIndex* d : {&train_, &val_})
      if (!d->clips.empty()) {
        auto c = load_clip(*d, d->clips.front());
        require(int(c.mixture.channels()) == mc_.mics, Errc::shape,
                d->dir + ": clips have " + std::to_string(c.mixture.channels()) + " channels, model expects " +
                    std::to_string(mc_.mics));
      }
    std::filesystem::create_directories(out_);
  }

  std::string last_path() const { return out_ + "/last.ckpt"; }
  std::string best_path() const { return out_ + "/best.ckpt"; }

  // Hook run after every optimizer step (tests use it to stop or inspect).
  std::function<bool(long step, double loss)> on_step;

  TrainResult run(bool resume = false) {
    using clk = std::chrono::steady_clock;
    const auto t_start = clk::now();
    ModelWeights<float> w(mc_);
    detail::TrainPosition pos;
    pos.lr = tc_.adam.lr;
    std::vector<char> blob;
    if (resume && std::filesystem::exists(last_path())) {
      w = load_checkpoint<float>(last_path(), &blob);
      require(w.config == mc_, Errc::config, last_path() + ": checkpoint config differs from the requested model");
    } else {
      resume = false;
      init_weights(w, splitmix64(tc_.seed ^ 0x5eedULL));
    }
    Tape<float> tp(true);
    ParamSet<float> P = make_params(tp, w, true);
    AdamParams ap = tc_.adam;
    Adam<float> opt(P.leaves, ap);
    if (resume) pos = decode_position(blob, opt);
    opt.params().lr = pos.lr;

    std::ofstream steps_log(out_ + "/steps.tsv", resume ? std::ios::app : std::ios::trunc);
    std::ofstream metrics_log(out_ + "/metrics.tsv", resume ? std::ios::app : std::ios::trunc);
    if (!resume) {
      steps_log << "step\tloss\tsi_sdr_term\tl1_term\n";
      metrics_log << "epoch\tsteps\ttrain_loss\tval_si_sdri\tlr\tseconds\n";
    }

    TrainResult res;
    res.best_val_si_sdri = pos.best;
    res.best_path = best_path();
    res.last_path = last_path();
    const std::size_t n = train_.clips.size();
    const int batches = int((n + tc_.batch - 1) / tc_.batch);
    auto out_of_budget = [&] {
      if (tc_.max_steps > 0 && pos.step >= tc_.max_steps) return true;
      double el = std::chrono::duration<double>(clk::now() - t_start).count();
      return tc_.time_budget_s > 0 && el >= tc_.time_budget_s;
    };

    while (pos.epoch < tc_.epochs && !res.stopped_early) {
      const auto t_epoch = clk::now();
      auto order = epoch_order(pos.epoch);
      double loss_sum = 0;
      long loss_n = 0;
      for (; pos.batch < batches; ++pos.batch) {
        if (out_of_budget()) {
          res.stopped_early = true;
          break;
        }
        const std::size_t b0 = std::size_t(pos.batch) * tc_.batch, b1 = std::min(n, b0 + tc_.batch);
        double bl = 0, bs = 0, b_l1 = 0;
        for (std::size_t k = b0; k < b1; ++k) {
          const std::size_t ci = order[k];
          const ClipFeatures& f = train_features(ci);
          auto [start, len] = crop(f, pos.epoch, ci);
          const int padded = std::min(int(f.input.cols()) - start, round_up(len + mc_.lookahead_samples()));
          auto x = tp.leaf(f.input.middleCols(start, padded));
          auto r = forward_graph(tp, P, x);
          auto est = slice_cols(tp, r.output, 0, len);
          Mat<float> ref = Eigen::Map<const Mat<float>>(f.target.data() + start, 1, len);
          auto lt = loss_graph(tp, est, ref, tc_.loss, 1.0 / double(b1 - b0));
          require(std::isfinite(double(lt.loss->value(0, 0))), Errc::internal,
                  "training loss became non-finite at step " + std::to_string(pos.step));
          tp.backward(lt.loss);
          bl += -tc_.loss.si_sdr * lt.si_sdr_db + tc_.loss.l1 * lt.l1;
          bs += -tc_.loss.si_sdr * lt.si_sdr_db;
          b_l1 += tc_.loss.l1 * lt.l1;
        }
        const double m = double(b1 - b0);
        opt.step(P.leaves);
        ++pos.step;
        char line[160];
        std::snprintf(line, sizeof line, "%ld\t%.6f\t%.6f\t%.6f\n", pos.step, bl / m, bs / m, b_l1 / m);
        steps_log << line;
        steps_log.flush();
        res.step_losses.push_back(bl / m);
        loss_sum += bl / m;
        ++loss_n;
        if (tc_.verbose) std::cerr << "step " << pos.step << " loss " << bl / m << "\n";
        if (on_step && !on_step(pos.step, bl / m)) {
          res.stopped_early = true;
          ++pos.batch;
          break;
        }
      }
      if (res.stopped_early && pos.batch < batches) {
        // partial epoch: still score it so best.ckpt reflects the final weights
        store_params(P, w);
        double v = val_.clips.empty() ? 0.0 : validate(w);
        if (v > pos.best || !std::filesystem::exists(best_path())) {
          pos.best = std::max(pos.best, v);
          save_checkpoint(best_path(), w);
        }
        char line[200];
        std::snprintf(line, sizeof line, "%d\t%ld\t%.6f\t%.4f\t%.3g\t%.1f\tpartial\n", pos.epoch, pos.step,
                      loss_n ? loss_sum / double(loss_n) : 0.0, v, opt.params().lr,
                      std::chrono::duration<double>(clk::now() - t_epoch).count());
        metrics_log << line;
        res.epochs.push_back({pos.epoch, pos.step, loss_n ? loss_sum / double(loss_n) : 0.0, v, opt.params().lr, 0.0});
        pos.lr = opt.params().lr;
        save_checkpoint(last_path(), w, encode_position(pos, opt));
        break;
      }
      // epoch complete
      store_params(P, w);
      EpochSummary es;
      es.epoch = pos.epoch;
      es.steps = pos.step;
      es.train_loss = loss_n ? loss_sum / double(loss_n) : 0.0;
      es.lr = opt.params().lr;
      es.val_si_sdri = val_.clips.empty() ? 0.0 : validate(w);
      if (es.val_si_sdri > pos.best || val_.clips.empty()) {
        pos.best = std::max(pos.best, es.val_si_sdri);
        pos.bad_epochs = 0;
        save_checkpoint(best_path(), w);
      } else if (++pos.bad_epochs >= tc_.plateau_patience) {
        opt.params().lr = std::max(tc_.min_lr, opt.params().lr * 0.5);
        pos.bad_epochs = 0;
      }
      es.seconds = std::chrono::duration<double>(clk::now() - t_epoch).count();
      char line[200];
      std::snprintf(line, sizeof line, "%d\t%ld\t%.6f\t%.4f\t%.3g\t%.1f\n", es.epoch, es.steps, es.train_loss,
                    es.val_si_sdri, es.lr, es.seconds);
      metrics_log << line;
      metrics_log.flush();
      if (tc_.verbose) std::cerr << "epoch " << es.epoch << " val SI-SDRi " << es.val_si_sdri << " dB\n";
      res.epochs.push_back(es);
      ++pos.epoch;
      pos.batch = 0;
      pos.lr = opt.params().lr;
      save_checkpoint(last_path(), w, encode_position(pos, opt));
    }
    res.best_val_si_sdri = pos.best;
    res.steps = pos.step;
    return res;
  }

  // Mean SI-SDRi of the given weights over the validation set.
  double validate(const ModelWeights<float>& w) {
    EvalSummary s;
    for (std::size_t i = 0; i < val_.clips.size(); ++i) {
      const ClipFeatures& f = val_features(i);
      if (f.target.empty()) continue;
      Mat<float> y = forward_offline(w, f.input);
      std::vector<float> out(y.data(), y.data() + f.target.size());
      s.records.push_back(score_clip(i, val_.clips[i].source_count, out, f.mix0, f.target));
    }
    finish_summary(s);
    return s.mean_si_sdri;
  }

 private:
  int round_up(int v) const { return (v + mc_.enc_stride - 1) / mc_.enc_stride * mc_.enc_stride; }

  std::vector<std::size_t> epoch_order(int epoch) const {
    std::vector<std::size_t> o(train_.clips.size());
    std::iota(o.begin(), o.end(), 0);
    std::mt19937_64 rng(splitmix64(tc_.seed ^ (0x9e37ULL * uint64_t(epoch + 1))));
    std::shuffle(o.begin(), o.end(), rng);
    return o;
  }

  std::pair<int, int> crop(const ClipFeatures& f, int epoch, std::size_t clip) const {
    const int L = int(f.target.size());
    int len = tc_.crop_seconds > 0 ? int(tc_.crop_seconds * kSampleRate) / kBlockSize * kBlockSize : L;
    len = std::max(kBlockSize, std::min(len, L / mc_.enc_stride * mc_.enc_stride));
    if (len >= L) return {0, std::min(len, L)};
    std::mt19937_64 rng(clip_seed(splitmix64(tc_.seed) ^ uint64_t(epoch), clip));
    // crops start on a stride boundary so frames line up with whole-clip runs
    int slots = (L - len) / mc_.enc_stride;
    int start = int(rng() % uint64_t(slots + 1)) * mc_.enc_stride;
    return {start, len};
  }

  const ClipFeatures& train_features(std::size_t i) {
    auto it = cache_.find(i);
    if (it != cache_.end()) return it->second;
    ClipFeatures f = clip_features(load_clip(train_, train_.clips[i]), g_, mc_, bp_);
    require(!f.target.empty(), Errc::io, train_.clips[i].gt_file + ": training clip has no groundtruth");
    if (cache_bytes_ + f.bytes() <= tc_.cache_mb * (std::size_t(1) << 20)) {
      cache_bytes_ += f.bytes();
      return cache_.emplace(i, std::move(f)).first->second;
    }
    scratch_ = std::move(f);
    return scratch_;
  }

  const ClipFeatures& val_features(std::size_t i) {
    auto it = val_cache_.find(i);
    if (it != val_cache_.end()) return it->second;
    return val_cache_.emplace(i, clip_features(load_clip(val_, val_.clips[i]), g_, mc_, bp_)).first->second;
  }

  std::vector<char> encode_position(const detail::TrainPosition& p, const Adam<float>& opt) const {
    std::vector<char> b(detail::kTrainMagic, detail::kTrainMagic + 8);
    detail::put<int32_t>(b, p.epoch);
    detail::put<int32_t>(b, p.batch);
    detail::put<int32_t>(b, p.bad_epochs);
    detail::put<int64_t>(b, p.step);
    detail::put<double>(b, p.lr);
    detail::put<double>(b, p.best);
    detail::put<uint64_t>(b, tc_.seed);
    auto a = opt.serialize();
    b.insert(b.end(), a.begin(), a.end());
    return b;
  }

  detail::TrainPosition decode_position(const std::vector<char>& b, Adam<float>& opt) const {
    require(b.size() >= 8 && std::equal(b.begin(), b.begin() + 8, detail::kTrainMagic), Errc::io,
            last_path() + ": no training state to resume from");
    detail::Reader r{b, 8, last_path()};
    detail::TrainPosition p;
    p.epoch = r.get<int32_t>();
    p.batch = r.get<int32_t>();
    p.bad_epochs = r.get<int32_t>();
    p.step = r.get<int64_t>();
    p.lr = r.get<double>();
    p.best = r.get<double>();
    uint64_t seed = r.get<uint64_t>();
    require(seed == tc_.seed, Errc::config, "resume needs the seed the run started with (" + std::to_string(seed) + ")");
    opt.deserialize(b.data() + r.pos, b.size() - r.pos);
    return p;
  }

  ModelConfig mc_;
  TrainConfig tc_;
  ArrayGeometry g_;
  BeamParams bp_;
  std::string out_;
  DatasetIndex train_, val_;
  std::map<std::size_t, ClipFeatures> cache_, val_cache_;
  std::size_t cache_bytes_ = 0;
  ClipFeatures scratch_;
};

}  // namespace dirhear
