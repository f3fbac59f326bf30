// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// On-disk dataset: per clip a float32 mixture WAV, a mono groundtruth WAV
// and a key=value .meta record, plus manifest.tsv listing every clip and the
// hash of the generating config.

#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dirhear/room/scene.hpp"
#include "dirhear/signal/wav.hpp"

namespace dirhear {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t clip_seed(uint64_t seed, std::size_t index) { return splitmix64(splitmix64(seed) ^ uint64_t(index)); }

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct ClipMeta {
  std::size_t index = 0;
  std::string mix_file, gt_file;
  int source_count = 0;
  double theta_input = 0, true_theta = 0, rt60 = 0, snr_db = 0;
  uint64_t seed = 0;
};

inline std::string clip_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%05zu", i);
  return buf;
}

inline std::string format_meta(const ClipMeta& m) {
  std::ostringstream o;
  o.precision(17);
  o << "index=" << m.index << "\nmix=" << m.mix_file << "\ngt=" << m.gt_file << "\nsource_count=" << m.source_count
    << "\ntheta_input=" << m.theta_input << "\ntrue_theta=" << m.true_theta << "\nrt60=" << m.rt60
    << "\nsnr_db=" << m.snr_db << "\nseed=" << m.seed << "\n";
  return o.str();
}

inline ClipMeta parse_meta(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* k) {
    auto it = kv.find(k);
    require(it != kv.end(), Errc::io, std::string("clip meta is missing '") + k + "'");
    return it->second;
  };
  ClipMeta m;
  m.index = std::stoul(get("index"));
  m.mix_file = get("mix");
  m.gt_file = get("gt");
  m.source_count = std::stoi(get("source_count"));
  m.theta_input = std::stod(get("theta_input"));
  m.true_theta = std::stod(get("true_theta"));
  m.rt60 = std::stod(get("rt60"));
  m.snr_db = std::stod(get("snr_db"));
  m.seed = std::stoull(get("seed"));
  return m;
}

inline std::vector<char> to_bytes(const std::string& s) { return {s.begin(), s.end()}; }

// Renders clip `index`: scene and noise both come from clip_seed(seed, index).
inline std::pair<TrainingClip, ClipMeta> make_clip(const SceneConfig& cfg, uint64_t seed, std::size_t index) {
  ClipMeta m;
  m.index = index;
  m.seed = clip_seed(seed, index);
  std::mt19937_64 rng(m.seed);
  SceneSpec sc = sample_scene(rng, cfg);
  TrainingClip clip = render_clip(sc, rng);
  m.source_count = int(sc.sources.size());
  m.theta_input = sc.input_theta;
  m.true_theta = sc.true_theta;
  m.rt60 = sc.rt60;
  m.snr_db = sc.snr_db;
  m.mix_file = clip_stem(index) + "_mix.wav";
  m.gt_file = clip_stem(index) + "_gt.wav";
  return {std::move(clip), m};
}

// Writes `count` clips with `jobs` worker threads; every file goes through
// write-then-rename, and the manifest is written last.
inline std::vector<ClipMeta> write_dataset(const std::string& dir, const SceneConfig& cfg, std::size_t count,
                                           uint64_t seed, const std::string& config_hash, int jobs = 1) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), Errc::io, "cannot create dataset directory " + dir);
  std::vector<ClipMeta> metas(count);
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(std::max(1, jobs));
  auto worker = [&](int w) {
    try {
      for (std::size_t i = next++; i < count; i = next++) {
        auto [clip, m] = make_clip(cfg, seed, i);
        MultichannelBuffer<double> gt(1, clip.target_dry.size());
        gt[0] = clip.target_dry;
        write_wav(dir + "/" + m.mix_file, clip.mixture, WavFormat::float32);
        write_wav(dir + "/" + m.gt_file, gt, WavFormat::float32);
        atomic_write_file(dir + "/" + clip_stem(i) + ".meta", to_bytes(format_meta(m)));
        metas[i] = m;
      }
    } catch (const std::exception& e) {
      errors[w] = e.what();
      next = count;
    }
  };
  if (jobs <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) require(e.empty(), Errc::io, "dataset generation failed: " + e);
  std::ostringstream o;
  o.precision(17);
  o << "# config_hash\t" << config_hash << "\n";
  o << "index\tmix\tgt\tsource_count\ttheta_input\ttrue_theta\trt60\tsnr_db\tseed\n";
  for (const auto& m : metas)
    o << m.index << '\t' << m.mix_file << '\t' << m.gt_file << '\t' << m.source_count << '\t' << m.theta_input << '\t'
      << m.true_theta << '\t' << m.rt60 << '\t' << m.snr_db << '\t' << m.seed << '\n';
  atomic_write_file(dir + "/manifest.tsv", to_bytes(o.str()));
  return metas;
}

struct DatasetIndex {
  std::string dir;
  std::string config_hash;
  std::vector<ClipMeta> clips;
};

inline DatasetIndex read_manifest(const std::string& dir) {
  std::ifstream f(dir + "/manifest.tsv");
  require(bool(f), Errc::io, "dataset manifest not found: " + dir + "/manifest.tsv");
  DatasetIndex d;
  d.dir = dir;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("# config_hash\t", 0) == 0) {
      d.config_hash = line.substr(14);
      continue;
    }
    if (line.rfind("index\t", 0) == 0 || line[0] == '#') continue;
    std::istringstream in(line);
    ClipMeta m;
    std::string idx, sc, ti, tt, rt, snr, sd;
    std::getline(in, idx, '\t');
    std::getline(in, m.mix_file, '\t');
    std::getline(in, m.gt_file, '\t');
    std::getline(in, sc, '\t');
    std::getline(in, ti, '\t');
    std::getline(in, tt, '\t');
    std::getline(in, rt, '\t');
    std::getline(in, snr, '\t');
    std::getline(in, sd, '\t');
    require(!sd.empty(), Errc::io, "malformed manifest line: " + line);
    m.index = std::stoul(idx);
    m.source_count = std::stoi(sc);
    m.theta_input = std::stod(ti);
    m.true_theta = std::stod(tt);
    m.rt60 = std::stod(rt);
    m.snr_db = std::stod(snr);
    m.seed = std::stoull(sd);
    d.clips.push_back(m);
  }
  return d;
}

struct LoadedClip {
  ClipMeta meta;
  MultichannelBuffer<float> mixture;
  std::vector<float> groundtruth;  // empty if the file is missing
};

inline LoadedClip load_clip(const DatasetIndex& d, const ClipMeta& m) {
  LoadedClip c;
  c.meta = m;
  c.mixture = read_wav<float>(d.dir + "/" + m.mix_file);
  if (std::filesystem::exists(d.dir + "/" + m.gt_file)) {
    auto gt = read_wav<float>(d.dir + "/" + m.gt_file);
    require(gt.channels() == 1, Errc::io, m.gt_file + ": groundtruth must be mono");
    require(gt.samples() == c.mixture.samples(), Errc::shape, m.gt_file + ": length differs from mixture");
    c.groundtruth = std::move(gt[0]);
  }
  return c;
}

}  // namespace dirhear
