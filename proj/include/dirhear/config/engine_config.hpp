// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// JSON engine configuration shared by every CLI subcommand. Every object is
// read strictly: a key the reader does not know is an error, so typos
// surface instead of silently falling back to defaults.

#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dirhear/beamform/beamformers.hpp"
#include "dirhear/nn/config.hpp"
#include "dirhear/room/scene.hpp"
#include "dirhear/train/trainer.hpp"

namespace dirhear {

struct EnginePaths {
  std::string weights, dataset, train_dir, val_dir, out_dir;
};

struct EngineConfig {
  std::string array_preset = "circle6";  // empty when positions were given
  ArrayGeometry array = circular_array(6, 0.05);
  std::string model_preset = "hybridbeam";
  ModelConfig model = ModelConfig::hybridbeam();
  BeamParams beam;
  TrainConfig train;
  SceneConfig scene;
  EnginePaths paths;
  double theta = 0;  // radians, wrapped to [-pi, pi)
  uint64_t seed = 1;

  void validate() const {
    array.validate();
    model.validate();
    beam.validate();
    train.validate();
    scene.validate();
    require(model.mics == array.size(), Errc::config,
            "model expects " + std::to_string(model.mics) + " mics, array has " + std::to_string(array.size()));
    require(scene.array.size() == array.size(), Errc::config, "scene array differs from the engine array");
    require(std::isfinite(theta), Errc::config, "theta must be finite");
  }
};

inline ArrayGeometry array_preset(const std::string& name) {
  if (name == "circle6") return circular_array(6, 0.05);
  if (name == "circle4") return circular_array(4, 0.05);
  throw Error(Errc::config, "unknown array preset '" + name + "' (circle6, circle4)");
}

namespace detail {

using json = nlohmann::json;

// Reads known keys from one JSON object and rejects the rest.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j_.is_object(), Errc::config, where_ + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void get(const char* key, T& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      dst = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(Errc::config, where_ + "." + key + " has the wrong type");
    }
  }

  const json& sub(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      require(seen_.count(it.key()) > 0, Errc::config, "unknown key " + where_ + "." + it.key());
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline Vec3 vec3_from(const json& j, const std::string& where) {
  require(j.is_array() && j.size() == 3 && j[0].is_number() && j[1].is_number() && j[2].is_number(), Errc::config,
          where + " must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline void read_array(const json& j, EngineConfig& c) {
  if (j.is_string()) {
    c.array_preset = j.get<std::string>();
    c.array = array_preset(c.array_preset);
    return;
  }
  StrictObject o(j, "array");
  std::string preset;
  o.get("preset", preset);
  if (!preset.empty()) {
    require(!o.has("positions"), Errc::config, "array: give either preset or positions");
    c.array_preset = preset;
    c.array = array_preset(preset);
  }
  if (o.has("positions")) {
    const json& p = o.sub("positions");
    require(p.is_array() && !p.empty(), Errc::config, "array.positions must be a non-empty list");
    c.array_preset.clear();
    c.array.positions.clear();
    for (std::size_t i = 0; i < p.size(); ++i)
      c.array.positions.push_back(vec3_from(p[i], "array.positions[" + std::to_string(i) + "]"));
  }
  o.get("speed_of_sound", c.array.speed_of_sound);
  o.finish();
}

inline void read_model(const json& j, EngineConfig& c) {
  if (j.is_string()) {
    c.model_preset = j.get<std::string>();
    c.model = ModelConfig::preset(c.model_preset);
    return;
  }
  StrictObject o(j, "model");
  o.get("preset", c.model_preset);
  c.model = ModelConfig::preset(c.model_preset);
  ModelConfig& m = c.model;
  o.get("k", m.k);
  o.get("N", m.N);
  o.get("M", m.M);
  o.get("H", m.H);
  o.get("C", m.C);
  o.get("D", m.D);
  o.get("kernel", m.kernel);
  o.get("enc_kernel", m.enc_kernel);
  o.get("enc_stride", m.enc_stride);
  o.get("mics", m.mics);
  o.get("use_beamformers", m.use_beamformers);
  o.get("shared_hri", m.shared_hri);
  o.get("norm_eps", m.norm_eps);
  o.finish();
}

inline void read_beam(const json& j, BeamParams& b) {
  StrictObject o(j, "beam");
  o.get("lambda", b.lambda);
  o.get("delta_rel", b.delta_rel);
  o.get("delta_floor", b.delta_floor);
  o.get("sd_epsilon", b.sd_epsilon);
  o.get("mask_floor", b.mask_floor);
  o.get("mask_eps", b.mask_eps);
  o.finish();
}

inline void read_train(const json& j, TrainConfig& t) {
  StrictObject o(j, "train");
  o.get("lr", t.adam.lr);
  o.get("beta1", t.adam.beta1);
  o.get("beta2", t.adam.beta2);
  o.get("eps", t.adam.eps);
  o.get("clip_norm", t.adam.clip_norm);
  o.get("si_sdr_weight", t.loss.si_sdr);
  o.get("l1_weight", t.loss.l1);
  o.get("batch", t.batch);
  o.get("epochs", t.epochs);
  o.get("crop_seconds", t.crop_seconds);
  o.get("time_budget_s", t.time_budget_s);
  o.get("max_steps", t.max_steps);
  o.get("plateau_patience", t.plateau_patience);
  o.get("min_lr", t.min_lr);
  o.get("cache_mb", t.cache_mb);
  o.finish();
}

inline void read_scene(const json& j, SceneConfig& s) {
  StrictObject o(j, "scene");
  if (o.has("room_min")) s.room_min = vec3_from(o.sub("room_min"), "scene.room_min");
  if (o.has("room_max")) s.room_max = vec3_from(o.sub("room_max"), "scene.room_max");
  o.get("rt60_min", s.rt60_min);
  o.get("rt60_max", s.rt60_max);
  if (o.has("count_weights")) {
    const json& w = o.sub("count_weights");
    require(w.is_array() && w.size() == 4, Errc::config, "scene.count_weights needs 4 entries (1..4 sources)");
    for (int i = 0; i < 4; ++i) {
      require(w[i].is_number(), Errc::config, "scene.count_weights entries must be numbers");
      s.count_weights[i] = w[i].get<double>();
    }
  }
  o.get("min_distance", s.min_distance);
  o.get("min_separation_deg", s.min_separation_deg);
  o.get("theta_error_deg", s.theta_error_deg);
  o.get("gain_min_db", s.gain_min_db);
  o.get("gain_max_db", s.gain_max_db);
  o.get("snr_min_db", s.snr_min_db);
  o.get("snr_max_db", s.snr_max_db);
  o.get("clip_seconds", s.clip_seconds);
  o.get("min_overlap", s.min_overlap);
  o.get("height_jitter", s.height_jitter);
  o.get("wall_margin", s.wall_margin);
  o.get("calibrate_rt60", s.calibrate_rt60);
  o.finish();
}

inline void read_paths(const json& j, EnginePaths& p) {
  StrictObject o(j, "paths");
  o.get("weights", p.weights);
  o.get("dataset", p.dataset);
  o.get("train_dir", p.train_dir);
  o.get("val_dir", p.val_dir);
  o.get("out_dir", p.out_dir);
  o.finish();
}

}  // namespace detail

// Applies a JSON document on top of the defaults. The model's mic count
// follows the array unless the model object sets it.
inline EngineConfig engine_config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  detail::StrictObject o(j, "config");
  if (o.has("array")) detail::read_array(o.sub("array"), c);
  if (o.has("model")) detail::read_model(o.sub("model"), c);
  const bool explicit_mics = o.has("model") && j.at("model").is_object() && j.at("model").contains("mics");
  if (!explicit_mics) c.model.mics = c.array.size();
  if (o.has("beam")) detail::read_beam(o.sub("beam"), c.beam);
  if (o.has("train")) detail::read_train(o.sub("train"), c.train);
  if (o.has("scene")) detail::read_scene(o.sub("scene"), c.scene);
  if (o.has("paths")) detail::read_paths(o.sub("paths"), c.paths);
  double theta_deg = rad2deg(c.theta);
  o.get("theta_deg", theta_deg);
  c.theta = wrap_angle(deg2rad(theta_deg));
  o.get("seed", c.seed);
  o.finish();
  c.scene.array = c.array;
  c.train.seed = c.seed;
  c.validate();
  return c;
}

inline EngineConfig parse_engine_config(const std::string& text, const std::string& what = "config") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::config, what + ": " + e.what());
  }
  return engine_config_from_json(j);
}

inline EngineConfig load_engine_config(const std::string& path) {
  std::ifstream f(path);
  require(bool(f), Errc::io, "cannot open config " + path);
  std::stringstream s;
  s << f.rdbuf();
  return parse_engine_config(s.str(), path);
}

// Canonical form: every field, keys sorted (nlohmann::json objects are ordered maps).
inline nlohmann::json scene_json(const SceneConfig& s) {
  nlohmann::json j;
  j["room_min"] = detail::vec3_json(s.room_min);
  j["room_max"] = detail::vec3_json(s.room_max);
  j["rt60_min"] = s.rt60_min;
  j["rt60_max"] = s.rt60_max;
  j["count_weights"] = s.count_weights;
  j["min_distance"] = s.min_distance;
  j["min_separation_deg"] = s.min_separation_deg;
  j["theta_error_deg"] = s.theta_error_deg;
  j["gain_min_db"] = s.gain_min_db;
  j["gain_max_db"] = s.gain_max_db;
  j["snr_min_db"] = s.snr_min_db;
  j["snr_max_db"] = s.snr_max_db;
  j["clip_seconds"] = s.clip_seconds;
  j["min_overlap"] = s.min_overlap;
  j["height_jitter"] = s.height_jitter;
  j["wall_margin"] = s.wall_margin;
  j["calibrate_rt60"] = s.calibrate_rt60;
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& p : s.array.positions) pos.push_back(detail::vec3_json(p));
  j["array"] = {{"positions", pos}, {"speed_of_sound", s.array.speed_of_sound}};
  return j;
}

inline nlohmann::json engine_config_json(const EngineConfig& c) {
  nlohmann::json j;
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& p : c.array.positions) pos.push_back(detail::vec3_json(p));
  j["array"] = {{"positions", pos}, {"speed_of_sound", c.array.speed_of_sound}};
  const ModelConfig& m = c.model;
  j["model"] = {{"preset", c.model_preset}, {"k", m.k}, {"N", m.N}, {"M", m.M}, {"H", m.H}, {"C", m.C}, {"D", m.D},
                {"kernel", m.kernel}, {"enc_kernel", m.enc_kernel}, {"enc_stride", m.enc_stride}, {"mics", m.mics},
                {"use_beamformers", m.use_beamformers}, {"shared_hri", m.shared_hri}, {"norm_eps", m.norm_eps}};
  const BeamParams& b = c.beam;
  j["beam"] = {{"lambda", b.lambda},         {"delta_rel", b.delta_rel}, {"delta_floor", b.delta_floor},
               {"sd_epsilon", b.sd_epsilon}, {"mask_floor", b.mask_floor}, {"mask_eps", b.mask_eps}};
  const TrainConfig& t = c.train;
  j["train"] = {{"lr", t.adam.lr},
                {"beta1", t.adam.beta1},
                {"beta2", t.adam.beta2},
                {"eps", t.adam.eps},
                {"clip_norm", t.adam.clip_norm},
                {"si_sdr_weight", t.loss.si_sdr},
                {"l1_weight", t.loss.l1},
                {"batch", t.batch},
                {"epochs", t.epochs},
                {"crop_seconds", t.crop_seconds},
                {"time_budget_s", t.time_budget_s},
                {"max_steps", t.max_steps},
                {"plateau_patience", t.plateau_patience},
                {"min_lr", t.min_lr},
                {"cache_mb", t.cache_mb}};
  nlohmann::json sc = scene_json(c.scene);
  sc.erase("array");
  j["scene"] = sc;
  j["paths"] = {{"weights", c.paths.weights},
                {"dataset", c.paths.dataset},
                {"train_dir", c.paths.train_dir},
                {"val_dir", c.paths.val_dir},
                {"out_dir", c.paths.out_dir}};
  j["theta_deg"] = rad2deg(c.theta);
  j["seed"] = c.seed;
  return j;
}

// Hash recorded in a dataset manifest: generation config, seed and count.
inline std::string dataset_config_hash(const SceneConfig& s, uint64_t seed, std::size_t count) {
  nlohmann::json j = {{"scene", scene_json(s)}, {"seed", seed}, {"count", count}};
  return hex64(fnv1a64(j.dump()));
}

}  // namespace dirhear
