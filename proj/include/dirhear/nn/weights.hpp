// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Parameter layout, initialisation and checkpoint I/O.
//
// Complex tensors are real matrices with the real part in the top half of
// the rows and the imaginary part in the bottom half. Dilated conv weights
// are 2Co x (K*Ci) with column = tap*Ci + ci; tap K-1 is the current frame.
// TReLU parameters are rows (h_rr, h_ri, h_ii, b1, b2[, h_ir]) x channels.
// Norm parameters are 2Ch x 2: column 0 the complex scale, column 1 the bias.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dirhear/nn/config.hpp"
#include "dirhear/signal/wav.hpp"

namespace dirhear {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

enum class TensorKind { real, complex_weight, complex_bias, trelu, norm, downsample };

struct TensorSpec {
  std::string name;
  int rows = 0, cols = 0;  // storage shape
  TensorKind kind = TensorKind::real;
  int fan_in = 0, fan_out = 0;
  bool is_complex() const { return kind != TensorKind::real && kind != TensorKind::trelu; }
};

// Every tensor of the model in checkpoint order; shapes depend on the config only.
inline std::vector<TensorSpec> tensor_specs(const ModelConfig& c) {
  c.validate();
  const int K = c.dilated_kernel(), Ci = c.in_channels(), P = c.trelu_rows();
  std::vector<TensorSpec> v;
  auto cw = [&](const std::string& n, int co, int ci, int taps) {
    v.push_back({n + ".w", 2 * co, ci * taps, TensorKind::complex_weight, ci * taps, co * taps});
    v.push_back({n + ".b", 2 * co, 1, TensorKind::complex_bias, 0, 0});
  };
  auto act = [&](const std::string& n, int ch) {
    v.push_back({n + ".act", P, ch, TensorKind::trelu, 0, 0});
    v.push_back({n + ".norm", 2 * ch, 2, TensorKind::norm, 0, 0});
  };
  v.push_back({"enc.w", 2 * c.C, Ci * c.enc_kernel, TensorKind::real, Ci * c.enc_kernel, 2 * c.C});
  for (int s = 0; s < c.N; ++s) {
    std::string p = "s" + std::to_string(s);
    if (s > 0) {
      v.push_back({p + ".down.w", 2 * c.C, 2, TensorKind::downsample, 2, 1});
      v.push_back({p + ".down.b", 2 * c.C, 1, TensorKind::complex_bias, 0, 0});
    }
    cw(p + ".in", c.H, c.C, 1);
    act(p + ".in", c.H);
    for (int m = 0; m < c.M; ++m) {
      cw(p + ".l" + std::to_string(m), c.H, c.H, K);
      act(p + ".l" + std::to_string(m), c.H);
    }
    cw(p + ".skip", c.D, c.H, 1);
    if (s < c.N - 1) cw(p + ".out", c.C, c.H, 1);
  }
  act("head0", c.D);
  cw("head.mid", c.D, c.D, 1);
  act("head1", c.D);
  cw("head.mask", c.C, c.D, 1);
  v.push_back({"dec.w", c.enc_kernel, 2 * c.C, TensorKind::real, 2 * c.C, c.enc_kernel});
  return v;
}

template <typename T>
struct ModelWeights {
  ModelConfig config;
  std::vector<TensorSpec> specs;
  std::vector<Mat<T>> tensors;
  std::map<std::string, int> index;

  ModelWeights() = default;
  explicit ModelWeights(const ModelConfig& c) : config(c), specs(tensor_specs(c)) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      tensors.emplace_back(Mat<T>::Zero(specs[i].rows, specs[i].cols));
      index[specs[i].name] = int(i);
    }
  }

  int id(const std::string& name) const {
    auto it = index.find(name);
    require(it != index.end(), Errc::internal, "no tensor named " + name);
    return it->second;
  }
  Mat<T>& operator[](const std::string& name) { return tensors[id(name)]; }
  const Mat<T>& operator[](const std::string& name) const { return tensors[id(name)]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : specs) n += std::size_t(s.rows) * s.cols;
    return n;
  }

  template <typename U>
  ModelWeights<U> cast() const {
    ModelWeights<U> w(config);
    for (std::size_t i = 0; i < tensors.size(); ++i) w.tensors[i] = tensors[i].template cast<U>();
    return w;
  }
};

// Complex Glorot: Rayleigh magnitude with sigma = 1/sqrt(fan_in + fan_out),
// uniform phase. Real tensors: Glorot uniform. TReLU starts at CReLU, norms
// at identity, downsamplers at the two-frame average.
template <typename T>
void init_weights(ModelWeights<T>& w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (std::size_t i = 0; i < w.specs.size(); ++i) {
    const auto& s = w.specs[i];
    Mat<T>& m = w.tensors[i];
    m.setZero();
    switch (s.kind) {
      case TensorKind::real: {
        double a = std::sqrt(6.0 / double(s.fan_in + s.fan_out));
        for (int c = 0; c < m.cols(); ++c)
          for (int r = 0; r < m.rows(); ++r) m(r, c) = T(a * (2.0 * U(rng) - 1.0));
        break;
      }
      case TensorKind::complex_weight: {
        double sigma = 1.0 / std::sqrt(double(s.fan_in + s.fan_out));
        const int h = s.rows / 2;
        for (int c = 0; c < m.cols(); ++c)
          for (int r = 0; r < h; ++r) {
            double mag = sigma * std::sqrt(-2.0 * std::log(1.0 - U(rng)));
            double ph = 2.0 * std::numbers::pi * U(rng);
            m(r, c) = T(mag * std::cos(ph));
            m(r + h, c) = T(mag * std::sin(ph));
          }
        break;
      }
      case TensorKind::trelu:
        m.row(0).setOnes();
        m.row(2).setOnes();
        break;
      case TensorKind::norm:
        m.block(0, 0, s.rows / 2, 1).setOnes();
        break;
      case TensorKind::downsample:
        m.block(0, 0, s.rows / 2, 2).setConstant(T(0.5));
        break;
      case TensorKind::complex_bias:
        break;
    }
  }
}

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'D', 'H', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

template <typename V>
void put(std::vector<char>& b, V v) {
  const char* p = reinterpret_cast<const char*>(&v);
  b.insert(b.end(), p, p + sizeof(V));
}

struct Reader {
  const std::vector<char>& b;
  std::size_t pos = 0;
  std::string what;
  template <typename V>
  V get() {
    require(pos + sizeof(V) <= b.size(), Errc::io, what + ": truncated checkpoint");
    V v;
    std::memcpy(&v, b.data() + pos, sizeof(V));
    pos += sizeof(V);
    return v;
  }
};

inline void put_config(std::vector<char>& b, const ModelConfig& c) {
  for (int v : {c.k, c.N, c.M, c.H, c.C, c.D, c.kernel, c.enc_kernel, c.enc_stride, c.mics, int(c.use_beamformers),
                int(c.shared_hri)})
    put<int32_t>(b, v);
  put<double>(b, c.norm_eps);
}

inline ModelConfig get_config(Reader& r) {
  ModelConfig c;
  int* f[] = {&c.k, &c.N, &c.M, &c.H, &c.C, &c.D, &c.kernel, &c.enc_kernel, &c.enc_stride, &c.mics};
  for (int* p : f) *p = r.get<int32_t>();
  c.use_beamformers = r.get<int32_t>() != 0;
  c.shared_hri = r.get<int32_t>() != 0;
  c.norm_eps = r.get<double>();
  return c;
}

}  // namespace detail

// Little-endian layout: magic[8], u32 version, config (12 x i32, f64),
// u32 tensor count, then per tensor u32 rows, u32 cols and float32 values:
// real tensors column-major, complex tensors the real half column-major
// followed by the imaginary half. Trailing u64 length + opaque optimizer blob.
template <typename T>
std::vector<char> encode_checkpoint(const ModelWeights<T>& w, const std::vector<char>& optimizer_blob = {}) {
  std::vector<char> b(detail::kCheckpointMagic, detail::kCheckpointMagic + 8);
  detail::put<uint32_t>(b, detail::kCheckpointVersion);
  detail::put_config(b, w.config);
  detail::put<uint32_t>(b, uint32_t(w.tensors.size()));
  for (std::size_t i = 0; i < w.tensors.size(); ++i) {
    const auto& m = w.tensors[i];
    detail::put<uint32_t>(b, uint32_t(m.rows()));
    detail::put<uint32_t>(b, uint32_t(m.cols()));
    if (w.specs[i].is_complex()) {
      const int h = int(m.rows()) / 2;
      for (int half = 0; half < 2; ++half)
        for (int c = 0; c < m.cols(); ++c)
          for (int r = 0; r < h; ++r) detail::put<float>(b, float(m(half * h + r, c)));
    } else {
      for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r) detail::put<float>(b, float(m(r, c)));
    }
  }
  detail::put<uint64_t>(b, uint64_t(optimizer_blob.size()));
  b.insert(b.end(), optimizer_blob.begin(), optimizer_blob.end());
  return b;
}

template <typename T>
void save_checkpoint(const std::string& path, const ModelWeights<T>& w, const std::vector<char>& optimizer_blob = {}) {
  atomic_write_file(path, encode_checkpoint(w, optimizer_blob));
}

template <typename T>
ModelWeights<T> decode_checkpoint(const std::vector<char>& bytes, const std::string& what,
                                  std::vector<char>* optimizer_blob = nullptr) {
  detail::Reader r{bytes, 0, what};
  require(bytes.size() >= 8 && std::memcmp(bytes.data(), detail::kCheckpointMagic, 8) == 0, Errc::io,
          what + ": not a dirhear checkpoint");
  r.pos = 8;
  uint32_t ver = r.get<uint32_t>();
  require(ver == detail::kCheckpointVersion, Errc::io, what + ": unsupported checkpoint version " + std::to_string(ver));
  ModelConfig c = detail::get_config(r);
  c.validate();
  ModelWeights<T> w(c);
  uint32_t n = r.get<uint32_t>();
  require(n == w.tensors.size(), Errc::io, what + ": tensor count does not match the stored config");
  for (std::size_t i = 0; i < n; ++i) {
    auto& m = w.tensors[i];
    uint32_t rows = r.get<uint32_t>(), cols = r.get<uint32_t>();
    require(rows == m.rows() && cols == m.cols(), Errc::io, what + ": shape mismatch for " + w.specs[i].name);
    require(r.pos + std::size_t(rows) * cols * 4 <= bytes.size(), Errc::io, what + ": truncated checkpoint");
    if (w.specs[i].is_complex()) {
      const int h = int(rows) / 2;
      for (int half = 0; half < 2; ++half)
        for (int cc = 0; cc < int(cols); ++cc)
          for (int rr = 0; rr < h; ++rr) m(half * h + rr, cc) = T(r.get<float>());
    } else {
      for (int cc = 0; cc < int(cols); ++cc)
        for (int rr = 0; rr < int(rows); ++rr) m(rr, cc) = T(r.get<float>());
    }
  }
  uint64_t blob = r.get<uint64_t>();
  require(r.pos + blob == bytes.size(), Errc::io, what + ": checkpoint length does not match its contents");
  if (optimizer_blob) optimizer_blob->assign(bytes.begin() + long(r.pos), bytes.end());
  return w;
}

template <typename T>
ModelWeights<T> load_checkpoint(const std::string& path, std::vector<char>* optimizer_blob = nullptr) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), Errc::io, "cannot open weights file " + path);
  std::vector<char> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint<T>(b, path, optimizer_blob);
}

}  // namespace dirhear
