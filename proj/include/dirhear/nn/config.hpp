// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Hyperparameters of the complex separation network and the two shipped
// presets.

#pragma once

#include <string>

#include "dirhear/core/error.hpp"
#include "dirhear/signal/buffer.hpp"

namespace dirhear {

struct ModelConfig {
  int k = 4;        // dilation growth factor
  int N = 3;        // TCN stacks
  int M = 3;        // dilated layers per stack
  int H = 64;       // hidden channels inside a stack
  int C = 64;       // encoder channels (latent / trunk)
  int D = 256;      // skip and mask-head channels
  int kernel = 0;   // dilated conv kernel; 0 means k
  int enc_kernel = 32;
  int enc_stride = 8;
  int mics = 6;
  bool use_beamformers = true;  // false: only the aligned mic channels enter
  bool shared_hri = true;       // TReLU uses h_ri in both rows
  double norm_eps = 1e-8;

  int dilated_kernel() const { return kernel > 0 ? kernel : k; }
  int in_channels() const { return mics + (use_beamformers ? 3 : 0); }
  int trelu_rows() const { return shared_hri ? 5 : 6; }
  int frames_per_block() const { return kBlockSize / enc_stride; }
  int lookahead_samples() const { return enc_kernel - enc_stride; }
  double frame_rate() const { return double(kSampleRate) / enc_stride; }

  void validate() const {
    require(k >= 2, Errc::config, "k must be >= 2");
    require(N >= 1 && M >= 1, Errc::config, "N and M must be >= 1");
    require(H >= 1 && C >= 1 && D >= 1, Errc::config, "channel counts must be >= 1");
    require(dilated_kernel() >= 2, Errc::config, "dilated kernel must be >= 2");
    require(enc_stride >= 1 && enc_kernel > enc_stride, Errc::config, "encoder kernel must exceed its stride");
    require(enc_kernel % enc_stride == 0, Errc::config, "encoder kernel must be a multiple of the stride");
    require(kBlockSize % enc_stride == 0, Errc::config, "stride must divide the 128-sample block");
    require(frames_per_block() % (1 << (N - 1)) == 0, Errc::config,
            "2^(N-1) must divide the latent frames per block (N <= 5 at stride 8)");
    require(mics >= 1 && mics <= 8, Errc::config, "mics must be in 1..8");
    require(norm_eps > 0, Errc::config, "norm_eps must be positive");
  }

  bool operator==(const ModelConfig&) const = default;

  // Shipped presets on the 6-mic circle.
  static ModelConfig hybridbeam() { return {}; }
  static ModelConfig hybridbeam_plus() {
    ModelConfig c;
    c.k = 3;
    c.N = 4;
    c.M = 4;
    c.H = 96;
    return c;
  }
  // Reduced configuration for desk-scale training.
  static ModelConfig toy() {
    ModelConfig c;
    c.k = 4;
    c.N = 2;
    c.M = 2;
    c.H = 32;
    c.C = 32;
    c.D = 64;
    return c;
  }
  static ModelConfig preset(const std::string& name) {
    if (name == "hybridbeam") return hybridbeam();
    if (name == "hybridbeam-plus") return hybridbeam_plus();
    if (name == "toy") return toy();
    throw Error(Errc::config, "unknown model preset '" + name + "' (hybridbeam, hybridbeam-plus, toy)");
  }
};

}  // namespace dirhear
