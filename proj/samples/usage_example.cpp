// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Library walkthrough: simulate a two-talker room, then separate the target
// block by block with a stream and compare against the offline path.
//
//   usage_example [weights.ckpt]
//
// Without a checkpoint the network is randomly initialised, so the output is
// not speech; the plumbing and the numbers it prints are the point.

#include <cstdio>
#include <random>

#include "dirhear/engine/stream.hpp"
#include "dirhear/room/scene.hpp"
#include "dirhear/train/metrics.hpp"

using namespace dirhear;

int main(int argc, char** argv) try {
  // 1. A simulated scene: two speakers in a reverberant room, 6-mic circle.
  SceneConfig sc;
  sc.count_weights = {0, 1, 0, 0};
  sc.clip_seconds = 3.0;
  sc.rt60_max = 0.3;
  std::mt19937_64 rng(7);
  SceneSpec scene = sample_scene(rng, sc);
  TrainingClip clip = render_clip(scene, rng);
  std::printf("room %.1f x %.1f x %.1f m, RT60 %.2f s, target at %.0f deg\n", scene.room.dims.x, scene.room.dims.y,
              scene.room.dims.z, scene.rt60, rad2deg(scene.input_theta));

  // 2. Weights: a trained checkpoint, or a random toy model.
  ModelWeights<float> w = [&] {
    if (argc > 1) return load_checkpoint<float>(argv[1]);
    ModelWeights<float> r(ModelConfig::toy());
    init_weights(r, 1);
    return r;
  }();

  // 3. Stream 128-sample blocks; the output lags the input by delay_samples().
  auto st = stream_create(w, sc.array, scene.input_theta);
  const std::size_t L = clip.mixture.samples();
  MultichannelBuffer<double> block(sc.array.size(), kBlockSize);
  std::vector<float> live;
  for (std::size_t t0 = 0; t0 + kBlockSize <= L; t0 += kBlockSize) {
    for (int c = 0; c < sc.array.size(); ++c)
      for (int i = 0; i < kBlockSize; ++i) block[c][i] = clip.mixture[c][t0 + i];
    auto out = st.process_block(block);
    live.insert(live.end(), out.begin(), out.end());
  }
  std::printf("streamed %ld blocks, delay %d samples, last block %.3f ms\n", st.blocks(), st.delay_samples(),
              st.last_timing().prebeam_ms + st.last_timing().nn_ms);

  // 4. The offline path gives the same samples, aligned to the input.
  auto offline = separate_offline(w, sc.array, scene.input_theta, BeamParams{}, clip.mixture);
  double diff = 0;
  for (std::size_t t = 0; t + st.delay_samples() < live.size(); ++t)
    diff = std::max(diff, double(std::abs(live[t + st.delay_samples()] - offline[t])));
  std::printf("max |stream - offline| = %.2g\n", diff);

  // 5. Score against the dry target.
  std::vector<double> est(offline.begin(), offline.end());
  std::printf("SI-SDR mixture %.2f dB, output %.2f dB\n", si_sdr(clip.mixture[0], clip.target_dry),
              si_sdr(est, clip.target_dry));

  // 6. Steering changes take effect on the next block.
  st.set_theta(scene.input_theta + deg2rad(90));
  std::printf("re-steered to %.0f deg\n", rad2deg(st.theta()));
  return 0;
} catch (const std::exception& e) {
  std::fprintf(stderr, "usage_example: %s\n", e.what());
  return 1;
}
