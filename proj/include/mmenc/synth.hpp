#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "mmenc/dataset.hpp"
#include "mmenc/io.hpp"

namespace mmenc {

// Recipe for a synthetic dataset with known ground truth. Each voxel's noiseless
// signal is a unit-variance mix of an image-latent projection and a
// caption-latent projection; `text_dependence_fraction` is the caption share
// of that variance.
struct SynthSpec {
  Index n_samples = 512;
  Index voxels_lh = 50;
  Index voxels_rh = 50;
  Index channels = 3;
  Index height = 32;
  Index width = 32;
  Index vocab_size = 64;
  Index k_img = 4;
  Index k_txt = 4;
  double noise_sigma = 0.75;
  double text_dependence_fraction = 0.5;
  Index sessions = 1;
  Index repeats = 1;
  double session_drift = 0.0;  // per-session voxel offsets, removed by z-scoring
  Index caption_candidates = 5;
  std::string subject = "subj01";
  std::uint64_t seed = 0;

  // Throws ConfigError naming every invalid field.
  void validate() const;
  bool operator==(const SynthSpec&) const = default;
};

SynthSpec synth_spec_from(const io::KeyValues& kv, SynthSpec base = {});
io::KeyValues to_key_values(const SynthSpec& s);

// Pure function of the spec; the returned dataset carries its GroundTruth.
Dataset generate_synthetic(const SynthSpec& spec);

// Per-voxel correlation between the noiseless signal and the observed
// responses over `rows` (left hemisphere voxels first). Requires ground truth.
Eigen::VectorXd noise_ceiling(const Dataset& d, std::span<const Index> rows);

// Replaces each token of every selected caption, with probability `rate`, by a
// uniformly drawn vocabulary word.
Dataset corrupt_captions(const Dataset& d, double rate, std::uint64_t seed);

}  // namespace mmenc
