#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmenc/io.hpp"
#include "mmenc/tensor.hpp"
#include "mmenc/text.hpp"

namespace mmenc {

enum class Hemisphere { Left, Right };

inline const char* hemisphere_name(Hemisphere h) { return h == Hemisphere::Left ? "LH" : "RH"; }

// Anatomical stream labels, in report order.
inline constexpr std::array<const char*, 7> kStreams = {"early",   "midventral", "midlateral", "midparietal",
                                                        "ventral", "lateral",    "parietal"};

bool is_stream(std::string_view name);

// Stream label for every voxel of each hemisphere, plus optional free-form
// functional labels (empty, or one per voxel).
struct RoiAtlas {
  std::vector<std::string> lh;
  std::vector<std::string> rh;
  std::vector<std::string> lh_functional;
  std::vector<std::string> rh_functional;

  const std::vector<std::string>& streams(Hemisphere h) const { return h == Hemisphere::Left ? lh : rh; }
  // Voxels split into seven contiguous, near-equal runs, one per stream.
  static RoiAtlas even_partition(Index voxels_lh, Index voxels_rh);
  void validate(Index voxels_lh, Index voxels_rh) const;

  bool operator==(const RoiAtlas&) const = default;
};

struct StimulusSample {
  std::string stimulus_id;
  std::string subject_id;
  Tensor<float> image;                // [C × H × W]
  std::vector<std::string> captions;  // candidates, at least one
  std::size_t selected = 0;           // index into captions
  std::string image_tags;             // reference words used for caption selection
  Eigen::VectorXf voxels_lh;
  Eigen::VectorXf voxels_rh;
  Index repeat_count = 1;

  const std::string& selected_caption() const { return captions.at(selected); }
};

// Noise-free quantities retained by the synthetic generator.
struct GroundTruth {
  Matrix<float> signal_lh;    // [samples × voxels_lh]
  Matrix<float> signal_rh;    // [samples × voxels_rh]
  Matrix<float> latents_img;  // [samples × k_img]
  Matrix<float> latents_txt;  // [samples × k_txt]
  Matrix<float> mixing_img;   // [voxels_lh + voxels_rh × k_img]
  Matrix<float> mixing_txt;   // [voxels_lh + voxels_rh × k_txt]

  bool operator==(const GroundTruth&) const = default;
};

struct Dataset {
  static constexpr int kVersion = 1;

  std::vector<std::string> subjects;
  Index channels = 3;
  Index height = 32;
  Index width = 32;
  Index voxels_lh = 0;
  Index voxels_rh = 0;
  Vocabulary vocab;
  RoiAtlas atlas;
  std::vector<StimulusSample> samples;
  std::optional<GroundTruth> truth;

  Index size() const { return static_cast<Index>(samples.size()); }
  Index voxels(Hemisphere h) const { return h == Hemisphere::Left ? voxels_lh : voxels_rh; }
  Index total_voxels() const { return voxels_lh + voxels_rh; }

  // Responses of the given samples, [rows × voxels] for one hemisphere.
  Matrix<float> responses(Hemisphere h, std::span<const Index> rows) const;
  // Both hemispheres side by side, left first.
  Matrix<float> responses(std::span<const Index> rows) const;

  // Throws on any internal inconsistency (dims, atlas, captions).
  void validate() const;
};

bool operator==(const StimulusSample& a, const StimulusSample& b);
bool operator==(const Dataset& a, const Dataset& b);

// Directory container: manifest.json, captions.tsv, images.bin,
// voxels_lh.bin, voxels_rh.bin, and truth_*.bin when ground truth exists.
// Arrays are little-endian float32, row-major, shaped by the manifest.
// `run` is stored in the manifest as provenance and ignored on load.
void save_dataset(const Dataset& d, const std::filesystem::path& dir, const io::KeyValues& run = {});
Dataset load_dataset(const std::filesystem::path& dir);

// Content hash over the dataset's array and caption files.
std::string dataset_fingerprint(const std::filesystem::path& dir);

}  // namespace mmenc
