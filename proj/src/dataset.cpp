#include "mmenc/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>

#include "mmenc/io.hpp"

namespace mmenc {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_stream(std::string_view name) {
  return std::any_of(kStreams.begin(), kStreams.end(), [&](const char* s) { return name == s; });
}

RoiAtlas RoiAtlas::even_partition(Index voxels_lh, Index voxels_rh) {
  auto split = [](Index n) {
    std::vector<std::string> labels(static_cast<std::size_t>(n));
    const Index streams = static_cast<Index>(kStreams.size());
    for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = kStreams[static_cast<std::size_t>(i * streams / n)];
    return labels;
  };
  RoiAtlas a;
  a.lh = split(voxels_lh);
  a.rh = split(voxels_rh);
  return a;
}

void RoiAtlas::validate(Index voxels_lh, Index voxels_rh) const {
  auto check = [](const std::vector<std::string>& labels, const std::vector<std::string>& functional, Index n,
                  const char* hemi) {
    if (static_cast<Index>(labels.size()) != n) {
      throw ShapeDisagreementError(std::string("atlas ") + hemi + " has " + std::to_string(labels.size()) +
                                   " labels for " + std::to_string(n) + " voxels");
    }
    if (!functional.empty() && static_cast<Index>(functional.size()) != n) {
      throw ShapeDisagreementError(std::string("atlas ") + hemi + " functional labels do not cover every voxel");
    }
    for (const auto& l : labels) {
      if (!is_stream(l)) throw DataError(std::string("atlas ") + hemi + ": unknown stream label '" + l + "'");
    }
  };
  check(lh, lh_functional, voxels_lh, "lh");
  check(rh, rh_functional, voxels_rh, "rh");
}

Matrix<float> Dataset::responses(Hemisphere h, std::span<const Index> rows) const {
  Matrix<float> out(static_cast<Index>(rows.size()), voxels(h));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& s = samples.at(static_cast<std::size_t>(rows[i]));
    out.row(static_cast<Index>(i)) = (h == Hemisphere::Left ? s.voxels_lh : s.voxels_rh).transpose();
  }
  return out;
}

Matrix<float> Dataset::responses(std::span<const Index> rows) const {
  Matrix<float> out(static_cast<Index>(rows.size()), total_voxels());
  out.leftCols(voxels_lh) = responses(Hemisphere::Left, rows);
  out.rightCols(voxels_rh) = responses(Hemisphere::Right, rows);
  return out;
}

void Dataset::validate() const {
  if (channels < 1 || height < 1 || width < 1) throw DataError("dataset image dims must be positive");
  if (voxels_lh < 1 || voxels_rh < 1) throw DataError("dataset voxel counts must be positive");
  atlas.validate(voxels_lh, voxels_rh);
  for (const auto& s : samples) {
    if (s.image.shape() != Shape{channels, height, width}) {
      throw ShapeDisagreementError("sample " + s.stimulus_id + ": image " + shape_string(s.image.shape()) +
                                   " does not match dataset dims");
    }
    if (s.voxels_lh.size() != voxels_lh || s.voxels_rh.size() != voxels_rh) {
      throw ShapeDisagreementError("sample " + s.stimulus_id + ": voxel vectors do not match hemisphere dims");
    }
    if (s.captions.empty() || s.selected >= s.captions.size()) {
      throw DataError("sample " + s.stimulus_id + ": needs at least one caption and a valid selection");
    }
    if (s.repeat_count < 1) throw DataError("sample " + s.stimulus_id + ": repeat_count must be >= 1");
    auto clean = [](const std::string& t) { return t.find_first_of("\t\r\n") == std::string::npos; };
    if (!clean(s.image_tags) || !clean(s.stimulus_id) || !std::all_of(s.captions.begin(), s.captions.end(), clean)) {
      throw DataError("sample " + s.stimulus_id + ": text fields may not contain tabs or line breaks");
    }
  }
  if (truth) {
    const Index n = size();
    const auto& t = *truth;
    if (t.signal_lh.rows() != n || t.signal_lh.cols() != voxels_lh || t.signal_rh.rows() != n ||
        t.signal_rh.cols() != voxels_rh || t.latents_img.rows() != n || t.latents_txt.rows() != n ||
        t.mixing_img.rows() != total_voxels() || t.mixing_txt.rows() != total_voxels()) {
      throw ShapeDisagreementError("ground truth arrays do not match dataset dims");
    }
  }
}

bool operator==(const StimulusSample& a, const StimulusSample& b) {
  return a.stimulus_id == b.stimulus_id && a.subject_id == b.subject_id && a.image.shape() == b.image.shape() &&
         a.image.matrix() == b.image.matrix() && a.captions == b.captions && a.selected == b.selected &&
         a.image_tags == b.image_tags && a.voxels_lh == b.voxels_lh && a.voxels_rh == b.voxels_rh &&
         a.repeat_count == b.repeat_count;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.subjects == b.subjects && a.channels == b.channels && a.height == b.height && a.width == b.width &&
         a.voxels_lh == b.voxels_lh && a.voxels_rh == b.voxels_rh && a.vocab.words() == b.vocab.words() &&
         a.atlas == b.atlas && a.samples == b.samples && a.truth == b.truth;
}

namespace {

constexpr const char* kFormat = "mmenc-dataset";

json array_entry(const std::string& file, std::vector<Index> shape) { return json{{"file", file}, {"shape", shape}}; }

std::span<const float> span_of(const Matrix<float>& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

void write_matrix(const fs::path& dir, const std::string& file, const Matrix<float>& m) {
  io::write_f32(dir / file, span_of(m));
}

std::vector<Index> declared_shape(const json& arrays, const std::string& key) {
  if (!arrays.contains(key)) throw FormatError("manifest lists no array '" + key + "'");
  return arrays.at(key).at("shape").get<std::vector<Index>>();
}

void expect_shape(const std::vector<Index>& got, const std::vector<Index>& want, const std::string& key) {
  if (got != want) {
    throw ShapeDisagreementError("array '" + key + "' declared as " + shape_string(got) +
                                 " but manifest dims imply " + shape_string(want));
  }
}

Matrix<float> read_matrix(const fs::path& dir, const json& arrays, const std::string& key, Index rows, Index cols) {
  const auto shape = declared_shape(arrays, key);
  expect_shape(shape, {rows, cols}, key);
  const auto values = io::read_f32(dir / arrays.at(key).at("file").get<std::string>(),
                                   static_cast<std::size_t>(rows * cols));
  Matrix<float> m(rows, cols);
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto t = line.find('\t', pos);
    out.push_back(line.substr(pos, t == std::string::npos ? std::string::npos : t - pos));
    if (t == std::string::npos) break;
    pos = t + 1;
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& d, const fs::path& dir, const io::KeyValues& run) {
  d.validate();
  fs::create_directories(dir);
  const Index n = d.size();
  const Index pixels = d.channels * d.height * d.width;

  Matrix<float> images(n, pixels), lh(n, d.voxels_lh), rh(n, d.voxels_rh);
  json samples = json::array();
  std::ostringstream captions;
  captions << "stimulus_id\tselected\ttags\tcandidates\n";
  for (Index i = 0; i < n; ++i) {
    const auto& s = d.samples[static_cast<std::size_t>(i)];
    std::copy(s.image.values().begin(), s.image.values().end(), images.row(i).data());
    lh.row(i) = s.voxels_lh.transpose();
    rh.row(i) = s.voxels_rh.transpose();
    samples.push_back({{"stimulus_id", s.stimulus_id}, {"subject_id", s.subject_id}, {"repeat_count", s.repeat_count}});
    captions << s.stimulus_id << '\t' << s.selected << '\t' << s.image_tags;
    for (const auto& c : s.captions) captions << '\t' << c;
    captions << '\n';
  }

  json arrays = {{"images", array_entry("images.bin", {n, d.channels, d.height, d.width})},
                 {"voxels_lh", array_entry("voxels_lh.bin", {n, d.voxels_lh})},
                 {"voxels_rh", array_entry("voxels_rh.bin", {n, d.voxels_rh})}};
  write_matrix(dir, "images.bin", images);
  write_matrix(dir, "voxels_lh.bin", lh);
  write_matrix(dir, "voxels_rh.bin", rh);
  io::write_text(dir / "captions.tsv", captions.str());

  if (d.truth) {
    const auto& t = *d.truth;
    const std::vector<std::pair<std::string, const Matrix<float>*>> parts = {
        {"truth_signal_lh", &t.signal_lh},     {"truth_signal_rh", &t.signal_rh},
        {"truth_latents_img", &t.latents_img}, {"truth_latents_txt", &t.latents_txt},
        {"truth_mixing_img", &t.mixing_img},   {"truth_mixing_txt", &t.mixing_txt}};
    for (const auto& [key, m] : parts) {
      arrays[key] = array_entry(key + ".bin", {m->rows(), m->cols()});
      write_matrix(dir, key + ".bin", *m);
    }
  }

  json manifest = {{"format", kFormat},
                   {"version", Dataset::kVersion},
                   {"n_samples", n},
                   {"channels", d.channels},
                   {"height", d.height},
                   {"width", d.width},
                   {"voxels_lh", d.voxels_lh},
                   {"voxels_rh", d.voxels_rh},
                   {"subjects", d.subjects},
                   {"vocab", d.vocab.words()},
                   {"atlas",
                    {{"lh", d.atlas.lh},
                     {"rh", d.atlas.rh},
                     {"lh_functional", d.atlas.lh_functional},
                     {"rh_functional", d.atlas.rh_functional}}},
                   {"samples", samples},
                   {"captions", "captions.tsv"},
                   {"ground_truth", d.truth.has_value()},
                   {"arrays", arrays}};
  if (!run.empty()) manifest["run"] = run;
  io::write_text(dir / "manifest.json", manifest.dump(1) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw FormatError("no dataset manifest in " + dir.string());
  json m;
  try {
    m = json::parse(io::read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed dataset manifest: ") + e.what());
  }
  if (m.value("format", std::string{}) != kFormat) throw FormatError("not a dataset manifest: " + dir.string());
  const int version = m.value("version", -1);
  if (version != Dataset::kVersion) {
    throw VersionError("dataset container version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(Dataset::kVersion) + ")");
  }
  try {
    Dataset d;
    const Index n = m.at("n_samples").get<Index>();
    d.channels = m.at("channels").get<Index>();
    d.height = m.at("height").get<Index>();
    d.width = m.at("width").get<Index>();
    d.voxels_lh = m.at("voxels_lh").get<Index>();
    d.voxels_rh = m.at("voxels_rh").get<Index>();
    d.subjects = m.at("subjects").get<std::vector<std::string>>();
    d.vocab = Vocabulary(m.at("vocab").get<std::vector<std::string>>());
    const auto& atlas = m.at("atlas");
    d.atlas.lh = atlas.at("lh").get<std::vector<std::string>>();
    d.atlas.rh = atlas.at("rh").get<std::vector<std::string>>();
    d.atlas.lh_functional = atlas.value("lh_functional", std::vector<std::string>{});
    d.atlas.rh_functional = atlas.value("rh_functional", std::vector<std::string>{});
    d.atlas.validate(d.voxels_lh, d.voxels_rh);

    const auto& samples = m.at("samples");
    if (static_cast<Index>(samples.size()) != n) {
      throw ShapeDisagreementError("manifest lists " + std::to_string(samples.size()) + " samples but n_samples is " +
                                   std::to_string(n));
    }
    const auto& arrays = m.at("arrays");
    expect_shape(declared_shape(arrays, "images"), {n, d.channels, d.height, d.width}, "images");
    const Index pixels = d.channels * d.height * d.width;
    const auto images = io::read_f32(dir / arrays.at("images").at("file").get<std::string>(),
                                     static_cast<std::size_t>(n * pixels));
    const auto lh = read_matrix(dir, arrays, "voxels_lh", n, d.voxels_lh);
    const auto rh = read_matrix(dir, arrays, "voxels_rh", n, d.voxels_rh);

    std::istringstream captions(io::read_text(dir / m.value("captions", std::string("captions.tsv"))));
    std::string line;
    std::getline(captions, line);  // header
    d.samples.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      auto& s = d.samples[static_cast<std::size_t>(i)];
      const auto& meta = samples[static_cast<std::size_t>(i)];
      s.stimulus_id = meta.at("stimulus_id").get<std::string>();
      s.subject_id = meta.at("subject_id").get<std::string>();
      s.repeat_count = meta.at("repeat_count").get<Index>();
      s.image = Tensor<float>::from_values({d.channels, d.height, d.width},
                                           std::span<const float>(images.data() + i * pixels, static_cast<std::size_t>(pixels)));
      s.voxels_lh = lh.row(i).transpose();
      s.voxels_rh = rh.row(i).transpose();
      if (!std::getline(captions, line)) {
        throw ShapeDisagreementError("captions file has fewer rows than n_samples");
      }
      const auto fields = split_tabs(line);
      if (fields.size() < 4 || fields[0] != s.stimulus_id) {
        throw FormatError("captions row " + std::to_string(i) + " is malformed or out of order");
      }
      s.selected = static_cast<std::size_t>(std::stoul(fields[1]));
      s.image_tags = fields[2];
      s.captions.assign(fields.begin() + 3, fields.end());
    }
    if (std::getline(captions, line) && !line.empty()) {
      throw ShapeDisagreementError("captions file has more rows than n_samples");
    }

    if (m.value("ground_truth", false)) {
      GroundTruth t;
      const auto li = declared_shape(arrays, "truth_latents_img");
      const auto lt = declared_shape(arrays, "truth_latents_txt");
      if (li.size() != 2 || lt.size() != 2) throw ShapeDisagreementError("latent arrays must be 2-d");
      t.signal_lh = read_matrix(dir, arrays, "truth_signal_lh", n, d.voxels_lh);
      t.signal_rh = read_matrix(dir, arrays, "truth_signal_rh", n, d.voxels_rh);
      t.latents_img = read_matrix(dir, arrays, "truth_latents_img", n, li[1]);
      t.latents_txt = read_matrix(dir, arrays, "truth_latents_txt", n, lt[1]);
      t.mixing_img = read_matrix(dir, arrays, "truth_mixing_img", d.total_voxels(), li[1]);
      t.mixing_txt = read_matrix(dir, arrays, "truth_mixing_txt", d.total_voxels(), lt[1]);
      d.truth = std::move(t);
    }
    d.validate();
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed dataset manifest: ") + e.what());
  }
}

std::string dataset_fingerprint(const fs::path& dir) {
  std::string joined;
  for (const char* f : {"images.bin", "voxels_lh.bin", "voxels_rh.bin", "captions.tsv"}) {
    joined += io::file_blob_hash(dir / f);
  }
  return io::git_blob_hash(joined);
}

}  // namespace mmenc
