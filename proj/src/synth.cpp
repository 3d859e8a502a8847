#include "mmenc/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mmenc/objective.hpp"
#include "mmenc/preprocess.hpp"

namespace mmenc {

namespace {

constexpr Index kLevels = 4;

const std::vector<std::string>& fillers() {
  static const std::vector<std::string> words = {"a", "the", "near", "with", "and", "on", "by"};
  return words;
}

// Connectors placed before factor words 1.. so each factor keeps a fixed position.
const std::vector<std::string>& connectors() {
  static const std::vector<std::string> words = {"near", "with", "and", "on", "by"};
  return words;
}

const std::vector<std::string>& word_bank() {
  static const std::vector<std::string> words = {
      "red",     "blue",    "green",   "yellow", "bus",    "cat",     "dog",    "bike",   "road",    "park",
      "beach",   "kitchen", "parked",  "running", "sitting", "flying", "small", "large",  "old",     "shiny",
      "wave",    "laptop",  "banana",  "desk",   "tree",   "sky",     "street", "table",  "window",  "train",
      "horse",   "boat",    "plate",   "pizza",  "clock",  "chair",   "grass",  "snow",   "water",   "field",
      "person",  "woman",   "man",     "child",  "bird",   "car",     "truck",  "phone",  "monitor", "cup",
      "bench",   "sign",    "light",   "fence",  "door",   "wall",    "bed",    "sofa",   "lamp",    "hill"};
  return words;
}

struct Lexicon {
  std::vector<std::string> vocab;                  // all words, excluding reserved ids
  std::vector<std::vector<std::string>> factor;    // [k_txt][kLevels]
};

Lexicon build_lexicon(const SynthSpec& s) {
  Lexicon lex;
  lex.vocab = fillers();
  const auto& bank = word_bank();
  std::size_t next = 0;
  auto fresh = [&]() {
    while (next < bank.size()) {
      const auto& w = bank[next++];
      if (std::find(lex.vocab.begin(), lex.vocab.end(), w) == lex.vocab.end()) return w;
    }
    return "w" + std::to_string(lex.vocab.size());
  };
  lex.factor.resize(static_cast<std::size_t>(s.k_txt));
  for (auto& f : lex.factor) {
    for (Index l = 0; l < kLevels; ++l) {
      f.push_back(fresh());
      lex.vocab.push_back(f.back());
    }
  }
  while (static_cast<Index>(lex.vocab.size()) + Vocabulary::kReserved < s.vocab_size) lex.vocab.push_back(fresh());
  return lex;
}

std::string render_caption(const std::vector<std::string>& words) {
  std::string out = "a " + words.front();
  for (std::size_t f = 1; f < words.size(); ++f) {
    out += " " + connectors()[(f - 1) % connectors().size()] + " " + words[f];
  }
  return out;
}

double level_value(Index level) { return (2.0 * static_cast<double>(level) - 3.0) / std::sqrt(5.0); }

}  // namespace

void SynthSpec::validate() const {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  need(n_samples >= 2, "n_samples must be >= 2");
  need(voxels_lh >= 1, "voxels_lh must be >= 1");
  need(voxels_rh >= 1, "voxels_rh must be >= 1");
  need(channels >= 1, "channels must be >= 1");
  need(height >= 1, "height must be >= 1");
  need(width >= 1, "width must be >= 1");
  need(k_img >= 1, "k_img must be >= 1");
  need(k_txt >= 1, "k_txt must be >= 1");
  need(noise_sigma >= 0.0, "noise_sigma must be >= 0");
  need(text_dependence_fraction >= 0.0 && text_dependence_fraction <= 1.0,
       "text_dependence_fraction must lie in [0, 1]");
  need(sessions >= 1, "sessions must be >= 1");
  need(repeats >= 1, "repeats must be >= 1");
  need(session_drift >= 0.0, "session_drift must be >= 0");
  need(caption_candidates >= 1, "caption_candidates must be >= 1");
  need(!subject.empty(), "subject must be non-empty");
  const Index min_vocab = Vocabulary::kReserved + static_cast<Index>(fillers().size()) + kLevels * std::max<Index>(k_txt, 0);
  need(vocab_size >= min_vocab, "vocab_size must be >= " + std::to_string(min_vocab) + " for k_txt=" + std::to_string(k_txt));
  if (!bad.empty()) {
    std::string msg = "invalid synth spec:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
}

SynthSpec synth_spec_from(const io::KeyValues& kv, SynthSpec s) {
  for (const auto& [key, value] : kv) {
    try {
      if (key == "n_samples") s.n_samples = std::stoll(value);
      else if (key == "voxels_lh") s.voxels_lh = std::stoll(value);
      else if (key == "voxels_rh") s.voxels_rh = std::stoll(value);
      else if (key == "channels") s.channels = std::stoll(value);
      else if (key == "height") s.height = std::stoll(value);
      else if (key == "width") s.width = std::stoll(value);
      else if (key == "vocab_size") s.vocab_size = std::stoll(value);
      else if (key == "k_img") s.k_img = std::stoll(value);
      else if (key == "k_txt") s.k_txt = std::stoll(value);
      else if (key == "noise_sigma") s.noise_sigma = std::stod(value);
      else if (key == "text_dependence_fraction") s.text_dependence_fraction = std::stod(value);
      else if (key == "sessions") s.sessions = std::stoll(value);
      else if (key == "repeats") s.repeats = std::stoll(value);
      else if (key == "session_drift") s.session_drift = std::stod(value);
      else if (key == "caption_candidates") s.caption_candidates = std::stoll(value);
      else if (key == "subject") s.subject = value;
      else if (key == "seed") s.seed = std::stoull(value);
      else throw ConfigError("unknown synth spec key '" + key + "'");
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e) != nullptr) throw;
      throw ConfigError("synth spec key '" + key + "': cannot parse '" + value + "'");
    }
  }
  return s;
}

io::KeyValues to_key_values(const SynthSpec& s) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {{"n_samples", std::to_string(s.n_samples)},
          {"voxels_lh", std::to_string(s.voxels_lh)},
          {"voxels_rh", std::to_string(s.voxels_rh)},
          {"channels", std::to_string(s.channels)},
          {"height", std::to_string(s.height)},
          {"width", std::to_string(s.width)},
          {"vocab_size", std::to_string(s.vocab_size)},
          {"k_img", std::to_string(s.k_img)},
          {"k_txt", std::to_string(s.k_txt)},
          {"noise_sigma", num(s.noise_sigma)},
          {"text_dependence_fraction", num(s.text_dependence_fraction)},
          {"sessions", std::to_string(s.sessions)},
          {"repeats", std::to_string(s.repeats)},
          {"session_drift", num(s.session_drift)},
          {"caption_candidates", std::to_string(s.caption_candidates)},
          {"subject", s.subject},
          {"seed", std::to_string(s.seed)}};
}

Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Index n = spec.n_samples;
  const Index pixels = spec.channels * spec.height * spec.width;
  const Index voxels = spec.voxels_lh + spec.voxels_rh;
  const Lexicon lex = build_lexicon(spec);

  // Smooth basis images: a few low-frequency plane waves per channel, scaled to unit RMS.
  Matrix<double> basis(spec.k_img, pixels);
  for (Index k = 0; k < spec.k_img; ++k) {
    for (Index c = 0; c < spec.channels; ++c) {
      struct Wave { double fx, fy, phase, amp; };
      std::vector<Wave> waves;
      for (int j = 0; j < 3; ++j) {
        waves.push_back({std::floor(uniform(rng) * 3.0), std::floor(uniform(rng) * 3.0),
                         uniform(rng) * 2.0 * std::numbers::pi, normal(rng)});
      }
      for (Index y = 0; y < spec.height; ++y)
        for (Index x = 0; x < spec.width; ++x) {
          double v = 0.0;
          for (const auto& w : waves) {
            v += w.amp * std::sin(2.0 * std::numbers::pi *
                                      (w.fx * static_cast<double>(x) / static_cast<double>(spec.width) +
                                       w.fy * static_cast<double>(y) / static_cast<double>(spec.height)) +
                                  w.phase);
          }
          basis(k, (c * spec.height + y) * spec.width + x) = v;
        }
    }
    const double rms = std::sqrt(basis.row(k).squaredNorm() / static_cast<double>(pixels));
    if (rms > 0.0) basis.row(k) /= rms;
  }

  // Unit-norm mixing rows, then scaled so the two shares sum to unit variance.
  auto mixing = [&](Index k, double share) {
    Matrix<double> m(voxels, k);
    for (Index v = 0; v < voxels; ++v) {
      for (Index j = 0; j < k; ++j) m(v, j) = normal(rng);
      m.row(v) *= std::sqrt(share) / m.row(v).norm();
    }
    return m;
  };
  const Matrix<double> w_img = mixing(spec.k_img, 1.0 - spec.text_dependence_fraction);
  const Matrix<double> w_txt = mixing(spec.k_txt, spec.text_dependence_fraction);

  Matrix<double> lat_img(n, spec.k_img), lat_txt(n, spec.k_txt);
  std::vector<std::vector<Index>> levels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < spec.k_img; ++k) lat_img(i, k) = normal(rng);
    for (Index k = 0; k < spec.k_txt; ++k) {
      const Index l = std::min<Index>(kLevels - 1, static_cast<Index>(uniform(rng) * kLevels));
      levels[static_cast<std::size_t>(i)].push_back(l);
      lat_txt(i, k) = level_value(l);
    }
  }
  const Matrix<double> signal = lat_img * w_img.transpose() + lat_txt * w_txt.transpose();

  // Trials: each stimulus shown `repeats` times, spread round-robin over sessions.
  std::vector<Session> sessions(static_cast<std::size_t>(spec.sessions));
  Matrix<double> drift(spec.sessions, voxels);
  for (Index s = 0; s < spec.sessions; ++s)
    for (Index v = 0; v < voxels; ++v) drift(s, v) = spec.session_drift * normal(rng);
  std::vector<std::vector<Eigen::VectorXf>> rows(static_cast<std::size_t>(spec.sessions));
  for (Index i = 0; i < n; ++i) {
    for (Index r = 0; r < spec.repeats; ++r) {
      const Index s = (i * spec.repeats + r) % spec.sessions;
      Eigen::VectorXf resp(voxels);
      for (Index v = 0; v < voxels; ++v) {
        resp(v) = static_cast<float>(signal(i, v) + drift(s, v) + spec.noise_sigma * normal(rng));
      }
      rows[static_cast<std::size_t>(s)].push_back(std::move(resp));
      sessions[static_cast<std::size_t>(s)].stimulus.push_back(i);
    }
  }
  for (Index s = 0; s < spec.sessions; ++s) {
    auto& sess = sessions[static_cast<std::size_t>(s)];
    const auto& rs = rows[static_cast<std::size_t>(s)];
    sess.responses.resize(static_cast<Index>(rs.size()), voxels);
    for (std::size_t t = 0; t < rs.size(); ++t) sess.responses.row(static_cast<Index>(t)) = rs[t].transpose();
  }
  const ZScoreResult z = zscore_and_average(sessions, n);

  Dataset d;
  d.subjects = {spec.subject};
  d.channels = spec.channels;
  d.height = spec.height;
  d.width = spec.width;
  d.voxels_lh = spec.voxels_lh;
  d.voxels_rh = spec.voxels_rh;
  d.vocab = Vocabulary(lex.vocab);
  d.atlas = RoiAtlas::even_partition(spec.voxels_lh, spec.voxels_rh);
  d.samples.resize(static_cast<std::size_t>(n));

  const Index others = static_cast<Index>(lex.vocab.size());
  for (Index i = 0; i < n; ++i) {
    auto& s = d.samples[static_cast<std::size_t>(i)];
    char id[32];
    std::snprintf(id, sizeof id, "stim%05lld", static_cast<long long>(i));
    s.stimulus_id = id;
    s.subject_id = spec.subject;
    s.repeat_count = z.repeat_counts[static_cast<std::size_t>(i)];
    Matrix<float> img = (lat_img.row(i) * basis).cast<float>();
    s.image = Tensor<float>::from_values({spec.channels, spec.height, spec.width},
                                         std::span<const float>(img.data(), static_cast<std::size_t>(img.size())));

    std::vector<std::string> truth_words;
    for (Index k = 0; k < spec.k_txt; ++k) {
      truth_words.push_back(lex.factor[static_cast<std::size_t>(k)][static_cast<std::size_t>(levels[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)])]);
    }
    std::string tags;
    for (const auto& w : truth_words) tags += (tags.empty() ? "" : " ") + w;
    s.image_tags = tags;

    // One faithful caption among distractors that swap at least one factor word.
    const Index clean_at = std::min<Index>(spec.caption_candidates - 1,
                                           static_cast<Index>(uniform(rng) * static_cast<double>(spec.caption_candidates)));
    for (Index c = 0; c < spec.caption_candidates; ++c) {
      if (c == clean_at) {
        s.captions.push_back(render_caption(truth_words));
        continue;
      }
      auto words = truth_words;
      bool changed = false;
      while (!changed) {
        for (auto& w : words) {
          if (uniform(rng) < 0.5) {
            const auto& pick = lex.vocab[static_cast<std::size_t>(std::min<Index>(
                others - 1, static_cast<Index>(uniform(rng) * static_cast<double>(others))))];
            if (pick != w && std::find(truth_words.begin(), truth_words.end(), pick) == truth_words.end()) {
              w = pick;
              changed = true;
            }
          }
        }
      }
      s.captions.push_back(render_caption(words));
    }
    s.selected = select_caption(s.captions, s.image_tags);
    s.voxels_lh = z.responses.row(i).head(spec.voxels_lh).transpose();
    s.voxels_rh = z.responses.row(i).tail(spec.voxels_rh).transpose();
  }

  GroundTruth t;
  t.signal_lh = signal.leftCols(spec.voxels_lh).cast<float>();
  t.signal_rh = signal.rightCols(spec.voxels_rh).cast<float>();
  t.latents_img = lat_img.cast<float>();
  t.latents_txt = lat_txt.cast<float>();
  t.mixing_img = w_img.cast<float>();
  t.mixing_txt = w_txt.cast<float>();
  d.truth = std::move(t);
  d.validate();
  return d;
}

Eigen::VectorXd noise_ceiling(const Dataset& d, std::span<const Index> rows) {
  if (!d.truth) throw UnsupportedError("noise_ceiling needs a synthetic dataset with retained ground truth");
  Matrix<float> signal(static_cast<Index>(rows.size()), d.total_voxels());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    signal.row(static_cast<Index>(i)) << d.truth->signal_lh.row(rows[i]), d.truth->signal_rh.row(rows[i]);
  }
  return pearson_per_voxel(signal, d.responses(rows));
}

Dataset corrupt_captions(const Dataset& d, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate > 1.0) throw UsageError("corruption rate must lie in [0, 1]");
  Dataset out = d;
  const auto& words = d.vocab.words();
  if (words.empty()) throw DataError("cannot corrupt captions with an empty vocabulary");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  for (auto& s : out.samples) {
    auto tokens = tokenize(s.selected_caption());
    for (auto& t : tokens) {
      if (uniform(rng) < rate) t = words[pick(rng)];
    }
    std::string text;
    for (const auto& t : tokens) text += (text.empty() ? "" : " ") + t;
    s.captions[s.selected] = text;
  }
  return out;
}

}  // namespace mmenc
