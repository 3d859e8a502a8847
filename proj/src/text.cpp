#include "mmenc/text.hpp"

#include <cctype>
#include <cmath>
#include <map>

namespace mmenc {

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const auto [it, inserted] = ids_.emplace(words_[i], static_cast<Index>(i) + kReserved);
    if (!inserted) throw DataError("duplicate vocabulary word '" + words_[i] + "'");
  }
}

Index Vocabulary::id(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(Index id) const {
  static const std::string pad = "<pad>";
  static const std::string unk = "<unk>";
  if (id == kPad) return pad;
  if (id == kUnk) return unk;
  if (id < kReserved || id >= size()) throw DataError("token id " + std::to_string(id) + " outside vocabulary");
  return words_[static_cast<std::size_t>(id - kReserved)];
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<Index> tokenize_pad(std::string_view caption, const Vocabulary& vocab, Index length) {
  if (length < 1) throw UsageError("tokenize_pad: length must be >= 1");
  std::vector<Index> ids(static_cast<std::size_t>(length), Vocabulary::kPad);
  const auto tokens = tokenize(caption);
  const std::size_t n = std::min(tokens.size(), ids.size());
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

namespace {

std::map<std::string, double> counts(std::string_view text) {
  std::map<std::string, double> c;
  for (auto& t : tokenize(text)) c[t] += 1.0;
  return c;
}

double cosine(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [w, x] : a) {
    na += x * x;
    const auto it = b.find(w);
    if (it != b.end()) dot += x * it->second;
  }
  for (const auto& [w, y] : b) nb += y * y;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace

double bag_of_words_cosine(std::string_view a, std::string_view b) { return cosine(counts(a), counts(b)); }

std::size_t select_caption(std::span<const std::string> candidates, std::string_view image_tags) {
  if (candidates.empty()) throw UsageError("select_caption: no candidate captions");
  const auto tags = counts(image_tags);
  std::size_t best = 0;
  double best_score = cosine(counts(candidates[0]), tags);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = cosine(counts(candidates[i]), tags);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

}  // namespace mmenc
