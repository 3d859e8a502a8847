#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mmenc/tensor.hpp"

namespace mmenc {

// Word-to-id table with two reserved ids.
class Vocabulary {
 public:
  static constexpr Index kPad = 0;
  static constexpr Index kUnk = 1;
  static constexpr Index kReserved = 2;

  Vocabulary() = default;
  // `words` excludes the reserved entries; duplicates are rejected.
  explicit Vocabulary(std::vector<std::string> words);

  Index id(std::string_view word) const;
  const std::string& word(Index id) const;
  Index size() const { return static_cast<Index>(words_.size()) + kReserved; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, Index> ids_;
};

// Lowercased alphanumeric runs; whitespace and punctuation separate tokens.
std::vector<std::string> tokenize(std::string_view text);

// Exactly `length` ids: truncated, or padded with Vocabulary::kPad.
std::vector<Index> tokenize_pad(std::string_view caption, const Vocabulary& vocab, Index length);

// Index of the candidate whose token-count vector has the highest cosine
// similarity with the tags' count vector. Ties go to the lowest index.
std::size_t select_caption(std::span<const std::string> candidates, std::string_view image_tags);

double bag_of_words_cosine(std::string_view a, std::string_view b);

}  // namespace mmenc
