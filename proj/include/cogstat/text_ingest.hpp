#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cogstat {

/// How raw text is split into words. Every character that is not a word
/// character (ASCII letters and digits, Latin-1/Latin Extended letters) is a
/// separator, except apostrophes and hyphens that sit between two word
/// characters when the corresponding flag is set.
struct TokenizationRules {
  bool case_folding = true;
  bool intra_word_apostrophe = true;
  bool intra_word_hyphen = true;

  friend bool operator==(const TokenizationRules&, const TokenizationRules&) = default;
};

struct WordCount {
  std::string word;
  std::int64_t count = 0;

  friend bool operator==(const WordCount&, const WordCount&) = default;
};

/// Rank-ordered word counts of one text. Entries are sorted by count
/// descending and then by word ascending (byte order), so equal-frequency
/// words get consecutive ranks in alphabetical order.
class WordSpectrum {
 public:
  WordSpectrum() = default;

  const std::vector<WordCount>& entries() const noexcept { return entries_; }
  const TokenizationRules& rules() const noexcept { return rules_; }
  std::int64_t total_words() const noexcept { return total_words_; }
  std::size_t distinct_words() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Counts in rank order.
  std::vector<std::int64_t> counts() const;

  /// Count of `word`, or 0 when absent.
  std::int64_t count_of(std::string_view word) const;

  /// Builds a spectrum from explicit entries. Entries are re-sorted and
  /// validated (non-empty words, positive counts, no duplicates).
  static WordSpectrum from_entries(std::vector<WordCount> entries, TokenizationRules rules = {});

  friend bool operator==(const WordSpectrum&, const WordSpectrum&) = default;

 private:
  std::vector<WordCount> entries_;
  TokenizationRules rules_;
  std::int64_t total_words_ = 0;
};

/// Splits UTF-8 text into normalized words in document order.
std::vector<std::string> tokenize(std::string_view text, const TokenizationRules& rules = {});

/// Aggregates words into a ranked spectrum. Throws EmptyCorpus on an empty list.
WordSpectrum build_spectrum(const std::vector<std::string>& words,
                            const TokenizationRules& rules = {});

/// Reads a UTF-8 text file in full. Throws InputError when unreadable.
std::string read_text_file(const std::filesystem::path& path);

nlohmann::json to_json(const TokenizationRules& rules);
nlohmann::json to_json(const WordSpectrum& spectrum);
TokenizationRules rules_from_json(const nlohmann::json& j);
WordSpectrum spectrum_from_json(const nlohmann::json& j);

}  // namespace cogstat
