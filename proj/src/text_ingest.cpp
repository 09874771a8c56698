#include "cogstat/text_ingest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "cogstat/errors.hpp"

namespace cogstat {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > text.size()) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  // Latin-1 Supplement letters and Latin Extended-A/B; everything else
  // outside ASCII (punctuation, dashes, quotes, symbols) separates words.
  return cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7;
}

char32_t fold_case(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  return cp;
}

// U+2019 and U+02BC are typographic apostrophes; U+2010/U+2011 are hyphens.
// En and em dashes are deliberately not mapped.
char32_t normalize_joiner(char32_t cp) {
  switch (cp) {
    case 0x2019:
    case 0x02BC:
      return U'\'';
    case 0x2010:
    case 0x2011:
      return U'-';
    default:
      return cp;
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizationRules& rules) {
  std::vector<char32_t> cps = decode_utf8(text);
  for (auto& cp : cps) cp = normalize_joiner(cp);

  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  };

  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t cp = cps[i];
    if (is_word_char(cp)) {
      append_utf8(current, rules.case_folding ? fold_case(cp) : cp);
      continue;
    }
    const bool joiner = (cp == U'\'' && rules.intra_word_apostrophe) ||
                        (cp == U'-' && rules.intra_word_hyphen);
    if (joiner && !current.empty() && i + 1 < cps.size() && is_word_char(cps[i + 1])) {
      append_utf8(current, cp);
      continue;
    }
    flush();
  }
  flush();
  return words;
}

std::vector<std::int64_t> WordSpectrum::counts() const {
  std::vector<std::int64_t> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.count);
  return out;
}

std::int64_t WordSpectrum::count_of(std::string_view word) const {
  for (const auto& e : entries_) {
    if (e.word == word) return e.count;
  }
  return 0;
}

WordSpectrum WordSpectrum::from_entries(std::vector<WordCount> entries, TokenizationRules rules) {
  if (entries.empty()) throw EmptyCorpus();
  std::sort(entries.begin(), entries.end(), [](const WordCount& a, const WordCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.word < b.word;
  });
  WordSpectrum s;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.word.empty()) throw InputError("spectrum entry " + std::to_string(i) + " has an empty word");
    if (e.count < 1) throw InputError("spectrum entry '" + e.word + "' has non-positive count");
    s.total_words_ += e.count;
  }
  std::vector<std::string_view> names;
  names.reserve(entries.size());
  for (const auto& e : entries) names.push_back(e.word);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw InputError("duplicate spectrum entry '" +
                     std::string(*std::adjacent_find(names.begin(), names.end())) + "'");
  }
  s.entries_ = std::move(entries);
  s.rules_ = rules;
  return s;
}

WordSpectrum build_spectrum(const std::vector<std::string>& words, const TokenizationRules& rules) {
  if (words.empty()) throw EmptyCorpus();
  std::map<std::string, std::int64_t> counts;
  for (const auto& w : words) {
    if (w.empty()) continue;
    ++counts[w];
  }
  if (counts.empty()) throw EmptyCorpus();
  std::vector<WordCount> entries;
  entries.reserve(counts.size());
  for (auto& [w, c] : counts) entries.push_back({w, c});
  return WordSpectrum::from_entries(std::move(entries), rules);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw InputError("error reading " + path.string());
  return ss.str();
}

nlohmann::json to_json(const TokenizationRules& rules) {
  return {{"case_folding", rules.case_folding},
          {"intra_word_apostrophe", rules.intra_word_apostrophe},
          {"intra_word_hyphen", rules.intra_word_hyphen}};
}

nlohmann::json to_json(const WordSpectrum& spectrum) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : spectrum.entries()) entries.push_back({e.word, e.count});
  return {{"rules", to_json(spectrum.rules())},
          {"total_words", spectrum.total_words()},
          {"entries", std::move(entries)}};
}

TokenizationRules rules_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("/rules", "expected an object");
  TokenizationRules r;
  auto flag = [&](const char* key, bool& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean()) throw SchemaError(std::string("/rules/") + key, "expected a boolean");
    dst = j[key].get<bool>();
  };
  flag("case_folding", r.case_folding);
  flag("intra_word_apostrophe", r.intra_word_apostrophe);
  flag("intra_word_hyphen", r.intra_word_hyphen);
  return r;
}

WordSpectrum spectrum_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("", "expected an object");
  TokenizationRules rules;
  if (j.contains("rules")) rules = rules_from_json(j["rules"]);
  if (!j.contains("entries") || !j["entries"].is_array()) {
    throw SchemaError("/entries", "expected an array");
  }
  std::vector<WordCount> entries;
  const auto& arr = j["entries"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& e = arr[i];
    const std::string where = "/entries/" + std::to_string(i);
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_number_integer()) {
      throw SchemaError(where, "expected [word, count]");
    }
    entries.push_back({e[0].get<std::string>(), e[1].get<std::int64_t>()});
  }
  auto spectrum = WordSpectrum::from_entries(std::move(entries), rules);
  if (j.contains("total_words")) {
    if (!j["total_words"].is_number_integer() ||
        j["total_words"].get<std::int64_t>() != spectrum.total_words()) {
      throw SchemaError("/total_words", "does not match the sum of entry counts");
    }
  }
  return spectrum;
}

}  // namespace cogstat
