#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace ratnmt::textprep {

// Stop-word list loaded from a UTF-8 file, one term per line, '#' comments
// ignored. Every entry must be a normalization fixed point.
struct StopList {
  std::unordered_set<std::string> terms;
  std::string language;

  bool contains(std::string_view t) const { return terms.count(std::string(t)) > 0; }

  static StopList load(const std::string& path, std::string language = "");
  static StopList none() { return StopList{}; }
};

/// Folds diacritics to unmarked letters, lowercases, and deletes everything
/// that is not a letter afterwards. Returns "" when nothing alphabetic remains.
std::string normalize_token(std::string_view raw);

/// Splits on any non-alphabetic character, normalizes each run, and drops
/// empties and stop words. No stemming. Output tokens match [a-z]+.
std::vector<std::string> preprocess(std::string_view text, const StopList& stoplist);

}  // namespace ratnmt::textprep
