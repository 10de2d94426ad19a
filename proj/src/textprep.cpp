#include "textprep.hpp"

#include <algorithm>
#include <cstdint>

#include "common.hpp"

namespace ratnmt::textprep {

namespace {

struct FoldEntry {
  uint32_t cp;
  const char* ascii;
};

struct MarkRange {
  uint32_t lo;
  uint32_t hi;
};

#include "textprep_fold.inc"

enum class CpClass { Letter, Mark, Other };

// Classifies a codepoint and, for letters, appends its folded lowercase ASCII
// form to out.
CpClass fold_codepoint(uint32_t cp, std::string& out) {
  if (cp < 0x80) {
    if (cp >= 'a' && cp <= 'z') {
      out.push_back(static_cast<char>(cp));
      return CpClass::Letter;
    }
    if (cp >= 'A' && cp <= 'Z') {
      out.push_back(static_cast<char>(cp - 'A' + 'a'));
      return CpClass::Letter;
    }
    return CpClass::Other;
  }
  // Binary search the fold table.
  size_t lo = 0, hi = sizeof(kFoldTable) / sizeof(kFoldTable[0]);
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (kFoldTable[mid].cp < cp) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < sizeof(kFoldTable) / sizeof(kFoldTable[0]) && kFoldTable[lo].cp == cp) {
    out += kFoldTable[lo].ascii;
    return CpClass::Letter;
  }
  for (const auto& r : kMarkRanges) {
    if (cp >= r.lo && cp <= r.hi) return CpClass::Mark;
    if (cp < r.lo) break;
  }
  return CpClass::Other;
}

// Minimal UTF-8 decoder; malformed bytes decode to U+FFFD and consume one byte.
uint32_t decode_utf8(std::string_view s, size_t& i) {
  unsigned char b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + static_cast<size_t>(len) > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    unsigned char bk = static_cast<unsigned char>(s[i + static_cast<size_t>(k)]);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += static_cast<size_t>(len);
  return cp;
}

}  // namespace

StopList StopList::load(const std::string& path, std::string language) {
  StopList sl;
  sl.language = std::move(language);
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = trim(lines[ln]);
    if (line.empty() || line[0] == '#') continue;
    std::string term(line);
    if (normalize_token(term) != term) {
      throw DataError("stoplist " + path + " line " + std::to_string(ln + 1) + ": entry '" +
                      term + "' is not a normalization fixed point");
    }
    sl.terms.insert(std::move(term));
  }
  return sl;
}

std::string normalize_token(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  size_t i = 0;
  while (i < raw.size()) {
    uint32_t cp = decode_utf8(raw, i);
    fold_codepoint(cp, out);  // marks and others contribute nothing
  }
  return out;
}

std::vector<std::string> preprocess(std::string_view text, const StopList& stoplist) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stoplist.contains(cur)) tokens.push_back(cur);
    cur.clear();
  };
  size_t i = 0;
  while (i < text.size()) {
    uint32_t cp = decode_utf8(text, i);
    CpClass cls = fold_codepoint(cp, cur);
    if (cls == CpClass::Other) flush();
    // marks stay inside the current run but add no characters
  }
  flush();
  return tokens;
}

}  // namespace ratnmt::textprep
