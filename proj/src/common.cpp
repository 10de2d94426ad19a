#include "common.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ratnmt {

uint64_t Rng::next_below(uint64_t n) {
  if (n == 0) throw InternalError("Rng::next_below: n must be positive");
  uint64_t threshold = (0 - n) % n;
  for (;;) {
    uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::next_gaussian() {
  if (have_gauss_) {
    have_gauss_ = false;
    return gauss_;
  }
  double u1 = 0.0;
  do {
    u1 = next_unit();
  } while (u1 <= 0.0);
  double u2 = next_unit();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 6.283185307179586476925286766559 * u2;
  gauss_ = r * std::sin(theta);
  have_gauss_ = true;
  return r * std::cos(theta);
}

bool natural_less(std::string_view a, std::string_view b) {
  size_t i = 0, j = 0;
  int zero_tiebreak = 0;  // remembers leading-zero difference of the first equal run
  while (i < a.size() && j < b.size()) {
    unsigned char ca = static_cast<unsigned char>(a[i]);
    unsigned char cb = static_cast<unsigned char>(b[j]);
    if (std::isdigit(ca) && std::isdigit(cb)) {
      size_t zi = 0, zj = 0;
      while (i < a.size() && a[i] == '0') ++i, ++zi;
      while (j < b.size() && b[j] == '0') ++j, ++zj;
      size_t si = i, sj = j;
      while (i < a.size() && std::isdigit(static_cast<unsigned char>(a[i]))) ++i;
      while (j < b.size() && std::isdigit(static_cast<unsigned char>(b[j]))) ++j;
      size_t li = i - si, lj = j - sj;
      if (li != lj) return li < lj;
      int c = a.substr(si, li).compare(b.substr(sj, lj));
      if (c != 0) return c < 0;
      if (zero_tiebreak == 0 && zi != zj) zero_tiebreak = zi < zj ? -1 : 1;
    } else {
      if (ca != cb) return ca < cb;
      ++i;
      ++j;
    }
  }
  if (i < a.size()) return false;
  if (j < b.size()) return true;
  return zero_tiebreak < 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream oss;
  oss << in.rdbuf();
  if (in.bad()) throw DataError("read failed: " + path);
  return oss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("write failed: " + path);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int64_t parse_i64(std::string_view s, const std::string& what) {
  try {
    size_t pos = 0;
    std::string str(trim(s));
    long long v = std::stoll(str, &pos);
    if (pos != str.size() || str.empty()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DataError("invalid integer for " + what + ": '" + std::string(s) + "'");
  }
}

double parse_f64(std::string_view s, const std::string& what) {
  try {
    size_t pos = 0;
    std::string str(trim(s));
    double v = std::stod(str, &pos);
    if (pos != str.size() || str.empty()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DataError("invalid number for " + what + ": '" + std::string(s) + "'");
  }
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace ratnmt
