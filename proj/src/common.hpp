#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ratnmt {

// Error taxonomy mirrors the CLI exit codes: 1 usage, 2 data, 3 internal.
enum class ErrorKind { Usage = 1, Data = 2, Internal = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error(ErrorKind::Usage, msg) {}
};
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};
struct InternalError : Error {
  explicit InternalError(const std::string& msg) : Error(ErrorKind::Internal, msg) {}
};

// FNV-1a, used for config hashes, vocabulary hashes and stage stamps.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_mix(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

// Seed derivation for named RNG streams: hash_seed(seed, "ratgen", pair_id).
inline uint64_t hash_seed(uint64_t seed, std::string_view tag, uint64_t n = 0) {
  return hash_mix(hash_mix(seed, fnv1a64(tag)), n);
}

// xoshiro256** seeded via splitmix64. Self-contained so that shuffles and
// samples are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    for (auto& w : s_) {
      seed = splitmix64(seed + 0x9e3779b97f4a7c15ull);
      w = seed;
    }
  }

  uint64_t next_u64() {
    uint64_t result = rotl(s_[1] * 5, 7) * 9;
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Unbiased draw in [0, n) via rejection.
  uint64_t next_below(uint64_t n);

  // [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_gaussian();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  bool have_gauss_ = false;
  double gauss_ = 0.0;
};

// Orders doc ids with digit runs compared numerically ("d9" < "d10"),
// bytewise elsewhere. Used for postings order and ranking tie breaks.
bool natural_less(std::string_view a, std::string_view b);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

int64_t parse_i64(std::string_view s, const std::string& what);
double parse_f64(std::string_view s, const std::string& what);

std::string hex64(uint64_t v);

}  // namespace ratnmt
