#include "kbvqa/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace kbvqa {

uint64_t mix64(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::stream(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t s = mix64(seed);
  s = mix64(s ^ mix64(a + 0x5851f42d4c957f2dULL));
  s = mix64(s ^ mix64(b + 0x14057b7ef767814fULL));
  s = mix64(s ^ mix64(c + 0x27bb2ee687b0b0fdULL));
  return Rng(s);
}

int64_t Rng::uniform_int(int64_t n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  // rejection sampling to avoid modulo bias
  uint64_t un = static_cast<uint64_t>(n);
  uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return static_cast<int64_t>(x % un);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<int> out;
  out.reserve(k);
  if (k * 3 >= n) {
    // dense case: shuffle a full index vector
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    shuffle(idx);
    out.assign(idx.begin(), idx.begin() + k);
  } else {
    std::unordered_set<int> seen;
    while (static_cast<int>(out.size()) < k) {
      int v = static_cast<int>(uniform_int(n));
      if (seen.insert(v).second) out.push_back(v);
    }
  }
  return out;
}

}  // namespace kbvqa
