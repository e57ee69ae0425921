#include "rfqmm/rng.hpp"

#include <sstream>

namespace rfqmm {

uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Rng Rng::stream(uint64_t master, std::string_view name, uint64_t index) {
  uint64_t s = master;
  (void)splitmix64_next(s);
  s ^= fnv1a(name);
  (void)splitmix64_next(s);
  s ^= index;
  uint64_t seed = splitmix64_next(s);
  return Rng(seed);
}

uint64_t Rng::below(uint64_t n) {
  if (n == 0) return 0;
  // Lemire's multiply-shift rejection method.
  uint64_t x = gen_();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  uint64_t l = static_cast<uint64_t>(m);
  if (l < n) {
    uint64_t t = (0 - n) % n;
    while (l < t) {
      x = gen_();
      m = static_cast<__uint128_t>(x) * n;
      l = static_cast<uint64_t>(m);
    }
  }
  return static_cast<uint64_t>(m >> 64);
}

std::string Rng::state_string() const {
  std::ostringstream os;
  os << gen_;
  return os.str();
}

void Rng::set_state_string(const std::string& s) {
  std::istringstream is(s);
  is >> gen_;
  if (!is) throw std::invalid_argument("Rng: bad state string");
}

}  // namespace rfqmm
