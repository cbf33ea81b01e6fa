#include "navforge/rng.hpp"

namespace navforge {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

KeyedRng::KeyedRng(std::uint64_t seed, std::string_view entity,
                   std::string_view purpose)
    : key_(derive_seed(seed, entity, purpose)) {}

std::uint64_t KeyedRng::next() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

std::uint64_t KeyedRng::below(std::uint64_t bound) {
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t value;
  do {
    value = next();
  } while (value >= limit);
  return value % bound;
}

double KeyedRng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view entity,
                          std::string_view purpose) {
  std::uint64_t key = mix64(seed ^ kGolden);
  key = mix64(key ^ fnv1a64(entity));
  key = mix64(key ^ fnv1a64(purpose));
  return key;
}

}  // namespace navforge
