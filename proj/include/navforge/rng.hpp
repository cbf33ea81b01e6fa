#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace navforge {

// FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text);

// SplitMix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t value);

// Counter-based random stream keyed by (seed, entity, purpose).
//
// Every stochastic choice in the toolkit draws from a stream keyed by the
// entity it concerns, so results never depend on which worker processed the
// entity or in which order. The bounded-integer, real and shuffle helpers are
// implemented here instead of using <random> distributions, whose output is
// implementation-defined and would differ between standard libraries.
class KeyedRng {
 public:
  KeyedRng(std::uint64_t seed, std::string_view entity, std::string_view purpose);

  std::uint64_t next();

  // Uniform integer in [0, bound). `bound` must be nonzero.
  std::uint64_t below(std::uint64_t bound);

  // Uniform real in [0, 1) with 53 bits of precision.
  double uniform();

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Derives a 64-bit sub-seed, e.g. the per-epoch seed of a curriculum plan.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view entity,
                          std::string_view purpose);

}  // namespace navforge
