#pragma once

#include "krondpp/types.hpp"

#include <cstdint>
#include <random>

namespace krondpp {

// Deterministic random stream: a seeded mt19937_64 mapped to [0,1) doubles
// by taking the top 53 bits. All randomized operations draw from a stream
// passed in by the caller, so a fixed seed fixes every result exactly.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  // Uniform draw in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound). bound must be positive.
  Index uniform_index(Index bound) {
    if (bound <= 0) throw DimensionError("uniform_index: bound must be positive");
    Index i = static_cast<Index>(uniform() * static_cast<double>(bound));
    return i < bound ? i : bound - 1;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace krondpp
