// Copyright 2026 The sirtree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SIRTREE_RNG_HPP_
#define SIRTREE_RNG_HPP_

#include <cstdint>
#include <random>

namespace sirtree {

// SplitMix64 finalizer (Steele, Lea & Flood 2014). Constants:
//   increment  0x9E3779B97F4A7C15 (golden ratio * 2^64)
//   multiply   0xBF58476D1CE4E5B9, 0x94D049BB133111EB
//   shifts     30, 27, 31
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed for stream `index` under master `seed`. Two rounds so that adjacent
// (seed, index) pairs land far apart.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

// Salts separating the independent streams a single replica consumes.
enum class StreamRole : std::uint64_t {
  kSigns = 0x5349474E53ULL,    // step signs of the SIR chain
  kChoices = 0x43484F4943ULL,  // uniform active-vertex choices
  kAux = 0x415558ULL,          // anything else (Bienaymé forests, urns)
};

// Deterministic pseudo-random stream. Uniforms are built from the top 53 bits
// of a std::mt19937_64 draw so the sequence is identical on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  static RngStream for_replica(std::uint64_t master, std::uint64_t replica,
                               StreamRole role) {
    return RngStream(
        mix_seed(mix_seed(master, replica), static_cast<std::uint64_t>(role)));
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., count-1} via floor(U * count); count must be > 0.
  template <class Int>
  Int index(Int count) {
    auto i = static_cast<Int>(uniform() * static_cast<double>(count));
    return i < count ? i : count - 1;
  }

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sirtree

#endif  // SIRTREE_RNG_HPP_
