#pragma once

#include <cstdint>
#include <limits>

// Counter-based random numbers. Every random quantity in the library is a
// pure function of (seed, stream tag, coordinates), so values can be
// regenerated at any site without stored state and independently of the
// number of worker threads.
namespace dpre::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ mix64(v + kGolden));
}

constexpr std::uint64_t as_word(std::int64_t v) { return static_cast<std::uint64_t>(v); }

// Stream tags. Distinct tags give unrelated streams from one master seed.
enum class Stream : std::uint64_t {
  environment = 0x454e5631,
  tilt = 0x54494c54,
  walk = 0x57414c4b,
  task = 0x5441534b,
};

constexpr std::uint64_t stream_key(std::uint64_t seed, Stream s) {
  return combine(mix64(seed), static_cast<std::uint64_t>(s));
}

// Seed for task `index` derived from a master seed. The assignment depends
// only on (master, index), never on how tasks are scheduled.
constexpr std::uint64_t task_seed(std::uint64_t master, std::uint64_t index) {
  return combine(stream_key(master, Stream::task), index);
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// A UniformRandomBitGenerator whose first output is the supplied word and
// whose later outputs continue a SplitMix64 stream from it. Lets rejection
// samplers draw extra words from a single site hash.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterEngine(std::uint64_t first) : state_(first), fresh_(true) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    if (fresh_) {
      fresh_ = false;
      return state_;
    }
    state_ += kGolden;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
  bool fresh_;
};

}  // namespace dpre::rng
