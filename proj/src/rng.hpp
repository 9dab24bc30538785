#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace bridgeiv {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// State is (key, counter); distinct streams are independent by construction,
// which is what makes parallel sweeps reproducible: every consumer gets its
// own (seed, stream) pair and no generator is ever shared across threads.
class PhiloxRng {
 public:
  using result_type = std::uint64_t;

  PhiloxRng() : PhiloxRng(0, 0) {}
  PhiloxRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Raw 4x32 block for the given counter; exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(const std::array<std::uint32_t, 4>& counter,
                                            const std::array<std::uint32_t, 2>& key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffer_pos_ = 2;  // empty
};

// SplitMix64 step; used to derive well-separated seeds and stream ids from
// small integers (e.g. replication indices).
std::uint64_t mix64(std::uint64_t x);

// Combine a base seed with up to two indices into a derived seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace bridgeiv
