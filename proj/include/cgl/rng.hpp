#pragma once

#include <cstdint>

namespace cgl {

// Counter-based generator addressed by (seed, stream). Output is a pure
// function of (seed, stream, draw index), so independent subsystems can own
// disjoint streams without sharing state. Distributions are implemented here
// rather than with <random> because the standard distributions are not
// bit-reproducible across library implementations.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t draws() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal (Marsaglia polar method).
  double normal();

  // Child stream addressed by (this stream's key, child). Independent of how
  // many draws this stream has made.
  RngStream split(std::uint64_t child) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Well-known stream ids. Keeping them in one place avoids accidental overlap.
namespace streams {
inline constexpr std::uint64_t kSuiteDomains = 1;
inline constexpr std::uint64_t kSuiteTrajectories = 2;
inline constexpr std::uint64_t kSuiteSplit = 3;
inline constexpr std::uint64_t kModelInit = 10;
inline constexpr std::uint64_t kBatching = 11;
inline constexpr std::uint64_t kRollout = 12;
inline constexpr std::uint64_t kBoxSampling = 13;
inline constexpr std::uint64_t kReplay = 14;
inline constexpr std::uint64_t kTheory = 20;
}  // namespace streams

}  // namespace cgl
