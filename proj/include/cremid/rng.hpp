#pragma once

#include <array>
#include <cstdint>

namespace cremid {

/// Reproducible random stream identified by (seed, stream id).
///
/// The generator is xoshiro256** with its state expanded from the pair
/// through SplitMix64, so distinct stream ids give decorrelated sequences
/// and a copy of a stream replays exactly the same draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Standard normal via the Marsaglia polar method.
  double normal();

  /// Child stream deterministically derived from this stream's identity.
  /// Does not advance this stream.
  RngStream derive(std::uint64_t child) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> state_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cremid
