#pragma once

#include <array>
#include <cstdint>

namespace ntfd {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// One invocation maps a 128-bit counter and 64-bit key to four 32-bit words.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

/// One independent random stream, keyed by (seed, path index, stream id).
///
/// Streams with distinct (seed, path, stream) triples never share counter
/// blocks, so per-path sub-streams are reproducible and order-independent:
/// any path can be regenerated in isolation from its triple alone.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint32_t path_index, std::uint32_t stream_id)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_(path_index),
        stream_(stream_id) {}

  /// Next uniform double in (0, 1].
  double uniform();

  /// Next standard normal draw (Box-Muller over one Philox block per pair).
  double gaussian();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t path_;
  std::uint32_t stream_;
  std::uint64_t block_ = 0;  // draw counter, low/high words of the Philox counter
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_words_ = 0;   // 32-bit words left in buffer (consumed in pairs)
  double spare_gaussian_ = 0.0;
  bool has_spare_ = false;
};

/// Brownian increment with variance dt: sqrt(dt) * N(0,1).
double wiener_increment(NoiseStream& stream, double dt);

/// The per-path bundle of independent sub-streams used by the integrators:
/// one for the non-tilde noise, one for the tilde noise, one for drawing
/// initial conditions.
struct PathRng {
  NoiseStream non_tilde;
  NoiseStream tilde;
  NoiseStream init;

  PathRng(std::uint64_t seed, std::uint32_t path_index)
      : non_tilde(seed, path_index, 0),
        tilde(seed, path_index, 1),
        init(seed, path_index, 2) {}
};

}  // namespace ntfd
