#include "nelson_tfd/rng.hpp"

#include <cmath>

namespace ntfd {

namespace {

constexpr std::uint32_t kMultiplier0 = 0xD2511F53u;
constexpr std::uint32_t kMultiplier1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& x, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMultiplier0) * x[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMultiplier1) * x[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> x = counter;
  std::array<std::uint32_t, 2> k = key;
  for (int r = 0; r < 10; ++r) {
    round_once(x, k);
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return x;
}

void NoiseStream::refill() {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(block_),
      static_cast<std::uint32_t>(block_ >> 32),
      stream_,
      path_,
  };
  buffer_ = philox4x32(counter, key_);
  ++block_;
  buffered_words_ = 4;
}

double NoiseStream::uniform() {
  if (buffered_words_ < 2) refill();
  const std::uint64_t hi = buffer_[4 - buffered_words_];
  const std::uint64_t lo = buffer_[5 - buffered_words_];
  buffered_words_ -= 2;
  const std::uint64_t bits = (hi << 32) | lo;
  // 53-bit mantissa, shifted into (0, 1].
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

double NoiseStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_gaussian_;
  }
  const double u1 = uniform();  // in (0, 1], so log(u1) is finite
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_gaussian_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double wiener_increment(NoiseStream& stream, double dt) {
  return std::sqrt(dt) * stream.gaussian();
}

}  // namespace ntfd
