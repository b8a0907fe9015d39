#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace rds {

/// Philox4x32-10 counter-based generator. Every output block is a pure
/// function of (key, counter), so any sample can be produced independently
/// of generation order or thread scheduling.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(Key key) : key_(key) {}
  explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Counter operator()(Counter ctr) const;

 private:
  Key key_;
};

/// Standard normal pair drawn from one Philox block addressed by
/// (stream, a, b). Deterministic in all arguments.
std::pair<double, double> normal_pair(const Philox4x32& gen, std::uint32_t stream, std::uint64_t a,
                                      std::uint32_t b);

/// Two uniforms in [0, 1) from one Philox block.
std::pair<double, double> uniform_pair(const Philox4x32& gen, std::uint32_t stream, std::uint64_t a,
                                       std::uint32_t b);

/// Sequential convenience stream over a counter-based generator.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t stream) : gen_(seed), stream_(stream) {}
  double normal();
  double uniform();

 private:
  Philox4x32 gen_;
  std::uint32_t stream_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rds
