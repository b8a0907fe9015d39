#include "rds/rng.hpp"

#include <cmath>
#include <numbers>

namespace rds {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t a, std::uint32_t b) {
  // 53 random bits -> [0, 1)
  return (static_cast<double>(a >> 5) * 67108864.0 + static_cast<double>(b >> 6)) *
         (1.0 / 9007199254740992.0);
}

}  // namespace

Philox4x32::Counter Philox4x32::operator()(Counter ctr) const {
  Key key = key_;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::pair<double, double> uniform_pair(const Philox4x32& gen, std::uint32_t stream, std::uint64_t a,
                                       std::uint32_t b) {
  const auto out = gen({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), b, stream});
  return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
}

std::pair<double, double> normal_pair(const Philox4x32& gen, std::uint32_t stream, std::uint64_t a,
                                      std::uint32_t b) {
  const auto [u0, u1] = uniform_pair(gen, stream, a, b);
  const double r = std::sqrt(-2.0 * std::log(1.0 - u0));
  const double phi = 2.0 * std::numbers::pi * u1;
  return {r * std::cos(phi), r * std::sin(phi)};
}

double NormalStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const auto [z0, z1] = normal_pair(gen_, stream_, counter_++, 0u);
  spare_ = z1;
  have_spare_ = true;
  return z0;
}

double NormalStream::uniform() {
  return uniform_pair(gen_, stream_, counter_++, 1u).first;
}

}  // namespace rds
