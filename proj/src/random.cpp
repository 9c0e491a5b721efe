#include "homlab/random.hpp"

#include <cmath>
#include <numbers>

namespace homlab {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t substream)
    : state_(mix64(mix64(seed + kGolden) ^ mix64(stream * kGolden + 1) ^
                   mix64(substream + 0x632be59bd9b4e019ULL))) {}

CounterRng::result_type CounterRng::operator()() {
  state_ += kGolden;
  return mix64(state_);
}

double CounterRng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::index(std::uint64_t n) {
  // Multiply-shift; bias is below 2^-64 * n, irrelevant for ensemble sizes.
  __extension__ using u128 = unsigned __int128;
  const auto wide = static_cast<u128>((*this)()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

double CounterRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace homlab
