#include "emtl/rng.hpp"

namespace emtl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeedStream SeedStream::child(std::uint64_t index) const {
  return SeedStream(splitmix64(splitmix64(state_) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

std::mt19937_64 SeedStream::engine() const {
  return std::mt19937_64(splitmix64(state_));
}

}  // namespace emtl
