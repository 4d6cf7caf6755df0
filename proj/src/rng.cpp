#include "cnlm/rng.hpp"

#include <sstream>

#include "cnlm/error.hpp"

namespace cnlm {

std::string Rng::state() const {
  std::ostringstream ss;
  ss << engine_;
  return ss.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream ss(state);
  ss >> engine_;
  if (!ss) throw DataError("malformed RNG state");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cnlm
