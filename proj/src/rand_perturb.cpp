#include "helene/rand_perturb.hpp"

#include <random>
#include <stdexcept>

namespace helene {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Each chunk gets its own engine keyed by (seed, chunk), so any chunk can be
// regenerated in isolation and the order of regeneration does not matter.
template <typename Fn>
void for_each_chunk(std::uint64_t seed, std::size_t d, Fn&& fn) {
  const std::size_t chunks = (d + kPerturbChunk - 1) / kPerturbChunk;
  for (std::size_t c = 0; c < chunks; ++c) {
    std::mt19937_64 engine(derive_seed(seed, c));
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t begin = c * kPerturbChunk;
    const std::size_t end = std::min(d, begin + kPerturbChunk);
    for (std::size_t i = begin; i < end; ++i) {
      fn(i, normal(engine));
    }
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ (index * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}

std::vector<double> materialize(const PerturbationHandle& handle, std::size_t d) {
  if (d == 0) {
    throw std::invalid_argument("materialize: dimension must be >= 1");
  }
  std::vector<double> z(d);
  for_each_chunk(handle.seed, d, [&](std::size_t i, double v) { z[i] = v; });
  return z;
}

void materialize_chunk(std::uint64_t seed, std::size_t chunk, std::span<double> out) {
  if (out.size() > kPerturbChunk) {
    throw std::invalid_argument("materialize_chunk: span longer than a chunk");
  }
  std::mt19937_64 engine(derive_seed(seed, chunk));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : out) {
    v = normal(engine);
  }
}

void add_direction(std::span<double> params, std::uint64_t seed, double coeff) {
  if (coeff == 0.0) {
    return;
  }
  for_each_chunk(seed, params.size(), [&](std::size_t i, double z) { params[i] += coeff * z; });
}

double direction_norm_squared(std::uint64_t seed, std::size_t d) {
  double acc = 0.0;
  for_each_chunk(seed, d, [&](std::size_t, double z) { acc += z * z; });
  return acc;
}

void perturb_in_place(std::span<double> params, const PerturbationHandle& handle, int sign) {
  if (sign != 1 && sign != -1 && sign != 2 && sign != -2) {
    throw std::invalid_argument("perturb_in_place: sign must be +-1 or +-2");
  }
  if (handle.scale < 0.0) {
    throw std::invalid_argument("perturb_in_place: negative scale");
  }
  add_direction(params, handle.seed, static_cast<double>(sign) * handle.scale);
}

}  // namespace helene
