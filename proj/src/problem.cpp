#include "helene/problem.hpp"

#include <numeric>
#include <random>
#include <stdexcept>

namespace helene {

Batch sample_batch(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) {
    throw std::invalid_argument("batch size must be >= 1");
  }
  Batch batch;
  batch.seed = seed;
  if (n == 0) {
    return batch;
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (batch_size >= n) {
    batch.indices = std::move(all);
    return batch;
  }
  // Partial Fisher-Yates with an explicit uniform draw so the result does not
  // depend on std::shuffle's implementation.
  std::mt19937_64 engine(seed);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(engine() % (n - i));
    std::swap(all[i], all[j]);
  }
  all.resize(batch_size);
  batch.indices = std::move(all);
  return batch;
}

Batch full_batch(std::size_t n) {
  Batch batch;
  batch.indices.resize(n);
  std::iota(batch.indices.begin(), batch.indices.end(), std::size_t{0});
  return batch;
}

void Problem::exact_gradient(std::span<const double>, const Batch&, std::span<double>) const {
  throw std::logic_error("problem '" + name() + "' has no exact gradient");
}

std::vector<std::vector<double>> Problem::class_probabilities(std::span<const double>,
                                                              const Batch&) const {
  throw std::logic_error("problem '" + name() + "' has no categorical outputs");
}

}  // namespace helene
