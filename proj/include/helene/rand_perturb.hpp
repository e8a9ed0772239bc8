#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace helene {

/// Number of direction entries produced per independently keyed RNG stream.
inline constexpr std::size_t kPerturbChunk = 1024;

/// A Gaussian direction z ~ N(0, I_d) identified only by its seed, plus the
/// SPSA scale epsilon. z is regenerated on demand and never stored.
struct PerturbationHandle {
  std::uint64_t seed = 0;
  double scale = 1e-3;
};

/// Dense copy of z (length d). Throws std::invalid_argument when d == 0.
std::vector<double> materialize(const PerturbationHandle& handle, std::size_t d);

/// Entries [chunk * kPerturbChunk, ...) of z, computed without touching any
/// other chunk. `out.size()` may be shorter than a full chunk for the tail.
void materialize_chunk(std::uint64_t seed, std::size_t chunk, std::span<double> out);

/// params += sign * scale * z. sign must be one of {+1, -1, +2, -2}.
void perturb_in_place(std::span<double> params, const PerturbationHandle& handle, int sign);

/// params += coeff * z for the direction keyed by `seed`, streamed chunk by
/// chunk. Used for rank-one updates such as ZO-SGD's  theta -= lr * proj * z.
void add_direction(std::span<double> params, std::uint64_t seed, double coeff);

/// ||z||^2 for the direction keyed by `seed`, streamed.
double direction_norm_squared(std::uint64_t seed, std::size_t d);

/// Derives an independent 64-bit seed from (base, index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace helene
