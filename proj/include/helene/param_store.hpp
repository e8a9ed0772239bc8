#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace helene {

struct LayerSpec {
  std::string name;
  std::size_t offset = 0;
  std::size_t dim = 0;

  bool operator==(const LayerSpec&) const = default;
};

using Layout = std::vector<LayerSpec>;

/// Flat parameter vector partitioned into named, contiguous layers.
///
/// All per-layer logic (clip floors, clip-trigger counts, theory-mode
/// thresholds) addresses the storage through `layer()`; everything else
/// works on the flat `values()` span.
class LayeredParams {
 public:
  LayeredParams() = default;
  LayeredParams(Layout layout, std::vector<double> data);

  std::size_t size() const { return data_.size(); }
  std::size_t num_layers() const { return layout_.size(); }
  const Layout& layout() const { return layout_; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::span<double> layer(const std::string& name);
  std::span<const double> layer(const std::string& name) const;
  std::span<double> layer(std::size_t index);
  std::span<const double> layer(std::size_t index) const;

  /// Index of the layer that owns flat coordinate `j`.
  std::size_t layer_of(std::size_t j) const;

  /// True iff every entry is finite.
  bool all_finite() const;

 private:
  const LayerSpec& find(const std::string& name) const;

  Layout layout_;
  std::vector<double> data_;
};

/// Builds a contiguous layout from (name, dim) pairs.
Layout make_layout(const std::vector<std::pair<std::string, std::size_t>>& dims);

/// Zero-initialized parameters with the given layer dimensions.
LayeredParams partition(const std::vector<std::pair<std::string, std::size_t>>& dims);

/// Checks contiguity, non-overlap and dim >= 1; throws std::invalid_argument.
void validate_layout(const Layout& layout, std::size_t total);

/// params += coeff * other, in place.
void axpy(std::span<double> params, double coeff, std::span<const double> other);
inline void axpy(LayeredParams& params, double coeff, std::span<const double> other) {
  axpy(params.values(), coeff, other);
}

// Snapshot format: one JSON header line {"format":..., "layers":[{name,offset,dim}], "size":d}
// followed by d little-endian IEEE-754 doubles.
void write_snapshot(std::ostream& out, const LayeredParams& params);
LayeredParams read_snapshot(std::istream& in);
void save_snapshot(const std::string& path, const LayeredParams& params);
LayeredParams load_snapshot(const std::string& path);

}  // namespace helene
