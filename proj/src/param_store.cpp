#include "helene/param_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace helene {

namespace {

constexpr const char* kSnapshotFormat = "helene-params-v1";

}  // namespace

Layout make_layout(const std::vector<std::pair<std::string, std::size_t>>& dims) {
  if (dims.empty()) {
    throw std::invalid_argument("layout needs at least one layer");
  }
  Layout layout;
  layout.reserve(dims.size());
  std::size_t offset = 0;
  for (const auto& [name, dim] : dims) {
    if (dim == 0) {
      throw std::invalid_argument("layer '" + name + "' has dimension 0");
    }
    for (const auto& existing : layout) {
      if (existing.name == name) {
        throw std::invalid_argument("duplicate layer name '" + name + "'");
      }
    }
    layout.push_back({name, offset, dim});
    offset += dim;
  }
  return layout;
}

void validate_layout(const Layout& layout, std::size_t total) {
  if (layout.empty()) {
    throw std::invalid_argument("layout needs at least one layer");
  }
  std::size_t expected = 0;
  for (const auto& spec : layout) {
    if (spec.dim == 0) {
      throw std::invalid_argument("layer '" + spec.name + "' has dimension 0");
    }
    if (spec.offset != expected) {
      throw std::invalid_argument("layer '" + spec.name + "' is not contiguous");
    }
    expected += spec.dim;
  }
  if (expected != total) {
    throw std::invalid_argument("layout covers " + std::to_string(expected) +
                                " scalars but storage has " + std::to_string(total));
  }
}

LayeredParams partition(const std::vector<std::pair<std::string, std::size_t>>& dims) {
  Layout layout = make_layout(dims);
  const auto& last = layout.back();
  std::vector<double> data(last.offset + last.dim, 0.0);
  return LayeredParams(std::move(layout), std::move(data));
}

LayeredParams::LayeredParams(Layout layout, std::vector<double> data)
    : layout_(std::move(layout)), data_(std::move(data)) {
  validate_layout(layout_, data_.size());
}

const LayerSpec& LayeredParams::find(const std::string& name) const {
  auto it = std::find_if(layout_.begin(), layout_.end(),
                         [&](const LayerSpec& s) { return s.name == name; });
  if (it == layout_.end()) {
    throw std::out_of_range("unknown layer '" + name + "'");
  }
  return *it;
}

std::span<double> LayeredParams::layer(const std::string& name) {
  const auto& spec = find(name);
  return std::span<double>(data_).subspan(spec.offset, spec.dim);
}

std::span<const double> LayeredParams::layer(const std::string& name) const {
  const auto& spec = find(name);
  return std::span<const double>(data_).subspan(spec.offset, spec.dim);
}

std::span<double> LayeredParams::layer(std::size_t index) {
  const auto& spec = layout_.at(index);
  return std::span<double>(data_).subspan(spec.offset, spec.dim);
}

std::span<const double> LayeredParams::layer(std::size_t index) const {
  const auto& spec = layout_.at(index);
  return std::span<const double>(data_).subspan(spec.offset, spec.dim);
}

std::size_t LayeredParams::layer_of(std::size_t j) const {
  if (j >= data_.size()) {
    throw std::out_of_range("coordinate out of range");
  }
  auto it = std::upper_bound(layout_.begin(), layout_.end(), j,
                             [](std::size_t v, const LayerSpec& s) { return v < s.offset; });
  return static_cast<std::size_t>(std::distance(layout_.begin(), it)) - 1;
}

bool LayeredParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void axpy(std::span<double> params, double coeff, std::span<const double> other) {
  if (params.size() != other.size()) {
    throw std::invalid_argument("axpy: length mismatch (" + std::to_string(params.size()) +
                                " vs " + std::to_string(other.size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] += coeff * other[i];
  }
}

void write_snapshot(std::ostream& out, const LayeredParams& params) {
  nlohmann::json header;
  header["format"] = kSnapshotFormat;
  header["size"] = params.size();
  header["layers"] = nlohmann::json::array();
  for (const auto& spec : params.layout()) {
    header["layers"].push_back({{"name", spec.name}, {"offset", spec.offset}, {"dim", spec.dim}});
  }
  out << header.dump() << '\n';
  for (double v : params.values()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) {
      bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) {
    throw std::runtime_error("snapshot write failed");
  }
}

LayeredParams read_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("snapshot: missing header line");
  }
  auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != kSnapshotFormat) {
    throw std::runtime_error("snapshot: unexpected format tag");
  }
  Layout layout;
  for (const auto& layer : header.at("layers")) {
    layout.push_back({layer.at("name").get<std::string>(), layer.at("offset").get<std::size_t>(),
                      layer.at("dim").get<std::size_t>()});
  }
  const auto size = header.at("size").get<std::size_t>();
  std::vector<double> data(size);
  for (auto& v : data) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
      throw std::runtime_error("snapshot: truncated payload");
    }
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    }
    v = std::bit_cast<double>(bits);
  }
  return LayeredParams(std::move(layout), std::move(data));
}

void save_snapshot(const std::string& path, const LayeredParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path);
  }
  write_snapshot(out, params);
}

LayeredParams load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  return read_snapshot(in);
}

}  // namespace helene
