#pragma once

// Distributed-embeddings tensor: one slice per compute unit, one row per
// profile model, one column per layer (zero-padded to the widest model),
// holding normalized layer execution times. A boolean mask selects the
// (unit, model, layer) cells of a queried mapping.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pipeboost/simulator.hpp"
#include "pipeboost/workload.hpp"

namespace pipeboost {

struct TensorDims {
  std::size_t units = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return units * rows * cols; }
  bool operator==(const TensorDims&) const = default;
};

template <class T>
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(TensorDims dims, T fill = T{})
      : dims_(dims), data_(dims.size(), fill) {}

  const TensorDims& dims() const { return dims_; }

  T& at(std::size_t unit, std::size_t row, std::size_t col) {
    return data_[index(unit, row, col)];
  }
  const T& at(std::size_t unit, std::size_t row, std::size_t col) const {
    return data_[index(unit, row, col)];
  }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t index(std::size_t unit, std::size_t row, std::size_t col) const {
    return (unit * dims_.rows + row) * dims_.cols + col;
  }

  TensorDims dims_;
  std::vector<T> data_;
};

using EmbeddingTensor = Tensor3<double>;
// uint8_t rather than bool so the storage is a plain contiguous array.
using MaskTensor = Tensor3<std::uint8_t>;

/// Layer costs divided by the global maximum layer cost of the profile.
EmbeddingTensor build_embedding(const DeviceProfile& profile);

MaskTensor build_mask(const Workload& workload, const Mapping& mapping,
                      const DeviceProfile& profile);

EmbeddingTensor masked_input(const EmbeddingTensor& embedding, const MaskTensor& mask);

/// Debug dump: magic "EMB1", three little-endian u16 dims, two reserved
/// zero bytes, then little-endian f32 cells in [unit][row][col] order.
/// A JSON sidecar `<path>.json` records dims and model names.
void dump_embedding(const EmbeddingTensor& tensor, const DeviceProfile& profile,
                    const std::filesystem::path& path);
EmbeddingTensor read_embedding_dump(const std::filesystem::path& path);

}  // namespace pipeboost
