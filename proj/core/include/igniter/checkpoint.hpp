#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "igniter/errors.hpp"
#include "igniter/linalg.hpp"

namespace igniter {

/// Named-tensor archive: a text header (format version, tensor count, one
/// "name shape dtype offset" line per tensor) followed by row-major
/// little-endian payloads. Used for influence embeddings and checkpoints.

enum class Dtype { f32, f64, i64 };

std::size_t dtype_size(Dtype d);
const char* dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& name);

struct ArchiveTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  Dtype dtype = Dtype::f32;
  std::vector<std::byte> data;  // row-major payload

  std::int64_t elem_count() const;
};

void write_archive(const std::string& path, const std::vector<ArchiveTensor>& tensors);
std::vector<ArchiveTensor> read_archive(const std::string& path);

// --- Eigen bridges (row-major serialization of column-major storage) -------

template <class S>
constexpr Dtype dtype_of() {
  if constexpr (std::is_same_v<S, float>) return Dtype::f32;
  if constexpr (std::is_same_v<S, double>) return Dtype::f64;
  return Dtype::i64;
}

template <class S>
ArchiveTensor pack_matrix(const std::string& name, const Mat<S>& m, Dtype dtype = dtype_of<S>());

template <class S>
ArchiveTensor pack_vector(const std::string& name, const Vec<S>& v, Dtype dtype = dtype_of<S>());

ArchiveTensor pack_i64(const std::string& name, const std::vector<std::int64_t>& values);

/// Shape- and dtype-checked unpack into a preallocated matrix/vector.
template <class S>
void unpack_matrix(const ArchiveTensor& t, Mat<S>& m);

template <class S>
void unpack_vector(const ArchiveTensor& t, Vec<S>& v);

std::vector<std::int64_t> unpack_i64(const ArchiveTensor& t);

}  // namespace igniter
