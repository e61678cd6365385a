#include "igniter/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "archive payloads are little-endian; big-endian hosts are unsupported");

namespace igniter {

namespace {

constexpr const char* kMagic = "igniter-tensors 1";

template <class Dst, class Src>
void convert_into(std::vector<std::byte>& out, const Src* src, std::int64_t n) {
  out.resize(static_cast<std::size_t>(n) * sizeof(Dst));
  Dst* dst = reinterpret_cast<Dst*>(out.data());
  for (std::int64_t i = 0; i < n; ++i) dst[i] = static_cast<Dst>(src[i]);
}

template <class Dst, class Src>
void convert_from(Dst* dst, const std::vector<std::byte>& in, std::int64_t n) {
  const Src* src = reinterpret_cast<const Src*>(in.data());
  for (std::int64_t i = 0; i < n; ++i) dst[i] = static_cast<Dst>(src[i]);
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "0" : s;
}

std::vector<std::int64_t> parse_shape(const std::string& s) {
  std::vector<std::int64_t> shape;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      shape.push_back(std::stoll(part));
    } catch (const std::exception&) {
      throw parse_error("bad tensor shape: " + s);
    }
  }
  if (shape.empty()) throw parse_error("bad tensor shape: " + s);
  return shape;
}

}  // namespace

std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::f32: return 4;
    case Dtype::f64: return 8;
    case Dtype::i64: return 8;
  }
  throw error("unreachable dtype");
}

const char* dtype_name(Dtype d) {
  switch (d) {
    case Dtype::f32: return "f32";
    case Dtype::f64: return "f64";
    case Dtype::i64: return "i64";
  }
  throw error("unreachable dtype");
}

Dtype dtype_from_name(const std::string& name) {
  if (name == "f32") return Dtype::f32;
  if (name == "f64") return Dtype::f64;
  if (name == "i64") return Dtype::i64;
  throw parse_error("unknown dtype: " + name);
}

std::int64_t ArchiveTensor::elem_count() const {
  std::int64_t n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

void write_archive(const std::string& path, const std::vector<ArchiveTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << kMagic << '\n' << tensors.size() << '\n';
  std::int64_t offset = 0;
  for (const auto& t : tensors) {
    if (t.name.find(' ') != std::string::npos) {
      throw error("tensor name contains a space: " + t.name);
    }
    if (static_cast<std::int64_t>(t.data.size()) != t.elem_count() * static_cast<std::int64_t>(dtype_size(t.dtype))) {
      throw error("tensor payload size mismatch: " + t.name);
    }
    out << t.name << ' ' << shape_string(t.shape) << ' ' << dtype_name(t.dtype) << ' ' << offset
        << '\n';
    offset += static_cast<std::int64_t>(t.data.size());
  }
  out << "data\n";
  for (const auto& t : tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size()));
  }
  if (!out) throw io_error("write failed: " + path);
}

std::vector<ArchiveTensor> read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw parse_error(path + ": not an igniter tensor archive");
  }
  if (!std::getline(in, line)) throw parse_error(path + ": missing tensor count");
  std::size_t count = 0;
  try {
    count = static_cast<std::size_t>(std::stoull(line));
  } catch (const std::exception&) {
    throw parse_error(path + ": bad tensor count '" + line + "'");
  }
  std::vector<ArchiveTensor> tensors(count);
  std::vector<std::int64_t> offsets(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw parse_error(path + ": truncated header");
    std::stringstream ss(line);
    std::string shape_s, dtype_s;
    if (!(ss >> tensors[i].name >> shape_s >> dtype_s >> offsets[i])) {
      throw parse_error(path + ": bad tensor header line '" + line + "'");
    }
    tensors[i].shape = parse_shape(shape_s);
    tensors[i].dtype = dtype_from_name(dtype_s);
  }
  if (!std::getline(in, line) || line != "data") {
    throw parse_error(path + ": missing data marker");
  }
  const std::streampos payload_start = in.tellg();
  for (std::size_t i = 0; i < count; ++i) {
    auto& t = tensors[i];
    const std::size_t bytes = static_cast<std::size_t>(t.elem_count()) * dtype_size(t.dtype);
    t.data.resize(bytes);
    in.seekg(payload_start + static_cast<std::streamoff>(offsets[i]));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) {
      throw io_error(path + ": truncated payload for tensor '" + t.name + "'");
    }
  }
  return tensors;
}

template <class S>
ArchiveTensor pack_matrix(const std::string& name, const Mat<S>& m, Dtype dtype) {
  ArchiveTensor t;
  t.name = name;
  t.shape = {m.rows(), m.cols()};
  t.dtype = dtype;
  // Row-major payload from column-major storage.
  std::vector<S> row_major(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) row_major[k++] = m(r, c);
  }
  switch (dtype) {
    case Dtype::f32: convert_into<float>(t.data, row_major.data(), m.size()); break;
    case Dtype::f64: convert_into<double>(t.data, row_major.data(), m.size()); break;
    case Dtype::i64: convert_into<std::int64_t>(t.data, row_major.data(), m.size()); break;
  }
  return t;
}

template <class S>
ArchiveTensor pack_vector(const std::string& name, const Vec<S>& v, Dtype dtype) {
  ArchiveTensor t;
  t.name = name;
  t.shape = {v.size()};
  t.dtype = dtype;
  switch (dtype) {
    case Dtype::f32: convert_into<float>(t.data, v.data(), v.size()); break;
    case Dtype::f64: convert_into<double>(t.data, v.data(), v.size()); break;
    case Dtype::i64: convert_into<std::int64_t>(t.data, v.data(), v.size()); break;
  }
  return t;
}

ArchiveTensor pack_i64(const std::string& name, const std::vector<std::int64_t>& values) {
  ArchiveTensor t;
  t.name = name;
  t.shape = {static_cast<std::int64_t>(values.size())};
  t.dtype = Dtype::i64;
  t.data.resize(values.size() * sizeof(std::int64_t));
  std::memcpy(t.data.data(), values.data(), t.data.size());
  return t;
}

template <class S>
void unpack_matrix(const ArchiveTensor& t, Mat<S>& m) {
  if (t.shape.size() != 2 || t.shape[0] != m.rows() || t.shape[1] != m.cols()) {
    throw error("shape mismatch for tensor '" + t.name + "'");
  }
  std::vector<S> row_major(static_cast<std::size_t>(t.elem_count()));
  switch (t.dtype) {
    case Dtype::f32: convert_from<S, float>(row_major.data(), t.data, t.elem_count()); break;
    case Dtype::f64: convert_from<S, double>(row_major.data(), t.data, t.elem_count()); break;
    case Dtype::i64: convert_from<S, std::int64_t>(row_major.data(), t.data, t.elem_count()); break;
  }
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row_major[k++];
  }
}

template <class S>
void unpack_vector(const ArchiveTensor& t, Vec<S>& v) {
  if (t.shape.size() != 1 || t.shape[0] != v.size()) {
    throw error("shape mismatch for tensor '" + t.name + "'");
  }
  switch (t.dtype) {
    case Dtype::f32: convert_from<S, float>(v.data(), t.data, t.elem_count()); break;
    case Dtype::f64: convert_from<S, double>(v.data(), t.data, t.elem_count()); break;
    case Dtype::i64: convert_from<S, std::int64_t>(v.data(), t.data, t.elem_count()); break;
  }
}

std::vector<std::int64_t> unpack_i64(const ArchiveTensor& t) {
  if (t.dtype != Dtype::i64) throw error("expected i64 tensor '" + t.name + "'");
  std::vector<std::int64_t> out(static_cast<std::size_t>(t.elem_count()));
  std::memcpy(out.data(), t.data.data(), t.data.size());
  return out;
}

template ArchiveTensor pack_matrix<float>(const std::string&, const Mat<float>&, Dtype);
template ArchiveTensor pack_matrix<double>(const std::string&, const Mat<double>&, Dtype);
template ArchiveTensor pack_vector<float>(const std::string&, const Vec<float>&, Dtype);
template ArchiveTensor pack_vector<double>(const std::string&, const Vec<double>&, Dtype);
template void unpack_matrix<float>(const ArchiveTensor&, Mat<float>&);
template void unpack_matrix<double>(const ArchiveTensor&, Mat<double>&);
template void unpack_vector<float>(const ArchiveTensor&, Vec<float>&);
template void unpack_vector<double>(const ArchiveTensor&, Vec<double>&);

}  // namespace igniter
