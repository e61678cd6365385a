#include "igniter/model.hpp"

#include <cmath>
#include <unordered_map>

#include "igniter/checkpoint.hpp"
#include "igniter/rng.hpp"

namespace igniter {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::int64_t> dims_to_meta(const ModelDims& d) {
  return {d.g,     d.g1,    d.g2,    d.u,     d.gamma,
          d.l,     d.m,     d.n_max, d.d_max, d.s_max,
          d.use_diffusion ? 1 : 0, d.use_adoption ? 1 : 0};
}

ModelDims dims_from_meta(const std::vector<std::int64_t>& v) {
  if (v.size() != 12) throw parse_error("checkpoint meta.dims has unexpected length");
  ModelDims d;
  d.g = static_cast<int>(v[0]);
  d.g1 = static_cast<int>(v[1]);
  d.g2 = static_cast<int>(v[2]);
  d.u = static_cast<int>(v[3]);
  d.gamma = static_cast<int>(v[4]);
  d.l = static_cast<int>(v[5]);
  d.m = static_cast<int>(v[6]);
  d.n_max = static_cast<int>(v[7]);
  d.d_max = static_cast<int>(v[8]);
  d.s_max = static_cast<int>(v[9]);
  d.use_diffusion = v[10] != 0;
  d.use_adoption = v[11] != 0;
  return d;
}

}  // namespace

template <class S>
ModelParams<S> init_model(const ModelDims& dims, std::uint64_t seed) {
  ModelParams<S> model = ModelParams<S>::sized(dims);
  Rng rng(derive_seed(seed, 0x90d31u));
  visit_tensors(model, [&rng](const std::string& name, auto& t) {
    using T = std::decay_t<decltype(t)>;
    if constexpr (std::is_same_v<T, Mat<S>>) {
      const double r = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        for (Eigen::Index row = 0; row < t.rows(); ++row) {
          t(row, c) = static_cast<S>(rng.uniform(-r, r));
        }
      }
    } else {
      if (ends_with(name, ".q")) {
        const double r = 1.0 / std::sqrt(static_cast<double>(t.size()));
        for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.uniform(-r, r));
      } else {
        t.setZero();
      }
    }
  });
  return model;
}

namespace {

template <class S>
void save_checkpoint_impl(const ModelParams<S>& model, const std::string& path) {
  std::vector<ArchiveTensor> tensors;
  tensors.push_back(pack_i64("meta.dims", dims_to_meta(model.dims)));
  visit_tensors(model, [&tensors](const std::string& name, const auto& t) {
    using T = std::decay_t<decltype(t)>;
    if constexpr (std::is_same_v<T, Mat<S>>) {
      tensors.push_back(pack_matrix<S>(name, t));
    } else {
      tensors.push_back(pack_vector<S>(name, t));
    }
  });
  write_archive(path, tensors);
}

}  // namespace

void save_checkpoint(const ModelParams<float>& model, const std::string& path) {
  save_checkpoint_impl(model, path);
}

void save_checkpoint(const ModelParams<double>& model, const std::string& path) {
  save_checkpoint_impl(model, path);
}

ModelDims read_checkpoint_dims(const std::string& path) {
  for (const auto& t : read_archive(path)) {
    if (t.name == "meta.dims") return dims_from_meta(unpack_i64(t));
  }
  throw parse_error(path + ": missing meta.dims tensor");
}

template <class S>
void load_checkpoint_into(ModelParams<S>& model, const std::string& path) {
  const auto tensors = read_archive(path);
  std::unordered_map<std::string, const ArchiveTensor*> by_name;
  for (const auto& t : tensors) by_name.emplace(t.name, &t);

  std::vector<std::string> mismatched;
  visit_tensors(model, [&](const std::string& name, auto& t) {
    using T = std::decay_t<decltype(t)>;
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      mismatched.push_back(name + " (missing)");
      return;
    }
    const ArchiveTensor& a = *it->second;
    if constexpr (std::is_same_v<T, Mat<S>>) {
      if (a.shape.size() != 2 || a.shape[0] != t.rows() || a.shape[1] != t.cols()) {
        mismatched.push_back(name);
        return;
      }
      unpack_matrix(a, t);
    } else {
      if (a.shape.size() != 1 || a.shape[0] != t.size()) {
        mismatched.push_back(name);
        return;
      }
      unpack_vector(a, t);
    }
  });
  if (!mismatched.empty()) {
    std::string msg = path + ": tensor shape/name mismatch:";
    for (const auto& n : mismatched) msg += " " + n;
    throw error(msg);
  }
}

template <class S>
ModelParams<S> load_checkpoint(const std::string& path) {
  ModelParams<S> model = ModelParams<S>::sized(read_checkpoint_dims(path));
  load_checkpoint_into(model, path);
  return model;
}

template ModelParams<float> init_model(const ModelDims&, std::uint64_t);
template ModelParams<double> init_model(const ModelDims&, std::uint64_t);
template void load_checkpoint_into(ModelParams<float>&, const std::string&);
template void load_checkpoint_into(ModelParams<double>&, const std::string&);
template ModelParams<float> load_checkpoint(const std::string&);
template ModelParams<double> load_checkpoint(const std::string&);

}  // namespace igniter
