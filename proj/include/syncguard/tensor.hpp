#pragma once

// Dense row-major tensor. Shapes are small (rank <= 4) and known at runtime;
// all heavy lifting is delegated to Eigen maps over the flat buffer.

#include <Eigen/Dense>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "syncguard/common.hpp"

namespace syncguard {

template <typename T>
struct Tensor {
  std::vector<long> shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(std::vector<long> s) : shape(std::move(s)) {
    v.assign(static_cast<size_t>(numel_of(shape)), T(0));
  }
  Tensor(std::vector<long> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
    require(long(v.size()) == numel_of(shape), ErrorKind::contract, "tensor data/shape mismatch");
  }

  static long numel_of(const std::vector<long>& s) {
    long n = 1;
    for (long d : s) {
      require(d > 0, ErrorKind::contract, "tensor dims must be positive");
      n *= d;
    }
    return n;
  }

  long numel() const { return long(v.size()); }
  long rank() const { return long(shape.size()); }
  long dim(long i) const { return shape[size_t(i)]; }
  bool empty() const { return v.empty(); }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  // Flat access.
  T& operator[](long i) { return v[size_t(i)]; }
  const T& operator[](long i) const { return v[size_t(i)]; }

  // Rank-specific access, row-major.
  T& at(long i, long j) { return v[size_t(i * shape[1] + j)]; }
  const T& at(long i, long j) const { return v[size_t(i * shape[1] + j)]; }
  T& at(long c, long t, long h) { return v[size_t((c * shape[1] + t) * shape[2] + h)]; }
  const T& at(long c, long t, long h) const {
    return v[size_t((c * shape[1] + t) * shape[2] + h)];
  }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  Tensor reshaped(std::vector<long> s) const {
    require(numel_of(s) == numel(), ErrorKind::contract, "reshape changes element count");
    return Tensor(std::move(s), v);
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;

// View a flat buffer as a rows x cols row-major matrix.
template <typename T>
MapM<T> as_matrix(Tensor<T>& t, long rows, long cols) {
  require(rows * cols == t.numel(), ErrorKind::contract, "matrix view size mismatch");
  return MapM<T>(t.data(), rows, cols);
}
template <typename T>
CMapM<T> as_matrix(const Tensor<T>& t, long rows, long cols) {
  require(rows * cols == t.numel(), ErrorKind::contract, "matrix view size mismatch");
  return CMapM<T>(t.data(), rows, cols);
}

template <typename T>
Tensor<T> randn(std::vector<long> shape, Rng& rng, double stddev) {
  Tensor<T> t(std::move(shape));
  for (auto& x : t.v) x = T(rng.gaussian() * stddev);
  return t;
}

}  // namespace syncguard
