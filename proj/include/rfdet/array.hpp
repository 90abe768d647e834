// Dense row-major arrays and the raw kernels the autodiff layer records.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfdet {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

inline int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape");
    n *= d;
  }
  return n;
}

inline std::vector<int64_t> strides_of(const std::vector<int>& shape) {
  std::vector<int64_t> st(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * shape[i + 1];
  return st;
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

template <class T>
struct Array {
  std::vector<int> shape;
  std::vector<T> data;

  Array() = default;
  Array(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != numel_of(shape))
      throw ShapeError("element count " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  static Array zeros(std::vector<int> s) {
    int64_t n = numel_of(s);
    return Array(std::move(s), std::vector<T>(static_cast<size_t>(n), T(0)));
  }
  static Array full(std::vector<int> s, T v) {
    int64_t n = numel_of(s);
    return Array(std::move(s), std::vector<T>(static_cast<size_t>(n), v));
  }
  static Array scalar(T v) { return Array({1}, {v}); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  bool same_shape(const Array& o) const { return shape == o.shape; }
};

template <class T>
inline bool all_finite(const Array<T>& a) {
  for (T v : a.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

// C(m,n) = A(m,k) * B(k,n). Fixed k order per output element, so results are
// bit-identical for any thread count.
template <class T>
inline Array<T> gemm_nn(const Array<T>& a, const Array<T>& b) {
  check(a.ndim() == 2 && b.ndim() == 2, "matmul expects 2-D operands");
  check(a.shape[1] == b.shape[0], "matmul inner dims differ: " + shape_str(a.shape) +
                                      " vs " + shape_str(b.shape));
  const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Array<T> c = Array<T>::zeros({m, n});
  const T* pa = a.data.data();
  const T* pb = b.data.data();
  T* pc = c.data.data();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    T* crow = pc + static_cast<int64_t>(i) * n;
    const T* arow = pa + static_cast<int64_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const T av = arow[kk];
      const T* brow = pb + static_cast<int64_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

template <class T>
inline Array<T> transpose2d(const Array<T>& a) {
  check(a.ndim() == 2, "transpose2d expects a matrix");
  const int m = a.shape[0], n = a.shape[1];
  Array<T> out = Array<T>::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(j) * m + i] = a.data[static_cast<size_t>(i) * n + j];
  return out;
}

// Iterates a multi-index over `shape`; returns false after the last index.
inline bool next_index(std::vector<int>& idx, const std::vector<int>& shape) {
  for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
    if (++idx[d] < shape[d]) return true;
    idx[d] = 0;
  }
  return false;
}

}  // namespace rfdet
