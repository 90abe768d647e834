// Reverse-mode autodiff on dense arrays. A Tape records primitive ops in
// creation order (which is topological order); backward sweeps it once in
// reverse. Arrays are immutable once recorded; the tape is rebuilt every
// forward pass and is confined to one thread.
#pragma once

#include <cstring>
#include <deque>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <tuple>
#include <unordered_map>

#include "rfdet/array.hpp"
#include "rfdet/rng.hpp"

namespace rfdet {

template <class T>
struct Parameter {
  std::string name;
  Array<T> value;
  Array<T> grad;  // same shape; zeroed explicitly per optimizer step
};

template <class T>
class ParamStore {
 public:
  Parameter<T>& create(const std::string& name, std::vector<int> shape) {
    if (index_.count(name)) throw ShapeError("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->value = Array<T>::zeros(shape);
    p->grad = Array<T>::zeros(shape);
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  void zero_grad() {
    for (auto& p : params_) std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
  }

  int64_t total_size() const {
    int64_t n = 0;
    for (auto& p : params_) n += p->value.numel();
    return n;
  }

  size_t count() const { return params_.size(); }
  Parameter<T>& at(size_t i) { return *params_[i]; }
  const Parameter<T>& at(size_t i) const { return *params_[i]; }

  std::vector<Parameter<T>*> all() {
    std::vector<Parameter<T>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, size_t> index_;
};

template <class T>
class Tape;

template <class T>
struct Node {
  Array<T> value;
  Array<T> grad;  // allocated on first contribution during backward
  bool grad_live = false;
  bool needs_grad = false;
  std::vector<Node<T>*> inputs;
  std::function<void(Node<T>&)> backprop;  // reads grad, accumulates into inputs
  Parameter<T>* param = nullptr;
  const char* op = "leaf";
};

template <class T>
class Tape {
 public:
  using NodeT = Node<T>;

  std::function<void(const std::string&)> warn = [](const std::string& msg) {
    std::cerr << "[rfdet] warning: " << msg << "\n";
  };

  NodeT* constant(Array<T> v, const char* op = "const") {
    NodeT& n = alloc();
    n.value = std::move(v);
    n.op = op;
    ensure_finite(n);
    return &n;
  }

  NodeT* leaf(Parameter<T>& p) {
    auto it = leaf_of_.find(&p);
    if (it != leaf_of_.end()) return it->second;
    NodeT& n = alloc();
    n.value = p.value;
    n.needs_grad = true;
    n.param = &p;
    n.op = "param";
    ensure_finite(n);
    leaf_of_[&p] = &n;
    param_leaves_.push_back(&n);
    return &n;
  }

  NodeT* record(Array<T> value, std::vector<NodeT*> inputs,
                std::function<void(NodeT&)> backprop, const char* op) {
    NodeT& n = alloc();
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.op = op;
    for (NodeT* in : n.inputs) n.needs_grad = n.needs_grad || in->needs_grad;
    if (n.needs_grad) n.backprop = std::move(backprop);
    ensure_finite(n);
    return &n;
  }

  // Seeds d(loss)/d(loss) = 1, sweeps the tape once in reverse creation
  // order, then flushes leaf gradients into their Parameters (additive).
  void backward(NodeT* loss) {
    check(loss->value.numel() == 1, "backward expects a scalar loss");
    touch_grad(*loss);
    loss->grad.data[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      NodeT& n = *it;
      if (!n.grad_live || !n.backprop) continue;
      n.backprop(n);
    }
    for (NodeT* leafn : param_leaves_) {
      if (!leafn->grad_live) {
        warn("parameter '" + leafn->param->name +
             "' is not reachable from the loss; gradient contribution is zero");
        continue;
      }
      Array<T>& g = leafn->param->grad;
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += leafn->grad[i];
    }
  }

  static void touch_grad(NodeT& n) {
    if (!n.grad_live) {
      n.grad = Array<T>::zeros(n.value.shape);
      n.grad_live = true;
    }
  }

  std::vector<const Parameter<T>*> touched_params() const {
    std::vector<const Parameter<T>*> out;
    for (const NodeT* n : param_leaves_) out.push_back(n->param);
    return out;
  }

  size_t size() const { return nodes_.size(); }

 private:
  NodeT& alloc() {
    nodes_.emplace_back();
    return nodes_.back();
  }

  void ensure_finite(const NodeT& n) {
    if (!all_finite(n.value))
      throw NumericalError(std::string("non-finite values produced by op '") + n.op + "'");
  }

  std::deque<NodeT> nodes_;
  std::vector<NodeT*> param_leaves_;
  std::unordered_map<const Parameter<T>*, NodeT*> leaf_of_;
};

namespace detail {

template <class T>
void accumulate(Node<T>* dst, const Array<T>& g) {
  if (!dst->needs_grad) return;
  Tape<T>::touch_grad(*dst);
  check(dst->grad.same_shape(g), "gradient shape mismatch");
  for (int64_t i = 0; i < g.numel(); ++i) dst->grad[i] += g[i];
}

// Maps an axis-reduction as outer/len/inner strides.
inline void axis_split(const std::vector<int>& shape, int axis, int64_t& outer, int64_t& len,
                       int64_t& inner) {
  check(axis >= 0 && axis < static_cast<int>(shape.size()), "axis out of range");
  outer = 1;
  inner = 1;
  len = shape[axis];
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (int d = axis + 1; d < static_cast<int>(shape.size()); ++d) inner *= shape[d];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive ops
// ---------------------------------------------------------------------------

template <class T, class FwdF, class DaF, class DbF>
Node<T>* binary_elemwise(Tape<T>& t, Node<T>* a, Node<T>* b, FwdF fwd, DaF da, DbF db,
                         const char* op) {
  check(a->value.same_shape(b->value), std::string(op) + ": shape mismatch " +
                                           shape_str(a->value.shape) + " vs " +
                                           shape_str(b->value.shape));
  Array<T> out = Array<T>::zeros(a->value.shape);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = fwd(a->value[i], b->value[i]);
  return t.record(std::move(out), {a, b},
                  [da, db](Node<T>& self) {
                    Node<T>*a = self.inputs[0], *b = self.inputs[1];
                    if (a->needs_grad) {
                      Array<T> g = Array<T>::zeros(self.grad.shape);
                      for (int64_t i = 0; i < g.numel(); ++i)
                        g[i] = self.grad[i] * da(a->value[i], b->value[i], self.value[i]);
                      detail::accumulate(a, g);
                    }
                    if (b->needs_grad) {
                      Array<T> g = Array<T>::zeros(self.grad.shape);
                      for (int64_t i = 0; i < g.numel(); ++i)
                        g[i] = self.grad[i] * db(a->value[i], b->value[i], self.value[i]);
                      detail::accumulate(b, g);
                    }
                  },
                  op);
}

template <class T, class FwdF, class DF>
Node<T>* unary_elemwise(Tape<T>& t, Node<T>* a, FwdF fwd, DF dfd, const char* op) {
  Array<T> out = Array<T>::zeros(a->value.shape);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = fwd(a->value[i]);
  return t.record(std::move(out), {a},
                  [dfd](Node<T>& self) {
                    Node<T>* a = self.inputs[0];
                    Array<T> g = Array<T>::zeros(self.grad.shape);
                    for (int64_t i = 0; i < g.numel(); ++i)
                      g[i] = self.grad[i] * dfd(a->value[i], self.value[i]);
                    detail::accumulate(a, g);
                  },
                  op);
}

template <class T>
Node<T>* add(Tape<T>& t, Node<T>* a, Node<T>* b) {
  return binary_elemwise(
      t, a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(1); }, "add");
}

template <class T>
Node<T>* sub(Tape<T>& t, Node<T>* a, Node<T>* b) {
  return binary_elemwise(
      t, a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(-1); }, "sub");
}

template <class T>
Node<T>* mul(Tape<T>& t, Node<T>* a, Node<T>* b) {
  return binary_elemwise(
      t, a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; }, "mul");
}

template <class T>
Node<T>* div(Tape<T>& t, Node<T>* a, Node<T>* b) {
  return binary_elemwise(
      t, a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
      [](T, T y, T out) { return -out / y; }, "div");
}

template <class T>
Node<T>* maximum(Tape<T>& t, Node<T>* a, Node<T>* b) {
  return binary_elemwise(
      t, a, b, [](T x, T y) { return x >= y ? x : y; },
      [](T x, T y, T) { return x >= y ? T(1) : T(0); },
      [](T x, T y, T) { return x >= y ? T(0) : T(1); }, "maximum");
}

template <class T>
Node<T>* minimum(Tape<T>& t, Node<T>* a, Node<T>* b) {
  return binary_elemwise(
      t, a, b, [](T x, T y) { return x <= y ? x : y; },
      [](T x, T y, T) { return x <= y ? T(1) : T(0); },
      [](T x, T y, T) { return x <= y ? T(0) : T(1); }, "minimum");
}

template <class T>
Node<T>* matmul(Tape<T>& t, Node<T>* a, Node<T>* b) {
  Array<T> out = gemm_nn(a->value, b->value);
  return t.record(std::move(out), {a, b},
                  [](Node<T>& self) {
                    Node<T>*a = self.inputs[0], *b = self.inputs[1];
                    if (a->needs_grad) detail::accumulate(a, gemm_nn(self.grad, transpose2d(b->value)));
                    if (b->needs_grad) detail::accumulate(b, gemm_nn(transpose2d(a->value), self.grad));
                  },
                  "matmul");
}

template <class T>
Node<T>* exp(Tape<T>& t, Node<T>* a) {
  return unary_elemwise(
      t, a, [](T x) { return std::exp(x); }, [](T, T y) { return y; }, "exp");
}

template <class T>
Node<T>* log(Tape<T>& t, Node<T>* a) {
  return unary_elemwise(
      t, a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; }, "log");
}

template <class T>
Node<T>* sigmoid(Tape<T>& t, Node<T>* a) {
  return unary_elemwise(
      t, a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); }, "sigmoid");
}

template <class T>
Node<T>* relu(Tape<T>& t, Node<T>* a) {
  return unary_elemwise(
      t, a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); }, "relu");
}

template <class T>
Node<T>* gelu(Tape<T>& t, Node<T>* a) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  return unary_elemwise(
      t, a,
      [=](T x) {
        double xd = static_cast<double>(x);
        return static_cast<T>(xd * 0.5 * (1.0 + std::erf(xd * inv_sqrt2)));
      },
      [=](T x, T) {
        double xd = static_cast<double>(x);
        double cdf = 0.5 * (1.0 + std::erf(xd * inv_sqrt2));
        double pdf = inv_sqrt2pi * std::exp(-0.5 * xd * xd);
        return static_cast<T>(cdf + xd * pdf);
      },
      "gelu");
}

template <class T>
Node<T>* abs(Tape<T>& t, Node<T>* a) {
  return unary_elemwise(
      t, a, [](T x) { return x < T(0) ? -x : x; },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); }, "abs");
}

// Constant copy of the input value; no gradient flows through.
template <class T>
Node<T>* detach(Tape<T>& t, Node<T>* a) {
  return t.constant(a->value, "detach");
}

// Max-subtracted softmax along `axis`.
template <class T>
Node<T>* softmax(Tape<T>& t, Node<T>* a, int axis) {
  int64_t outer, len, inner;
  detail::axis_split(a->value.shape, axis, outer, len, inner);
  Array<T> out = Array<T>::zeros(a->value.shape);
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      T mx = a->value[base];
      for (int64_t k = 1; k < len; ++k) mx = std::max(mx, a->value[base + k * inner]);
      T denom = T(0);
      for (int64_t k = 0; k < len; ++k) {
        T e = std::exp(a->value[base + k * inner] - mx);
        out[base + k * inner] = e;
        denom += e;
      }
      for (int64_t k = 0; k < len; ++k) out[base + k * inner] /= denom;
    }
  return t.record(std::move(out), {a},
                  [axis](Node<T>& self) {
                    Node<T>* a = self.inputs[0];
                    int64_t outer, len, inner;
                    detail::axis_split(self.value.shape, axis, outer, len, inner);
                    Array<T> g = Array<T>::zeros(self.value.shape);
                    for (int64_t o = 0; o < outer; ++o)
                      for (int64_t in = 0; in < inner; ++in) {
                        const int64_t base = o * len * inner + in;
                        T dot = T(0);
                        for (int64_t k = 0; k < len; ++k)
                          dot += self.grad[base + k * inner] * self.value[base + k * inner];
                        for (int64_t k = 0; k < len; ++k)
                          g[base + k * inner] = self.value[base + k * inner] *
                                                (self.grad[base + k * inner] - dot);
                      }
                    detail::accumulate(a, g);
                  },
                  "softmax");
}

// (x - mean) / sqrt(var + eps) along `axis`, biased variance, no affine.
template <class T>
Node<T>* layer_norm(Tape<T>& t, Node<T>* a, int axis, double eps) {
  int64_t outer, len, inner;
  detail::axis_split(a->value.shape, axis, outer, len, inner);
  Array<T> out = Array<T>::zeros(a->value.shape);
  Array<T> inv_std = Array<T>::zeros({static_cast<int>(outer * inner)});
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      T mean = T(0);
      for (int64_t k = 0; k < len; ++k) mean += a->value[base + k * inner];
      mean /= static_cast<T>(len);
      T var = T(0);
      for (int64_t k = 0; k < len; ++k) {
        T d = a->value[base + k * inner] - mean;
        var += d * d;
      }
      var /= static_cast<T>(len);
      T is = T(1) / std::sqrt(var + static_cast<T>(eps));
      inv_std[o * inner + in] = is;
      for (int64_t k = 0; k < len; ++k) out[base + k * inner] = (a->value[base + k * inner] - mean) * is;
    }
  return t.record(std::move(out), {a},
                  [axis, inv_std](Node<T>& self) {
                    Node<T>* a = self.inputs[0];
                    int64_t outer, len, inner;
                    detail::axis_split(self.value.shape, axis, outer, len, inner);
                    Array<T> g = Array<T>::zeros(self.value.shape);
                    for (int64_t o = 0; o < outer; ++o)
                      for (int64_t in = 0; in < inner; ++in) {
                        const int64_t base = o * len * inner + in;
                        const T is = inv_std[o * inner + in];
                        T gmean = T(0), gdot = T(0);
                        for (int64_t k = 0; k < len; ++k) {
                          gmean += self.grad[base + k * inner];
                          gdot += self.grad[base + k * inner] * self.value[base + k * inner];
                        }
                        gmean /= static_cast<T>(len);
                        gdot /= static_cast<T>(len);
                        for (int64_t k = 0; k < len; ++k) {
                          const T xh = self.value[base + k * inner];
                          g[base + k * inner] = (self.grad[base + k * inner] - gmean - xh * gdot) * is;
                        }
                      }
                    detail::accumulate(a, g);
                  },
                  "layer_norm");
}

namespace detail {

// Output shape after dropping `axes` (sorted, unique).
inline std::vector<int> reduced_shape(const std::vector<int>& shape, const std::vector<int>& axes) {
  std::vector<int> out;
  size_t ai = 0;
  for (int d = 0; d < static_cast<int>(shape.size()); ++d) {
    if (ai < axes.size() && axes[ai] == d) {
      ++ai;
      continue;
    }
    out.push_back(shape[d]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

template <class T>
void reduce_scatter_loop(const std::vector<int>& shape, const std::vector<int>& axes,
                         const std::function<void(int64_t src, int64_t dst)>& fn) {
  std::vector<bool> dropped(shape.size(), false);
  for (int a : axes) dropped[static_cast<size_t>(a)] = true;
  std::vector<int> idx(shape.size(), 0);
  std::vector<int> out_shape;
  for (size_t d = 0; d < shape.size(); ++d)
    if (!dropped[d]) out_shape.push_back(shape[d]);
  if (out_shape.empty()) out_shape.push_back(1);
  auto out_strides = strides_of(out_shape);
  if (numel_of(shape) == 0) return;
  int64_t src = 0;
  do {
    int64_t dst = 0;
    int od = 0;
    for (size_t d = 0; d < shape.size(); ++d) {
      if (dropped[d]) continue;
      dst += idx[d] * out_strides[static_cast<size_t>(od)];
      ++od;
    }
    fn(src, dst);
    ++src;
  } while (next_index(idx, shape));
}

inline std::vector<int> normalize_axes(std::vector<int> axes, int ndim) {
  for (int& a : axes) {
    if (a < 0) a += ndim;
    check(a >= 0 && a < ndim, "reduction axis out of range");
  }
  std::sort(axes.begin(), axes.end());
  check(std::adjacent_find(axes.begin(), axes.end()) == axes.end(), "duplicate reduction axis");
  return axes;
}

}  // namespace detail

template <class T>
Node<T>* sum(Tape<T>& t, Node<T>* a, std::vector<int> axes) {
  axes = detail::normalize_axes(std::move(axes), a->value.ndim());
  Array<T> out = Array<T>::zeros(detail::reduced_shape(a->value.shape, axes));
  detail::reduce_scatter_loop<T>(a->value.shape, axes,
                                 [&](int64_t src, int64_t dst) { out[dst] += a->value[src]; });
  return t.record(std::move(out), {a},
                  [axes](Node<T>& self) {
                    Node<T>* a = self.inputs[0];
                    Array<T> g = Array<T>::zeros(a->value.shape);
                    detail::reduce_scatter_loop<T>(
                        a->value.shape, axes,
                        [&](int64_t src, int64_t dst) { g[src] = self.grad[dst]; });
                    detail::accumulate(a, g);
                  },
                  "sum");
}

template <class T>
Node<T>* mean(Tape<T>& t, Node<T>* a, std::vector<int> axes) {
  axes = detail::normalize_axes(std::move(axes), a->value.ndim());
  int64_t count = 1;
  for (int ax : axes) count *= a->value.shape[static_cast<size_t>(ax)];
  Array<T> out = Array<T>::zeros(detail::reduced_shape(a->value.shape, axes));
  detail::reduce_scatter_loop<T>(a->value.shape, axes,
                                 [&](int64_t src, int64_t dst) { out[dst] += a->value[src]; });
  const T scale = T(1) / static_cast<T>(count);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= scale;
  return t.record(std::move(out), {a},
                  [axes, scale](Node<T>& self) {
                    Node<T>* a = self.inputs[0];
                    Array<T> g = Array<T>::zeros(a->value.shape);
                    detail::reduce_scatter_loop<T>(
                        a->value.shape, axes,
                        [&](int64_t src, int64_t dst) { g[src] = self.grad[dst] * scale; });
                    detail::accumulate(a, g);
                  },
                  "mean");
}

template <class T>
Node<T>* reshape(Tape<T>& t, Node<T>* a, std::vector<int> new_shape) {
  check(numel_of(new_shape) == a->value.numel(), "reshape changes element count");
  Array<T> out(new_shape, a->value.data);
  return t.record(std::move(out), {a},
                  [](Node<T>& self) {
                    Node<T>* a = self.inputs[0];
                    detail::accumulate(a, Array<T>(a->value.shape, self.grad.data));
                  },
                  "reshape");
}

template <class T>
Array<T> permute_array(const Array<T>& a, const std::vector<int>& perm) {
  check(perm.size() == a.shape.size(), "transpose perm rank mismatch");
  std::vector<int> out_shape(perm.size());
  for (size_t d = 0; d < perm.size(); ++d) out_shape[d] = a.shape[static_cast<size_t>(perm[d])];
  Array<T> out = Array<T>::zeros(out_shape);
  auto in_strides = strides_of(a.shape);
  std::vector<int> idx(out_shape.size(), 0);
  if (a.numel() == 0) return out;
  int64_t dst = 0;
  do {
    int64_t src = 0;
    for (size_t d = 0; d < perm.size(); ++d) src += idx[d] * in_strides[static_cast<size_t>(perm[d])];
    out[dst++] = a[src];
  } while (next_index(idx, out_shape));
  return out;
}

template <class T>
Node<T>* transpose(Tape<T>& t, Node<T>* a, std::vector<int> perm = {}) {
  if (perm.empty()) {
    perm.resize(a->value.shape.size());
    for (size_t d = 0; d < perm.size(); ++d) perm[d] = static_cast<int>(perm.size() - 1 - d);
  }
  Array<T> out = permute_array(a->value, perm);
  return t.record(std::move(out), {a},
                  [perm](Node<T>& self) {
                    std::vector<int> inv(perm.size());
                    for (size_t d = 0; d < perm.size(); ++d) inv[static_cast<size_t>(perm[d])] = static_cast<int>(d);
                    detail::accumulate(self.inputs[0], permute_array(self.grad, inv));
                  },
                  "transpose");
}

template <class T>
Node<T>* concat(Tape<T>& t, std::vector<Node<T>*> parts, int axis) {
  check(!parts.empty(), "concat of zero inputs");
  const auto& s0 = parts[0]->value.shape;
  if (axis < 0) axis += static_cast<int>(s0.size());
  check(axis >= 0 && axis < static_cast<int>(s0.size()), "concat axis out of range");
  int total = 0;
  for (auto* p : parts) {
    check(p->value.ndim() == static_cast<int>(s0.size()), "concat rank mismatch");
    for (int d = 0; d < static_cast<int>(s0.size()); ++d)
      if (d != axis) check(p->value.shape[d] == s0[d], "concat non-axis dims differ");
    total += p->value.shape[static_cast<size_t>(axis)];
  }
  std::vector<int> out_shape = s0;
  out_shape[static_cast<size_t>(axis)] = total;
  Array<T> out = Array<T>::zeros(out_shape);
  int64_t outer, len, inner;
  detail::axis_split(out_shape, axis, outer, len, inner);
  int64_t offset = 0;
  for (auto* p : parts) {
    const int64_t plen = p->value.shape[static_cast<size_t>(axis)];
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t k = 0; k < plen; ++k)
        std::memcpy(&out.data[((o * len + offset + k) * inner)],
                    &p->value.data[((o * plen + k) * inner)], sizeof(T) * static_cast<size_t>(inner));
    offset += plen;
  }
  return t.record(std::move(out), parts,
                  [axis](Node<T>& self) {
                    int64_t outer, len, inner;
                    detail::axis_split(self.value.shape, axis, outer, len, inner);
                    int64_t offset = 0;
                    for (Node<T>* p : self.inputs) {
                      const int64_t plen = p->value.shape[static_cast<size_t>(axis)];
                      if (p->needs_grad) {
                        Array<T> g = Array<T>::zeros(p->value.shape);
                        for (int64_t o = 0; o < outer; ++o)
                          for (int64_t k = 0; k < plen; ++k)
                            std::memcpy(&g.data[((o * plen + k) * inner)],
                                        &self.grad.data[((o * len + offset + k) * inner)],
                                        sizeof(T) * static_cast<size_t>(inner));
                        detail::accumulate(p, g);
                      }
                      offset += plen;
                    }
                  },
                  "concat");
}

// Half-open [starts, stops) per axis.
template <class T>
Node<T>* slice(Tape<T>& t, Node<T>* a, std::vector<int> starts, std::vector<int> stops) {
  const auto& s = a->value.shape;
  check(starts.size() == s.size() && stops.size() == s.size(), "slice rank mismatch");
  std::vector<int> out_shape(s.size());
  for (size_t d = 0; d < s.size(); ++d) {
    check(0 <= starts[d] && starts[d] < stops[d] && stops[d] <= s[d], "slice range invalid");
    out_shape[d] = stops[d] - starts[d];
  }
  Array<T> out = Array<T>::zeros(out_shape);
  auto in_strides = strides_of(s);
  std::vector<int> idx(s.size(), 0);
  int64_t dst = 0;
  do {
    int64_t src = 0;
    for (size_t d = 0; d < s.size(); ++d) src += (starts[d] + idx[d]) * in_strides[d];
    out[dst++] = a->value[src];
  } while (next_index(idx, out_shape));
  return t.record(std::move(out), {a},
                  [starts, out_shape](Node<T>& self) {
                    Node<T>* a = self.inputs[0];
                    Array<T> g = Array<T>::zeros(a->value.shape);
                    auto in_strides = strides_of(a->value.shape);
                    std::vector<int> idx(out_shape.size(), 0);
                    int64_t src = 0;
                    do {
                      int64_t dst = 0;
                      for (size_t d = 0; d < out_shape.size(); ++d)
                        dst += (starts[d] + idx[d]) * in_strides[d];
                      g[dst] = self.grad[src++];
                    } while (next_index(idx, out_shape));
                    detail::accumulate(a, g);
                  },
                  "slice");
}

// NumPy-style broadcast to `target`: shape is right-aligned, size-1 dims expand.
template <class T>
Node<T>* broadcast(Tape<T>& t, Node<T>* a, std::vector<int> target) {
  const auto& s = a->value.shape;
  check(s.size() <= target.size(), "broadcast cannot drop dims");
  const int pad = static_cast<int>(target.size() - s.size());
  for (size_t d = 0; d < s.size(); ++d)
    check(s[d] == target[d + pad] || s[d] == 1,
          "broadcast incompatible: " + shape_str(s) + " -> " + shape_str(target));
  Array<T> out = Array<T>::zeros(target);
  auto in_strides = strides_of(s);
  std::vector<int> idx(target.size(), 0);
  int64_t dst = 0;
  do {
    int64_t src = 0;
    for (size_t d = 0; d < s.size(); ++d) {
      const int id = s[d] == 1 ? 0 : idx[d + pad];
      src += id * in_strides[d];
    }
    out[dst++] = a->value[src];
  } while (next_index(idx, target));
  return t.record(std::move(out), {a},
                  [target, pad](Node<T>& self) {
                    Node<T>* a = self.inputs[0];
                    const auto& s = a->value.shape;
                    Array<T> g = Array<T>::zeros(s);
                    auto in_strides = strides_of(s);
                    std::vector<int> idx(target.size(), 0);
                    int64_t src = 0;
                    do {
                      int64_t dst = 0;
                      for (size_t d = 0; d < s.size(); ++d) {
                        const int id = s[d] == 1 ? 0 : idx[static_cast<size_t>(d + pad)];
                        dst += id * in_strides[d];
                      }
                      g[dst] += self.grad[src++];
                    } while (next_index(idx, target));
                    detail::accumulate(a, g);
                  },
                  "broadcast");
}

// Convenience wrappers used throughout the model code.

template <class T>
Node<T>* scalar_mul(Tape<T>& t, Node<T>* a, T s) {
  auto c = t.constant(Array<T>::full(a->value.shape, s), "scale");
  return mul(t, a, c);
}

template <class T>
Node<T>* add_scalar(Tape<T>& t, Node<T>* a, T s) {
  auto c = t.constant(Array<T>::full(a->value.shape, s), "offset");
  return add(t, a, c);
}

// x (n,d) * W (d,k) + b (k)
template <class T>
Node<T>* linear(Tape<T>& t, Node<T>* x, Node<T>* w, Node<T>* b) {
  auto y = matmul(t, x, w);
  return add(t, y, broadcast(t, b, y->value.shape));
}

// ---------------------------------------------------------------------------
// apply(): uniform primitive-op dispatch (used by the per-op property tests)
// ---------------------------------------------------------------------------

enum class OpKind {
  add,
  sub,
  mul,
  div,
  matmul,
  exp,
  log,
  sigmoid,
  relu,
  gelu,
  softmax,
  layer_norm,
  sum,
  mean,
  reshape,
  transpose,
  concat,
  slice,
  broadcast,
  abs,
  maximum,
  minimum,
  detach,
};

struct OpAttrs {
  int axis = -1;
  double eps = 1e-5;
  std::vector<int> axes;
  std::vector<int> shape;  // reshape target / broadcast target
  std::vector<int> perm;
  std::vector<int> starts, stops;
};

template <class T>
Node<T>* apply(Tape<T>& t, OpKind kind, std::vector<Node<T>*> in, const OpAttrs& at = {}) {
  auto want = [&](size_t n) { check(in.size() == n, "apply: wrong input count"); };
  switch (kind) {
    case OpKind::add: want(2); return add(t, in[0], in[1]);
    case OpKind::sub: want(2); return sub(t, in[0], in[1]);
    case OpKind::mul: want(2); return mul(t, in[0], in[1]);
    case OpKind::div: want(2); return div(t, in[0], in[1]);
    case OpKind::matmul: want(2); return matmul(t, in[0], in[1]);
    case OpKind::exp: want(1); return exp(t, in[0]);
    case OpKind::log: want(1); return log(t, in[0]);
    case OpKind::sigmoid: want(1); return sigmoid(t, in[0]);
    case OpKind::relu: want(1); return relu(t, in[0]);
    case OpKind::gelu: want(1); return gelu(t, in[0]);
    case OpKind::softmax: want(1); return softmax(t, in[0], at.axis);
    case OpKind::layer_norm: want(1); return layer_norm(t, in[0], at.axis, at.eps);
    case OpKind::sum: want(1); return sum(t, in[0], at.axes);
    case OpKind::mean: want(1); return mean(t, in[0], at.axes);
    case OpKind::reshape: want(1); return reshape(t, in[0], at.shape);
    case OpKind::transpose: want(1); return transpose(t, in[0], at.perm);
    case OpKind::concat: return concat(t, in, at.axis);
    case OpKind::slice: want(1); return slice(t, in[0], at.starts, at.stops);
    case OpKind::broadcast: want(1); return broadcast(t, in[0], at.shape);
    case OpKind::abs: want(1); return abs(t, in[0]);
    case OpKind::maximum: want(2); return maximum(t, in[0], in[1]);
    case OpKind::minimum: want(2); return minimum(t, in[0], in[1]);
    case OpKind::detach: want(1); return detach(t, in[0]);
  }
  throw ShapeError("apply: unknown op kind");
}

// ---------------------------------------------------------------------------
// Gradient checking (fp64)
// ---------------------------------------------------------------------------

struct GradCheckEntry {
  std::string param;
  int64_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<GradCheckEntry> worst;  // sorted, most offending first
};

// build: (Tape<double>&) -> Node<double>* scalar loss, evaluated at the
// parameters' current values.
template <class BuildFn>
GradCheckReport grad_check(BuildFn&& build, const std::vector<Parameter<double>*>& params,
                           double step) {
  for (auto* p : params) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> t;
    t.warn = [](const std::string&) {};
    Node<double>* loss = build(t);
    t.backward(loss);
    for (auto* p : params) analytic.push_back(p->grad.data);
  }
  auto eval = [&]() {
    Tape<double> t;
    t.warn = [](const std::string&) {};
    return build(t)->value.data[0];
  };
  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<double>& p = *params[pi];
    for (int64_t i = 0; i < p.value.numel(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double fp = eval();
      p.value[i] = saved - step;
      const double fm = eval();
      p.value[i] = saved;
      const double fd = (fp - fm) / (2.0 * step);
      const double a = analytic[pi][static_cast<size_t>(i)];
      const double rel = std::fabs(a - fd) / std::max(1.0, std::fabs(fd));
      report.worst.push_back({p.name, i, a, fd, rel});
      report.max_rel_err = std::max(report.max_rel_err, rel);
    }
  }
  std::sort(report.worst.begin(), report.worst.end(),
            [](const GradCheckEntry& a, const GradCheckEntry& b) { return a.rel_err > b.rel_err; });
  if (report.worst.size() > 16) report.worst.resize(16);
  return report;
}

// Xavier-uniform fill, limit sqrt(6 / (fan_in + fan_out)).
template <class T>
void xavier_fill(Array<T>& a, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : a.data) v = static_cast<T>(rng.uniform(-limit, limit));
}

}  // namespace rfdet
