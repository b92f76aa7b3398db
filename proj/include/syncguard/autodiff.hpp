#pragma once

// Reverse-mode autodiff on a define-by-run tape. Templated on the scalar so
// training runs in float while gradient checks run in double. The tape owns
// every node; backward closures capture raw node pointers and stay valid for
// the tape's lifetime. Convolutions recompute their im2col buffer in the
// backward pass instead of caching it.

#include <functional>
#include <memory>
#include <vector>

#include "syncguard/tensor.hpp"

namespace syncguard::ad {

template <typename T>
struct Tape;

template <typename T>
struct Node {
  Tensor<T> val;
  Tensor<T> grad;  // allocated on first accumulation
  bool needs_grad = false;
  std::function<void()> backward;
  Tape<T>* tape = nullptr;

  void accumulate(const Tensor<T>& g) {
    if (grad.empty()) grad = Tensor<T>(val.shape);
    for (long i = 0; i < g.numel(); ++i) grad[i] += g[i];
  }
  Tensor<T>& grad_buf() {
    if (grad.empty()) grad = Tensor<T>(val.shape);
    return grad;
  }
};

template <typename T>
using VarPtr = std::shared_ptr<Node<T>>;

template <typename T>
struct Tape {
  std::vector<VarPtr<T>> nodes;

  VarPtr<T> make(Tensor<T> val, bool needs) {
    auto n = std::make_shared<Node<T>>();
    n->val = std::move(val);
    n->needs_grad = needs;
    n->tape = this;
    nodes.push_back(n);
    return n;
  }

  VarPtr<T> constant(Tensor<T> val) { return make(std::move(val), false); }
  VarPtr<T> leaf(Tensor<T> val) { return make(std::move(val), true); }

  // Backpropagate from a scalar root through the recorded graph.
  void backward(const VarPtr<T>& root) {
    require(root->tape == this, ErrorKind::contract, "root lives on another tape");
    require(root->val.numel() == 1, ErrorKind::contract, "backward needs a scalar root");
    root->grad_buf()[0] += T(1);
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
      Node<T>* n = it->get();
      if (n->needs_grad && n->backward && !n->grad.empty()) n->backward();
    }
  }

  size_t size() const { return nodes.size(); }
};

namespace detail {

template <typename T>
Tape<T>* tape_of(const VarPtr<T>& a) {
  return a->tape;
}

template <typename T, typename... Rest>
Tape<T>* tape_of(const VarPtr<T>& a, const Rest&... rest) {
  Tape<T>* t = tape_of(rest...);
  require(a->tape == t, ErrorKind::contract, "operands live on different tapes");
  return t;
}

template <typename T>
bool any_requires(const VarPtr<T>& a) {
  return a->needs_grad;
}
template <typename T, typename... Rest>
bool any_requires(const VarPtr<T>& a, const Rest&... rest) {
  return a->needs_grad || any_requires(rest...);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic.
// ---------------------------------------------------------------------------

template <typename T>
VarPtr<T> add(const VarPtr<T>& a, const VarPtr<T>& b) {
  require(a->val.same_shape(b->val), ErrorKind::contract, "add: shape mismatch");
  Tape<T>* tp = detail::tape_of(a, b);
  Tensor<T> out = a->val;
  for (long i = 0; i < out.numel(); ++i) out[i] += b->val[i];
  auto n = tp->make(std::move(out), detail::any_requires(a, b));
  if (n->needs_grad) {
    Node<T>*na = a.get(), *nb = b.get(), *no = n.get();
    n->backward = [na, nb, no] {
      if (na->needs_grad) na->accumulate(no->grad);
      if (nb->needs_grad) nb->accumulate(no->grad);
    };
  }
  return n;
}

template <typename T>
VarPtr<T> sub(const VarPtr<T>& a, const VarPtr<T>& b) {
  require(a->val.same_shape(b->val), ErrorKind::contract, "sub: shape mismatch");
  Tape<T>* tp = detail::tape_of(a, b);
  Tensor<T> out = a->val;
  for (long i = 0; i < out.numel(); ++i) out[i] -= b->val[i];
  auto n = tp->make(std::move(out), detail::any_requires(a, b));
  if (n->needs_grad) {
    Node<T>*na = a.get(), *nb = b.get(), *no = n.get();
    n->backward = [na, nb, no] {
      if (na->needs_grad) na->accumulate(no->grad);
      if (nb->needs_grad) {
        Tensor<T>& g = nb->grad_buf();
        for (long i = 0; i < g.numel(); ++i) g[i] -= no->grad[i];
      }
    };
  }
  return n;
}

template <typename T>
VarPtr<T> mul(const VarPtr<T>& a, const VarPtr<T>& b) {
  require(a->val.same_shape(b->val), ErrorKind::contract, "mul: shape mismatch");
  Tape<T>* tp = detail::tape_of(a, b);
  Tensor<T> out = a->val;
  for (long i = 0; i < out.numel(); ++i) out[i] *= b->val[i];
  auto n = tp->make(std::move(out), detail::any_requires(a, b));
  if (n->needs_grad) {
    Node<T>*na = a.get(), *nb = b.get(), *no = n.get();
    n->backward = [na, nb, no] {
      if (na->needs_grad) {
        Tensor<T>& g = na->grad_buf();
        for (long i = 0; i < g.numel(); ++i) g[i] += no->grad[i] * nb->val[i];
      }
      if (nb->needs_grad) {
        Tensor<T>& g = nb->grad_buf();
        for (long i = 0; i < g.numel(); ++i) g[i] += no->grad[i] * na->val[i];
      }
    };
  }
  return n;
}

template <typename T>
VarPtr<T> scale(const VarPtr<T>& a, double s) {
  Tensor<T> out = a->val;
  for (auto& x : out.v) x = T(double(x) * s);
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no, s] {
      Tensor<T>& g = na->grad_buf();
      for (long i = 0; i < g.numel(); ++i) g[i] += T(double(no->grad[i]) * s);
    };
  }
  return n;
}

// out = x + c with a constant tensor; gradient passes through unchanged.
// Also the straight-through escape hatch: pass c = f(x) - x to give the output
// the value f(x) while keeping an identity backward.
template <typename T>
VarPtr<T> offset_const(const VarPtr<T>& a, const Tensor<T>& c) {
  require(a->val.same_shape(c), ErrorKind::contract, "offset_const: shape mismatch");
  Tensor<T> out = a->val;
  for (long i = 0; i < out.numel(); ++i) out[i] += c[i];
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no] { na->accumulate(no->grad); };
  }
  return n;
}

// ---------------------------------------------------------------------------
// Activations and pointwise nonlinearities.
// ---------------------------------------------------------------------------

template <typename T>
VarPtr<T> relu(const VarPtr<T>& a) {
  Tensor<T> out = a->val;
  for (auto& x : out.v)
    if (x < T(0)) x = T(0);
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no] {
      Tensor<T>& g = na->grad_buf();
      for (long i = 0; i < g.numel(); ++i)
        if (na->val[i] > T(0)) g[i] += no->grad[i];
    };
  }
  return n;
}

template <typename T>
VarPtr<T> leaky_relu(const VarPtr<T>& a, double slope) {
  Tensor<T> out = a->val;
  for (auto& x : out.v)
    if (x < T(0)) x = T(double(x) * slope);
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no, slope] {
      Tensor<T>& g = na->grad_buf();
      for (long i = 0; i < g.numel(); ++i)
        g[i] += na->val[i] > T(0) ? no->grad[i] : T(double(no->grad[i]) * slope);
    };
  }
  return n;
}

template <typename T>
VarPtr<T> tanh(const VarPtr<T>& a) {
  Tensor<T> out = a->val;
  for (auto& x : out.v) x = std::tanh(x);
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no] {
      Tensor<T>& g = na->grad_buf();
      for (long i = 0; i < g.numel(); ++i)
        g[i] += no->grad[i] * (T(1) - no->val[i] * no->val[i]);
    };
  }
  return n;
}

template <typename T>
VarPtr<T> sigmoid(const VarPtr<T>& a) {
  Tensor<T> out = a->val;
  for (auto& x : out.v) x = T(1) / (T(1) + std::exp(-x));
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no] {
      Tensor<T>& g = na->grad_buf();
      for (long i = 0; i < g.numel(); ++i)
        g[i] += no->grad[i] * no->val[i] * (T(1) - no->val[i]);
    };
  }
  return n;
}

// log(max(x, floor)); the clamp keeps adversarial losses finite.
template <typename T>
VarPtr<T> log_clamped(const VarPtr<T>& a, double floor = 1e-7) {
  Tensor<T> out = a->val;
  for (auto& x : out.v) x = std::log(std::max(x, T(floor)));
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no, floor] {
      Tensor<T>& g = na->grad_buf();
      for (long i = 0; i < g.numel(); ++i)
        g[i] += no->grad[i] / std::max(na->val[i], T(floor));
    };
  }
  return n;
}

// out = x / (mean(x) + eps). Used to make codec conditioning and extraction
// invariant to the carrier's absolute level.
template <typename T>
VarPtr<T> mean_normalize(const VarPtr<T>& a, double eps = 1e-6) {
  const long n_el = a->val.numel();
  double mean = 0.0;
  for (const auto& x : a->val.v) mean += double(x);
  mean /= double(n_el);
  const double d = mean + eps;
  Tensor<T> out = a->val;
  for (auto& x : out.v) x = T(double(x) / d);
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no, d, n_el] {
      // dout_i/dx_j = delta_ij / d - x_i / (n d^2)
      double dot = 0.0;
      for (long i = 0; i < n_el; ++i) dot += double(no->grad[i]) * double(na->val[i]);
      const double corr = dot / (double(n_el) * d * d);
      Tensor<T>& g = na->grad_buf();
      for (long i = 0; i < n_el; ++i) g[i] += T(double(no->grad[i]) / d - corr);
    };
  }
  return n;
}

// ---------------------------------------------------------------------------
// Reductions and reshapes.
// ---------------------------------------------------------------------------

template <typename T>
VarPtr<T> mean_all(const VarPtr<T>& a) {
  const long n_el = a->val.numel();
  T acc = T(0);
  for (const auto& x : a->val.v) acc += x;
  Tensor<T> out({1});
  out[0] = acc / T(n_el);
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no, n_el] {
      Tensor<T>& g = na->grad_buf();
      const T s = no->grad[0] / T(n_el);
      for (long i = 0; i < g.numel(); ++i) g[i] += s;
    };
  }
  return n;
}

// mean((a - b)^2) as a single node; the workhorse of both training losses.
template <typename T>
VarPtr<T> mse(const VarPtr<T>& a, const VarPtr<T>& b) {
  require(a->val.same_shape(b->val), ErrorKind::contract, "mse: shape mismatch");
  Tape<T>* tp = detail::tape_of(a, b);
  const long n_el = a->val.numel();
  double acc = 0.0;
  for (long i = 0; i < n_el; ++i) {
    double d = double(a->val[i]) - double(b->val[i]);
    acc += d * d;
  }
  Tensor<T> out({1});
  out[0] = T(acc / double(n_el));
  auto n = tp->make(std::move(out), detail::any_requires(a, b));
  if (n->needs_grad) {
    Node<T>*na = a.get(), *nb = b.get(), *no = n.get();
    n->backward = [na, nb, no, n_el] {
      const T s = no->grad[0] * T(2) / T(n_el);
      if (na->needs_grad) {
        Tensor<T>& g = na->grad_buf();
        for (long i = 0; i < n_el; ++i) g[i] += s * (na->val[i] - nb->val[i]);
      }
      if (nb->needs_grad) {
        Tensor<T>& g = nb->grad_buf();
        for (long i = 0; i < n_el; ++i) g[i] -= s * (na->val[i] - nb->val[i]);
      }
    };
  }
  return n;
}

template <typename T>
VarPtr<T> reshape(const VarPtr<T>& a, std::vector<long> shape) {
  auto n = a->tape->make(a->val.reshaped(std::move(shape)), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no] {
      Tensor<T>& g = na->grad_buf();
      for (long i = 0; i < g.numel(); ++i) g[i] += no->grad[i];
    };
  }
  return n;
}

// [C, T, H] -> [C, H], averaging over the frame axis.
template <typename T>
VarPtr<T> mean_time(const VarPtr<T>& a) {
  require(a->val.rank() == 3, ErrorKind::contract, "mean_time expects [C, T, H]");
  const long c_n = a->val.dim(0), t_n = a->val.dim(1), h_n = a->val.dim(2);
  Tensor<T> out({c_n, h_n});
  for (long c = 0; c < c_n; ++c)
    for (long t = 0; t < t_n; ++t)
      for (long h = 0; h < h_n; ++h) out.at(c, h) += a->val.at(c, t, h) / T(t_n);
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no, c_n, t_n, h_n] {
      Tensor<T>& g = na->grad_buf();
      for (long c = 0; c < c_n; ++c)
        for (long t = 0; t < t_n; ++t)
          for (long h = 0; h < h_n; ++h) g.at(c, t, h) += no->grad.at(c, h) / T(t_n);
    };
  }
  return n;
}

// [C, 1, H] -> [C, T, H], replicating along the frame axis.
template <typename T>
VarPtr<T> broadcast_time(const VarPtr<T>& a, long t_n) {
  require(a->val.rank() == 3 && a->val.dim(1) == 1, ErrorKind::contract,
          "broadcast_time expects [C, 1, H]");
  const long c_n = a->val.dim(0), h_n = a->val.dim(2);
  Tensor<T> out({c_n, t_n, h_n});
  for (long c = 0; c < c_n; ++c)
    for (long t = 0; t < t_n; ++t)
      for (long h = 0; h < h_n; ++h) out.at(c, t, h) = a->val.at(c, 0, h);
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    n->backward = [na, no, c_n, t_n, h_n] {
      Tensor<T>& g = na->grad_buf();
      for (long c = 0; c < c_n; ++c)
        for (long t = 0; t < t_n; ++t)
          for (long h = 0; h < h_n; ++h) g.at(c, 0, h) += no->grad.at(c, t, h);
    };
  }
  return n;
}

// Concatenate rank-3 tensors along the channel axis.
template <typename T>
VarPtr<T> concat_channels(const std::vector<VarPtr<T>>& parts) {
  require(!parts.empty(), ErrorKind::contract, "concat_channels: empty input");
  Tape<T>* tp = parts[0]->tape;
  const long t_n = parts[0]->val.dim(1), h_n = parts[0]->val.dim(2);
  long c_total = 0;
  bool req = false;
  for (const auto& p : parts) {
    require(p->tape == tp, ErrorKind::contract, "operands live on different tapes");
    require(p->val.rank() == 3 && p->val.dim(1) == t_n && p->val.dim(2) == h_n,
            ErrorKind::contract, "concat_channels: shape mismatch");
    c_total += p->val.dim(0);
    req = req || p->needs_grad;
  }
  Tensor<T> out({c_total, t_n, h_n});
  long c_off = 0;
  for (const auto& p : parts) {
    std::copy(p->val.v.begin(), p->val.v.end(), out.v.begin() + c_off * t_n * h_n);
    c_off += p->val.dim(0);
  }
  auto n = tp->make(std::move(out), req);
  if (n->needs_grad) {
    std::vector<Node<T>*> srcs;
    for (const auto& p : parts) srcs.push_back(p.get());
    Node<T>* no = n.get();
    n->backward = [srcs, no, t_n, h_n] {
      long off = 0;
      for (Node<T>* s : srcs) {
        const long sz = s->val.numel();
        if (s->needs_grad) {
          Tensor<T>& g = s->grad_buf();
          for (long i = 0; i < sz; ++i) g[i] += no->grad[off + i];
        }
        off += sz;
      }
    };
  }
  return n;
}

// out[i] = x[index[i]]; indices must be in range. Adjoint scatter-adds.
template <typename T>
VarPtr<T> gather(const VarPtr<T>& a, std::vector<long> index) {
  require(a->val.rank() == 1, ErrorKind::contract, "gather expects rank-1 input");
  const long m = a->val.numel();
  Tensor<T> out({long(index.size())});
  for (size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < m, ErrorKind::contract, "gather index out of range");
    out[long(i)] = a->val[index[i]];
  }
  auto n = a->tape->make(std::move(out), a->needs_grad);
  if (n->needs_grad) {
    Node<T>*na = a.get(), *no = n.get();
    auto idx = std::make_shared<std::vector<long>>(std::move(index));
    n->backward = [na, no, idx] {
      Tensor<T>& g = na->grad_buf();
      for (size_t i = 0; i < idx->size(); ++i) g[(*idx)[i]] += no->grad[long(i)];
    };
  }
  return n;
}

// ---------------------------------------------------------------------------
// Linear algebra: fully connected and convolutions via im2col + GEMM.
// ---------------------------------------------------------------------------

// x: [n], w: [m, n], b: [m] -> [m]
template <typename T>
VarPtr<T> linear(const VarPtr<T>& x, const VarPtr<T>& w, const VarPtr<T>& b) {
  require(x->val.rank() == 1 && w->val.rank() == 2 && b->val.rank() == 1, ErrorKind::contract,
          "linear: bad ranks");
  const long m = w->val.dim(0), k = w->val.dim(1);
  require(x->val.numel() == k && b->val.numel() == m, ErrorKind::contract,
          "linear: dimension mismatch");
  Tape<T>* tp = detail::tape_of(x, w, b);

  Tensor<T> out({m});
  {
    auto xm = as_matrix(x->val, k, 1);
    auto wm = as_matrix(w->val, m, k);
    auto om = as_matrix(out, m, 1);
    om.noalias() = wm * xm;
    for (long i = 0; i < m; ++i) out[i] += b->val[i];
  }
  auto n = tp->make(std::move(out), detail::any_requires(x, w, b));
  if (n->needs_grad) {
    Node<T>*nx = x.get(), *nw = w.get(), *nb = b.get(), *no = n.get();
    n->backward = [nx, nw, nb, no, m, k] {
      auto gm = as_matrix(no->grad, m, 1);
      if (nx->needs_grad) {
        auto gx = as_matrix(nx->grad_buf(), k, 1);
        gx.noalias() += as_matrix(nw->val, m, k).transpose() * gm;
      }
      if (nw->needs_grad) {
        auto gw = as_matrix(nw->grad_buf(), m, k);
        gw.noalias() += gm * as_matrix(nx->val, k, 1).transpose();
      }
      if (nb->needs_grad) {
        Tensor<T>& gb = nb->grad_buf();
        for (long i = 0; i < m; ++i) gb[i] += no->grad[i];
      }
    };
  }
  return n;
}

namespace detail {

// im2col for [C, T, H] with odd square-ish kernels, stride 1, same padding.
template <typename T>
void im2col2d(const Tensor<T>& x, long k_t, long k_h, long d_t, long d_h, Tensor<T>& col) {
  const long c_n = x.dim(0), t_n = x.dim(1), h_n = x.dim(2);
  const long pt = d_t * (k_t - 1) / 2, ph = d_h * (k_h - 1) / 2;
  col = Tensor<T>({c_n * k_t * k_h, t_n * h_n});
  long row = 0;
  for (long c = 0; c < c_n; ++c)
    for (long p = 0; p < k_t; ++p)
      for (long q = 0; q < k_h; ++q, ++row) {
        const long dt = p * d_t - pt, dh = q * d_h - ph;
        T* dst = col.data() + row * t_n * h_n;
        for (long t = 0; t < t_n; ++t) {
          const long ts = t + dt;
          if (ts < 0 || ts >= t_n) {
            std::fill(dst + t * h_n, dst + (t + 1) * h_n, T(0));
            continue;
          }
          const T* src = x.data() + (c * t_n + ts) * h_n;
          for (long h = 0; h < h_n; ++h) {
            const long hs = h + dh;
            dst[t * h_n + h] = (hs < 0 || hs >= h_n) ? T(0) : src[hs];
          }
        }
      }
}

template <typename T>
void col2im2d(const Tensor<T>& col, long k_t, long k_h, long d_t, long d_h, Tensor<T>& gx) {
  const long c_n = gx.dim(0), t_n = gx.dim(1), h_n = gx.dim(2);
  const long pt = d_t * (k_t - 1) / 2, ph = d_h * (k_h - 1) / 2;
  long row = 0;
  for (long c = 0; c < c_n; ++c)
    for (long p = 0; p < k_t; ++p)
      for (long q = 0; q < k_h; ++q, ++row) {
        const long dt = p * d_t - pt, dh = q * d_h - ph;
        const T* src = col.data() + row * t_n * h_n;
        for (long t = 0; t < t_n; ++t) {
          const long ts = t + dt;
          if (ts < 0 || ts >= t_n) continue;
          T* dst = gx.data() + (c * t_n + ts) * h_n;
          for (long h = 0; h < h_n; ++h) {
            const long hs = h + dh;
            if (hs >= 0 && hs < h_n) dst[hs] += src[t * h_n + h];
          }
        }
      }
}

}  // namespace detail

// x: [Cin, T, H], w: [Cout, Cin, kT, kH], b: [Cout]; stride 1, same padding,
// odd kernels, dilation (d_t, d_h) applied on the frame and bin axes.
template <typename T>
VarPtr<T> conv2d(const VarPtr<T>& x, const VarPtr<T>& w, const VarPtr<T>& b, long d_t = 1,
                 long d_h = 1) {
  require(x->val.rank() == 3 && w->val.rank() == 4 && b->val.rank() == 1, ErrorKind::contract,
          "conv2d: bad ranks");
  const long c_in = x->val.dim(0), t_n = x->val.dim(1), h_n = x->val.dim(2);
  const long c_out = w->val.dim(0), k_t = w->val.dim(2), k_h = w->val.dim(3);
  require(w->val.dim(1) == c_in && b->val.numel() == c_out, ErrorKind::contract,
          "conv2d: channel mismatch");
  require(k_t % 2 == 1 && k_h % 2 == 1, ErrorKind::contract, "conv2d: kernels must be odd");
  Tape<T>* tp = detail::tape_of(x, w, b);

  const long rows = c_in * k_t * k_h, cols = t_n * h_n;
  Tensor<T> col;
  detail::im2col2d(x->val, k_t, k_h, d_t, d_h, col);
  Tensor<T> out({c_out, t_n, h_n});
  {
    auto wm = as_matrix(w->val, c_out, rows);
    auto cm = as_matrix(col, rows, cols);
    auto om = as_matrix(out, c_out, cols);
    om.noalias() = wm * cm;
    for (long c = 0; c < c_out; ++c) {
      T* p = out.data() + c * cols;
      for (long i = 0; i < cols; ++i) p[i] += b->val[c];
    }
  }
  auto n = tp->make(std::move(out), detail::any_requires(x, w, b));
  if (n->needs_grad) {
    Node<T>*nx = x.get(), *nw = w.get(), *nb = b.get(), *no = n.get();
    n->backward = [nx, nw, nb, no, c_in, c_out, t_n, h_n, k_t, k_h, d_t, d_h, rows, cols] {
      auto gm = as_matrix(no->grad, c_out, cols);
      if (nw->needs_grad || nx->needs_grad) {
        Tensor<T> col;
        detail::im2col2d(nx->val, k_t, k_h, d_t, d_h, col);
        if (nw->needs_grad) {
          auto gw = as_matrix(nw->grad_buf(), c_out, rows);
          gw.noalias() += gm * as_matrix(col, rows, cols).transpose();
        }
        if (nx->needs_grad) {
          Tensor<T> gcol({rows, cols});
          as_matrix(gcol, rows, cols).noalias() =
              as_matrix(nw->val, c_out, rows).transpose() * gm;
          detail::col2im2d(gcol, k_t, k_h, d_t, d_h, nx->grad_buf());
        }
      }
      if (nb->needs_grad) {
        Tensor<T>& gb = nb->grad_buf();
        for (long c = 0; c < c_out; ++c) {
          T acc = T(0);
          const T* p = no->grad.data() + c * cols;
          for (long i = 0; i < cols; ++i) acc += p[i];
          gb[c] += acc;
        }
      }
    };
  }
  return n;
}

// x: [Cin, L], w: [Cout, Cin, k], b: [Cout]; strided with explicit padding.
template <typename T>
VarPtr<T> conv1d(const VarPtr<T>& x, const VarPtr<T>& w, const VarPtr<T>& b, long stride,
                 long pad) {
  require(x->val.rank() == 2 && w->val.rank() == 3 && b->val.rank() == 1, ErrorKind::contract,
          "conv1d: bad ranks");
  const long c_in = x->val.dim(0), len = x->val.dim(1);
  const long c_out = w->val.dim(0), k = w->val.dim(2);
  require(w->val.dim(1) == c_in && b->val.numel() == c_out, ErrorKind::contract,
          "conv1d: channel mismatch");
  const long out_len = (len + 2 * pad - k) / stride + 1;
  require(out_len > 0, ErrorKind::input_too_short, "conv1d: input shorter than kernel");
  Tape<T>* tp = detail::tape_of(x, w, b);

  const long rows = c_in * k;
  Tensor<T> col({rows, out_len});
  for (long c = 0; c < c_in; ++c)
    for (long j = 0; j < k; ++j) {
      T* dst = col.data() + (c * k + j) * out_len;
      for (long o = 0; o < out_len; ++o) {
        const long s = o * stride + j - pad;
        dst[o] = (s < 0 || s >= len) ? T(0) : x->val.at(c, s);
      }
    }
  Tensor<T> out({c_out, out_len});
  {
    auto om = as_matrix(out, c_out, out_len);
    om.noalias() = as_matrix(w->val, c_out, rows) * as_matrix(col, rows, out_len);
    for (long c = 0; c < c_out; ++c)
      for (long o = 0; o < out_len; ++o) out.at(c, o) += b->val[c];
  }
  auto n = tp->make(std::move(out), detail::any_requires(x, w, b));
  if (n->needs_grad) {
    Node<T>*nx = x.get(), *nw = w.get(), *nb = b.get(), *no = n.get();
    n->backward = [nx, nw, nb, no, c_in, c_out, len, k, stride, pad, rows, out_len] {
      auto gm = as_matrix(no->grad, c_out, out_len);
      if (nw->needs_grad || nx->needs_grad) {
        Tensor<T> col({rows, out_len});
        for (long c = 0; c < c_in; ++c)
          for (long j = 0; j < k; ++j) {
            T* dst = col.data() + (c * k + j) * out_len;
            for (long o = 0; o < out_len; ++o) {
              const long s = o * stride + j - pad;
              dst[o] = (s < 0 || s >= len) ? T(0) : nx->val.at(c, s);
            }
          }
        if (nw->needs_grad) {
          auto gw = as_matrix(nw->grad_buf(), c_out, rows);
          gw.noalias() += gm * as_matrix(col, rows, out_len).transpose();
        }
        if (nx->needs_grad) {
          Tensor<T> gcol({rows, out_len});
          as_matrix(gcol, rows, out_len).noalias() =
              as_matrix(nw->val, c_out, rows).transpose() * gm;
          Tensor<T>& gx = nx->grad_buf();
          for (long c = 0; c < c_in; ++c)
            for (long j = 0; j < k; ++j) {
              const T* src = gcol.data() + (c * k + j) * out_len;
              for (long o = 0; o < out_len; ++o) {
                const long s = o * stride + j - pad;
                if (s >= 0 && s < len) gx.at(c, s) += src[o];
              }
            }
        }
      }
      if (nb->needs_grad) {
        Tensor<T>& gb = nb->grad_buf();
        for (long c = 0; c < c_out; ++c)
          for (long o = 0; o < out_len; ++o) gb[c] += no->grad.at(c, o);
      }
    };
  }
  return n;
}

// ---------------------------------------------------------------------------
// Sparse row maps: each output element is a short weighted window of the
// input. Covers sinc interpolation and FIR filtering in the attack chain.
// ---------------------------------------------------------------------------

struct RowWindow {
  long start = 0;
  std::vector<double> w;
};

// rank-1 x -> rank-1 out, out[i] = sum_j rows[i].w[j] * x[rows[i].start + j];
// taps outside [0, len) are dropped (zero padding).
template <typename T>
VarPtr<T> row_mix(const VarPtr<T>& x, std::shared_ptr<const std::vector<RowWindow>> rows) {
  require(x->val.rank() == 1, ErrorKind::contract, "row_mix expects rank-1 input");
  const long len = x->val.numel();
  Tensor<T> out({long(rows->size())});
  for (size_t i = 0; i < rows->size(); ++i) {
    const RowWindow& r = (*rows)[i];
    double acc = 0.0;
    for (size_t j = 0; j < r.w.size(); ++j) {
      const long s = r.start + long(j);
      if (s >= 0 && s < len) acc += r.w[j] * double(x->val[s]);
    }
    out[long(i)] = T(acc);
  }
  auto n = x->tape->make(std::move(out), x->needs_grad);
  if (n->needs_grad) {
    Node<T>*nx = x.get(), *no = n.get();
    n->backward = [nx, no, rows, len] {
      Tensor<T>& g = nx->grad_buf();
      for (size_t i = 0; i < rows->size(); ++i) {
        const RowWindow& r = (*rows)[i];
        const T gi = no->grad[long(i)];
        for (size_t j = 0; j < r.w.size(); ++j) {
          const long s = r.start + long(j);
          if (s >= 0 && s < len) g[s] += T(double(gi) * r.w[j]);
        }
      }
    };
  }
  return n;
}

}  // namespace syncguard::ad
