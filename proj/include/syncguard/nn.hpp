#pragma once

// Named parameter store shared by the codec and the discriminator, plus Adam.
// Parameters live outside any tape; each training step binds them to fresh
// leaf nodes and absorbs the leaf gradients back after backward().

#include <string>
#include <unordered_map>
#include <vector>

#include "syncguard/autodiff.hpp"
#include "syncguard/tensor.hpp"

namespace syncguard::nn {

enum class ParamGroup { codec, disc };

template <typename T>
struct ParameterStore {
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    ParamGroup group = ParamGroup::codec;
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, size_t> index;

  size_t add(const std::string& name, Tensor<T> value, ParamGroup group) {
    require(!index.count(name), ErrorKind::contract, "duplicate parameter: " + name);
    Entry e;
    e.name = name;
    e.grad = Tensor<T>(value.shape);
    e.value = std::move(value);
    e.group = group;
    entries.push_back(std::move(e));
    index[name] = entries.size() - 1;
    return entries.size() - 1;
  }

  Entry& at(const std::string& name) {
    auto it = index.find(name);
    require(it != index.end(), ErrorKind::contract, "unknown parameter: " + name);
    return entries[it->second];
  }
  const Entry& at(const std::string& name) const {
    auto it = index.find(name);
    require(it != index.end(), ErrorKind::contract, "unknown parameter: " + name);
    return entries[it->second];
  }

  long count(ParamGroup g) const {
    long n = 0;
    for (const auto& e : entries)
      if (e.group == g) n += e.value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries) e.grad.fill(T(0));
  }

  // Leaf nodes for one tape, aligned with `entries`.
  std::vector<ad::VarPtr<T>> bind(ad::Tape<T>& tape) const {
    std::vector<ad::VarPtr<T>> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(tape.leaf(e.value));
    return out;
  }

  // Accumulate leaf gradients (scaled) into the store buffers.
  void absorb(const std::vector<ad::VarPtr<T>>& leaves, double scale = 1.0) {
    require(leaves.size() == entries.size(), ErrorKind::contract, "absorb: leaf set mismatch");
    for (size_t i = 0; i < entries.size(); ++i) {
      const auto& g = leaves[i]->grad;
      if (g.empty()) continue;
      auto& dst = entries[i].grad;
      for (long j = 0; j < dst.numel(); ++j) dst[j] += T(double(g[j]) * scale);
    }
  }
};

template <typename T>
class Adam {
 public:
  Adam(ParameterStore<T>* store, ParamGroup group, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : store_(store), group_(group), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step() {
    if (m_.empty()) {
      m_.resize(store_->entries.size());
      v_.resize(store_->entries.size());
      for (size_t i = 0; i < store_->entries.size(); ++i) {
        if (store_->entries[i].group != group_) continue;
        m_[i] = Tensor<T>(store_->entries[i].value.shape);
        v_[i] = Tensor<T>(store_->entries[i].value.shape);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < store_->entries.size(); ++i) {
      auto& e = store_->entries[i];
      if (e.group != group_) continue;
      for (long j = 0; j < e.value.numel(); ++j) {
        const double g = double(e.grad[j]);
        const double m = beta1_ * double(m_[i][j]) + (1.0 - beta1_) * g;
        const double v = beta2_ * double(v_[i][j]) + (1.0 - beta2_) * g * g;
        m_[i][j] = T(m);
        v_[i][j] = T(v);
        e.value[j] -= T(lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_));
      }
    }
  }

 private:
  ParameterStore<T>* store_;
  ParamGroup group_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

// He-style init for conv/linear weights; fan_in from the trailing dims.
template <typename T>
Tensor<T> he_init(std::vector<long> shape, Rng& rng) {
  long fan_in = 1;
  for (size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
  return randn<T>(std::move(shape), rng, std::sqrt(2.0 / double(fan_in)));
}

}  // namespace syncguard::nn
