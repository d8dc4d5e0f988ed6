#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowcast/core/error.hpp"

namespace flowcast::ad {

/// A named, trainable array. Shapes are informational; storage is flat.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> value;

  std::size_t size() const { return value.size(); }
};

/// Ordered collection with stable addresses.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    params_.push_back(std::make_unique<Parameter<T>>(Parameter<T>{std::move(name), std::move(shape), std::vector<T>(n, T(0))}));
    return *params_.back();
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
  }

  /// Zero-filled buffers shaped like the parameters.
  std::vector<std::vector<T>> zeros_like() const {
    std::vector<std::vector<T>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.emplace_back(p->size(), T(0));
    return out;
  }

  const Parameter<T>* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p->name == name) return p.get();
    }
    return nullptr;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

template <typename T>
class Tape;

/// Handle to a 2-D value (rows x cols, row-major) recorded on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
  const T* data() const;
  std::span<const T> values() const { return {data(), size()}; }
};

/// Reverse-mode recorder. Every op appends a node holding its value and,
/// when any input needs a gradient, a closure that pushes the node's gradient
/// to its inputs. With recording off the tape is a plain evaluator.
template <typename T>
class Tape {
 public:
  struct Node {
    std::size_t rows = 0, cols = 0;
    std::vector<T> own;
    const T* ext = nullptr;
    std::vector<T> grad;
    bool needs_grad = false;
    std::function<void(Tape&, std::size_t)> back;

    const T* data() const { return ext ? ext : own.data(); }
    std::size_t size() const { return rows * cols; }
  };

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  /// Constant or differentiable input; copies the data.
  Var<T> input(std::span<const T> values, std::size_t rows, std::size_t cols, bool requires_grad = false) {
    if (values.size() != rows * cols) throw Error("Tape::input: size mismatch");
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.own.assign(values.begin(), values.end());
    n.needs_grad = record_ && requires_grad;
    return push(std::move(n));
  }

  Var<T> input(std::vector<T>&& values, std::size_t rows, std::size_t cols, bool requires_grad = false) {
    if (values.size() != rows * cols) throw Error("Tape::input: size mismatch");
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.own = std::move(values);
    n.needs_grad = record_ && requires_grad;
    return push(std::move(n));
  }

  /// Leaf that aliases parameter storage. Repeated calls return the same node,
  /// so gradients from every use accumulate in one buffer.
  Var<T> param(const Parameter<T>& p, std::size_t rows, std::size_t cols) {
    if (rows * cols != p.size()) throw Error("Tape::param: shape mismatch for " + p.name);
    if (auto it = param_ids_.find(&p); it != param_ids_.end()) return {this, it->second};
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.ext = p.value.data();
    n.needs_grad = record_;
    auto v = push(std::move(n));
    param_ids_.emplace(&p, v.id);
    return v;
  }

  /// Result node of an op; `needs` is whether any input needs a gradient.
  Var<T> result(std::vector<T>&& value, std::size_t rows, std::size_t cols, bool needs,
                std::function<void(Tape&, std::size_t)> back) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.own = std::move(value);
    n.needs_grad = record_ && needs;
    if (n.needs_grad) n.back = std::move(back);
    return push(std::move(n));
  }

  bool needs(const Var<T>& v) const { return nodes_[v.id].needs_grad; }

  /// Gradient buffer of a node, allocated zeroed on first use.
  T* grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.size(), T(0));
    return n.grad.data();
  }

  std::span<const T> grad_of(const Var<T>& v) const {
    const auto& n = nodes_[v.id];
    return {n.grad.data(), n.grad.size()};
  }

  /// Gradient accumulated for a parameter; empty if it was not used.
  std::span<const T> param_grad(const Parameter<T>& p) const {
    auto it = param_ids_.find(&p);
    if (it == param_ids_.end()) return {};
    const auto& n = nodes_[it->second];
    return {n.grad.data(), n.grad.size()};
  }

  /// Seeds d(root) with `seed` (ones if empty) and runs the recorded closures in reverse.
  void backward(const Var<T>& root, std::span<const T> seed = {}) {
    if (!record_) throw Error("Tape::backward: tape was not recording");
    T* g = grad(root.id);
    const std::size_t n = nodes_[root.id].size();
    if (seed.empty()) {
      for (std::size_t i = 0; i < n; ++i) g[i] += T(1);
    } else {
      if (seed.size() != n) throw Error("Tape::backward: seed size mismatch");
      for (std::size_t i = 0; i < n; ++i) g[i] += seed[i];
    }
    for (std::size_t id = root.id + 1; id-- > 0;) {
      auto& node = nodes_[id];
      if (node.back && !node.grad.empty()) node.back(*this, id);
    }
  }

 private:
  Var<T> push(Node&& n) {
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_ids_;
};

template <typename T>
std::size_t Var<T>::rows() const {
  return tape->node(id).rows;
}
template <typename T>
std::size_t Var<T>::cols() const {
  return tape->node(id).cols;
}
template <typename T>
const T* Var<T>::data() const {
  return tape->node(id).data();
}

}  // namespace flowcast::ad
