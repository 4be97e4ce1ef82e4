#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "lf/error.hpp"

namespace lf {

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

template <typename T>
constexpr Dtype dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "only float and double tensors are supported");
  return std::is_same_v<T, float> ? Dtype::f32 : Dtype::f64;
}

inline const char* dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated lazily, same length as value when present
  bool requires_grad = false;
};

// Shared handle to a dense row-major buffer. Copies alias the same storage.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    Tensor t;
    t.d_ = std::make_shared<TensorData<T>>();
    t.d_->value.assign(shape_numel(shape), T(0));
    t.d_->shape = std::move(shape);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(std::vector<std::size_t> shape, T fill) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.d_->value.begin(), t.d_->value.end(), fill);
    return t;
  }

  static Tensor from(std::vector<std::size_t> shape, std::vector<T> values,
                     bool requires_grad = false) {
    if (shape_numel(shape) != values.size())
      throw ShapeError("tensor: " + shape_str(shape) + " does not hold " +
                       std::to_string(values.size()) + " values");
    Tensor t;
    t.d_ = std::make_shared<TensorData<T>>();
    t.d_->shape = std::move(shape);
    t.d_->value = std::move(values);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  bool defined() const { return d_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return d_->shape; }
  std::size_t rank() const { return d_->shape.size(); }
  std::size_t dim(std::size_t i) const { return d_->shape[i]; }
  std::size_t size() const { return d_->value.size(); }

  T* data() { return d_->value.data(); }
  const T* data() const { return d_->value.data(); }

  T& at(std::size_t i) { return d_->value[i]; }
  T at(std::size_t i) const { return d_->value[i]; }
  T& at(std::size_t i, std::size_t j) { return d_->value[i * d_->shape[1] + j]; }
  T at(std::size_t i, std::size_t j) const { return d_->value[i * d_->shape[1] + j]; }

  bool requires_grad() const { return d_ && d_->requires_grad; }
  void set_requires_grad(bool b) { d_->requires_grad = b; }

  bool has_grad() const { return d_ && d_->grad.size() == d_->value.size(); }
  void ensure_grad() {
    if (d_->grad.size() != d_->value.size()) d_->grad.assign(d_->value.size(), T(0));
  }
  T* grad() { return d_->grad.data(); }
  const T* grad() const { return d_->grad.data(); }
  void zero_grad() {
    if (has_grad()) std::fill(d_->grad.begin(), d_->grad.end(), T(0));
  }

  // Deep copy of the values; the copy is a fresh leaf with no grad.
  Tensor clone() const {
    Tensor t;
    t.d_ = std::make_shared<TensorData<T>>();
    t.d_->shape = d_->shape;
    t.d_->value = d_->value;
    t.d_->requires_grad = d_->requires_grad;
    return t;
  }

  bool same_storage(const Tensor& o) const { return d_ == o.d_; }
  std::shared_ptr<TensorData<T>> node() const { return d_; }

 private:
  std::shared_ptr<TensorData<T>> d_;
};

// Tape of recorded operations. Backward replays the tape in exact reverse
// recording order, accumulating into the grad buffers of tracked tensors.
template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void record(const char* op, std::function<void()> backward_step) {
    nodes_.push_back(Node{op, std::move(backward_step)});
  }

  std::size_t node_count() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  void backward(Tensor<T> loss) {
    if (!loss.defined() || loss.size() != 1)
      throw NumericError("backward: seed must be a scalar tensor");
    if (!loss.requires_grad())
      throw NumericError("backward: loss tensor is not tracked");
    loss.ensure_grad();
    loss.grad()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->fn();
  }

  static Graph*& current_slot() {
    static thread_local Graph* cur = nullptr;
    return cur;
  }
  static Graph* current() { return current_slot(); }

  class Scope {
   public:
    explicit Scope(Graph& g) : prev_(current_slot()) { current_slot() = &g; }
    ~Scope() { current_slot() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Graph* prev_;
  };

  class NoGradScope {
   public:
    NoGradScope() : prev_(current_slot()) { current_slot() = nullptr; }
    ~NoGradScope() { current_slot() = prev_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

   private:
    Graph* prev_;
  };

 private:
  struct Node {
    const char* op;
    std::function<void()> fn;
  };
  std::vector<Node> nodes_;
};

namespace detail {

// In double precision every forward result is validated; float is the fast
// runtime path and skips the scan.
template <typename T>
inline void check_finite(const Tensor<T>& t, const char* op) {
  if constexpr (std::is_same_v<T, double>) {
    const T* p = t.data();
    for (std::size_t i = 0, n = t.size(); i < n; ++i)
      if (!std::isfinite(p[i]))
        throw NumericError(std::string(op) + ": non-finite value at index " +
                           std::to_string(i));
  }
}

template <typename T>
inline bool tracking(const Tensor<T>& a) {
  return Graph<T>::current() != nullptr && a.requires_grad();
}

template <typename T>
inline bool tracking(const Tensor<T>& a, const Tensor<T>& b) {
  return Graph<T>::current() != nullptr && (a.requires_grad() || b.requires_grad());
}

}  // namespace detail

}  // namespace lf
