// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Reverse-mode tape with one node per module-level op. Values and gradients
// are real matrices; complex tensors use the split [re; im] row layout, so a
// gradient block holds dL/dRe on top and dL/dIm below.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dirhear/core/error.hpp"
#include "dirhear/nn/weights.hpp"

namespace dirhear {

template <typename T>
struct Var {
  Mat<T> value;
  Mat<T> grad;  // empty until something flows into it
  bool needs_grad = false;

  Mat<T>& g() {
    if (grad.size() == 0) grad = Mat<T>::Zero(value.rows(), value.cols());
    return grad;
  }
  bool has_grad() const { return grad.size() != 0; }
};

template <typename T>
using VarP = std::shared_ptr<Var<T>>;

template <typename T>
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  VarP<T> leaf(Mat<T> v, bool needs_grad = false) {
    auto p = std::make_shared<Var<T>>();
    p->value = std::move(v);
    p->needs_grad = needs_grad;
    return p;
  }

  // Result of an op; it needs a gradient iff any input does and we record.
  VarP<T> node(Mat<T> v, bool any_input_needs_grad) { return leaf(std::move(v), record_ && any_input_needs_grad); }

  // Ops append their adjoint after computing the forward value, so the list
  // is in topological order.
  void record(std::function<void()> adjoint) {
    if (record_) adjoints_.push_back(std::move(adjoint));
  }

  std::size_t size() const { return adjoints_.size(); }

  // Seeds dL/dL = 1 and runs every recorded adjoint once, newest first.
  void backward(const VarP<T>& loss) {
    require(loss && loss->value.rows() == 1 && loss->value.cols() == 1, Errc::contract,
            "backward needs a scalar loss");
    loss->g()(0, 0) += T(1);
    for (std::size_t i = adjoints_.size(); i-- > 0;) adjoints_[i]();
    adjoints_.clear();
  }

  void clear() { adjoints_.clear(); }

 private:
  bool record_;
  std::vector<std::function<void()>> adjoints_;
};

}  // namespace dirhear
