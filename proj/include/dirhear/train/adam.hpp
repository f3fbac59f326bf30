// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Adam with bias correction and global gradient-norm clipping. Complex
// tensors are stored as real (Re, Im) halves, so the update is component-wise.

#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "dirhear/nn/tape.hpp"

namespace dirhear {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping

  void validate() const {
    require(lr > 0, Errc::config, "learning rate must be > 0");
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, Errc::config, "adam betas must be in [0, 1)");
    require(eps > 0, Errc::config, "adam eps must be > 0");
  }
};

template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<VarP<T>>& params, const AdamParams& p) : p_(p) {
    p_.validate();
    for (const auto& v : params) {
      m_.push_back(Mat<T>::Zero(v->value.rows(), v->value.cols()));
      s_.push_back(Mat<T>::Zero(v->value.rows(), v->value.cols()));
    }
  }

  AdamParams& params() { return p_; }
  const AdamParams& params() const { return p_; }
  long steps() const { return t_; }

  // Global L2 norm of the gradients (missing gradients count as zero).
  static double grad_norm(const std::vector<VarP<T>>& params) {
    double s = 0;
    for (const auto& v : params)
      if (v->has_grad()) s += v->grad.template cast<double>().squaredNorm();
    return std::sqrt(s);
  }

  // Applies one update, then clears the gradients. Returns the pre-clip norm.
  double step(const std::vector<VarP<T>>& params) {
    require(params.size() == m_.size(), Errc::shape, "adam: parameter count changed");
    const double norm = grad_norm(params);
    const double scale = (p_.clip_norm > 0 && norm > p_.clip_norm) ? p_.clip_norm / norm : 1.0;
    ++t_;
    const double c1 = 1.0 - std::pow(p_.beta1, double(t_)), c2 = 1.0 - std::pow(p_.beta2, double(t_));
    const T b1 = T(p_.beta1), b2 = T(p_.beta2), lr = T(p_.lr / c1), isc2 = T(1.0 / std::sqrt(c2)), eps = T(p_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& v = *params[i];
      require(v.value.rows() == m_[i].rows() && v.value.cols() == m_[i].cols(), Errc::shape, "adam: shape changed");
      if (v.has_grad()) {
        Mat<T> g = v.grad * T(scale);
        m_[i] = b1 * m_[i] + (T(1) - b1) * g;
        s_[i] = b2 * s_[i] + (T(1) - b2) * g.cwiseProduct(g);
      } else {
        m_[i] *= b1;
        s_[i] *= b2;
      }
      v.value.array() -= lr * m_[i].array() / (s_[i].array().sqrt() * isc2 + eps);
      v.grad.resize(0, 0);
    }
    return norm;
  }

  // Raw state for checkpoint blobs: step count, then every m and v tensor.
  std::vector<char> serialize() const {
    std::vector<char> b(sizeof(long));
    std::memcpy(b.data(), &t_, sizeof(long));
    auto put = [&](const Mat<T>& m) {
      const char* p = reinterpret_cast<const char*>(m.data());
      b.insert(b.end(), p, p + m.size() * sizeof(T));
    };
    for (const auto& m : m_) put(m);
    for (const auto& s : s_) put(s);
    return b;
  }

  // Reads the state written by serialize; returns bytes consumed.
  std::size_t deserialize(const char* p, std::size_t n) {
    std::size_t need = sizeof(long);
    for (const auto& m : m_) need += 2 * std::size_t(m.size()) * sizeof(T);
    require(n >= need, Errc::io, "optimizer state is truncated or does not match the model");
    std::memcpy(&t_, p, sizeof(long));
    std::size_t pos = sizeof(long);
    for (auto* set : {&m_, &s_})
      for (auto& m : *set) {
        std::memcpy(m.data(), p + pos, m.size() * sizeof(T));
        pos += m.size() * sizeof(T);
      }
    return pos;
  }

 private:
  AdamParams p_;
  std::vector<Mat<T>> m_, s_;
  long t_ = 0;
};

}  // namespace dirhear
