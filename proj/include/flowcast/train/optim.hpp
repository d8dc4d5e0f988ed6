#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "flowcast/autodiff/tape.hpp"
#include "flowcast/core/error.hpp"

namespace flowcast::train {

enum class Schedule { Cosine, Constant };

inline Schedule parse_schedule(const std::string& s) {
  if (s == "cosine") return Schedule::Cosine;
  if (s == "constant") return Schedule::Constant;
  throw ConfigError("unknown schedule '" + s + "' (expected cosine or constant)");
}

inline std::string to_string(Schedule s) { return s == Schedule::Cosine ? "cosine" : "constant"; }

/// Learning rate at `step` (0-based) of `total` steps.
inline double learning_rate(Schedule s, double peak, std::size_t step, std::size_t total) {
  if (s == Schedule::Constant || total <= 1) return peak;
  const double x = static_cast<double>(std::min(step, total - 1)) / static_cast<double>(total - 1);
  return 0.5 * peak * (1.0 + std::cos(std::numbers::pi * x));
}

/// AdamW with decoupled weight decay applied to matrices only (biases, gains
/// and shifts are not decayed).
template <typename T>
struct AdamW {
  double beta1 = 0.9, beta2 = 0.95, eps = 1e-8, weight_decay = 0.1;
  std::vector<std::vector<T>> m, v;
  std::size_t t = 0;

  void init(const ad::ParameterSet<T>& ps) {
    m = ps.zeros_like();
    v = ps.zeros_like();
    t = 0;
  }

  void step(ad::ParameterSet<T>& ps, const std::vector<std::vector<T>>& grads, double lr) {
    if (m.size() != ps.size() || grads.size() != ps.size()) throw Error("AdamW: state does not match parameters");
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& p = ps[i];
      const bool decay = p.shape.size() >= 2;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double g = grads[i][k];
        m[i][k] = static_cast<T>(beta1 * m[i][k] + (1 - beta1) * g);
        v[i][k] = static_cast<T>(beta2 * v[i][k] + (1 - beta2) * g * g);
        const double mh = m[i][k] / c1, vh = v[i][k] / c2;
        double x = p.value[k];
        if (decay) x -= lr * weight_decay * x;
        x -= lr * mh / (std::sqrt(vh) + eps);
        p.value[k] = static_cast<T>(x);
      }
    }
  }
};

/// Shadow copy of the parameters, shadow <- decay * shadow + (1 - decay) * params.
template <typename T>
struct EMAState {
  double decay = 0.999;
  std::vector<std::vector<T>> shadow;

  void init(const ad::ParameterSet<T>& ps) {
    shadow.clear();
    for (std::size_t i = 0; i < ps.size(); ++i) shadow.push_back(ps[i].value);
  }

  void update(const ad::ParameterSet<T>& ps) {
    if (shadow.size() != ps.size()) throw Error("ema_update: shape mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (shadow[i].size() != ps[i].size()) throw Error("ema_update: shape mismatch for " + ps[i].name);
      for (std::size_t k = 0; k < shadow[i].size(); ++k) {
        shadow[i][k] = static_cast<T>(decay * shadow[i][k] + (1.0 - decay) * ps[i].value[k]);
      }
    }
  }

  void copy_to(ad::ParameterSet<T>& ps) const {
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i].value = shadow[i];
  }
};

}  // namespace flowcast::train
