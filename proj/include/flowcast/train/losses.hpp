#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flowcast/core/error.hpp"
#include "flowcast/train/weights.hpp"

namespace flowcast::train {

/// (1 / CHW) * sum w_lat w_lev w_var (v - (X_{k+6} - X_k))^2.
inline double stage1_loss(std::span<const double> v_pred, std::span<const double> xk, std::span<const double> xk6,
                          const WeightScheme& w, std::size_t n_lon) {
  const std::size_t C = w.w_lev.size(), H = w.w_lat.size();
  if (w.w_var.size() != C) throw Error("stage1_loss: weight/channel mismatch");
  const std::size_t n = C * H * n_lon;
  if (v_pred.size() != n || xk.size() != n || xk6.size() != n) throw Error("stage1_loss: weight/channel mismatch");
  double acc = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H; ++i) {
      const double wc = w.w_lat[i] * w.w_lev[c] * w.w_var[c];
      for (std::size_t j = 0; j < n_lon; ++j) {
        const std::size_t k = (c * H + i) * n_lon + j;
        const double d = v_pred[k] - (xk6[k] - xk[k]);
        acc += wc * d * d;
      }
    }
  return acc / static_cast<double>(n);
}

/// Weighted MSE of one forecast against truth, same weights as stage 1.
inline double weighted_mse(std::span<const double> pred, std::span<const double> truth, const WeightScheme& w, std::size_t n_lon) {
  const std::vector<double> zero(pred.size(), 0.0);
  if (truth.size() != pred.size()) throw Error("weighted_mse: size mismatch");
  // stage1_loss with X_k = 0 and X_{k+6} = truth.
  return stage1_loss(pred, zero, truth, w, n_lon);
}

/// sum_{tau=1..T} w_tau(tau) * weighted MSE(forecast_tau, truth_tau), one entry per lead hour.
inline double stage2_loss(const std::vector<std::vector<double>>& forecasts, const std::vector<std::vector<double>>& truths,
                          const WeightScheme& w, std::size_t n_lon) {
  if (forecasts.size() != truths.size() || forecasts.empty()) throw Error("stage2_loss: length mismatch");
  double acc = 0;
  for (std::size_t k = 0; k < forecasts.size(); ++k) {
    acc += w_tau(static_cast<double>(k + 1)) * weighted_mse(forecasts[k], truths[k], w, n_lon);
  }
  return acc;
}

}  // namespace flowcast::train
