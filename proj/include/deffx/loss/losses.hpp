#pragma once

// Training losses (differentiable) and evaluation metrics. Signals of any
// shape are compared elementwise after flattening.

#include <cstddef>
#include <span>
#include <vector>

#include "deffx/autodiff/ops.hpp"

namespace deffx::loss {

struct StftResolution {
  std::size_t fft_size = 1024;
  std::size_t hop = 256;
  std::size_t window_len = 1024;
};

struct MrstftConfig {
  std::vector<StftResolution> resolutions = {{1024, 256, 1024}, {2048, 512, 2048}, {512, 128, 512}};
  void validate() const;
  std::size_t min_length() const;
};

struct LossWeights {
  double l1 = 1.0;
  double mrstft = 1.0;
  void validate() const;
};

// Periodic Hann window.
template <typename T>
std::vector<T> hann_window(std::size_t n);

template <typename T> Var<T> l1(const Var<T>& y, const Var<T>& y_hat);
template <typename T> Var<T> mse(const Var<T>& y, const Var<T>& y_hat);
// Throw UndefinedMetric for a silent target.
template <typename T> Var<T> esr(const Var<T>& y, const Var<T>& y_hat);
template <typename T> Var<T> dc_loss(const Var<T>& y, const Var<T>& y_hat);
// Mean over resolutions of spectral convergence plus mean absolute log
// magnitude difference; magnitudes floored at 1e-8.
template <typename T> Var<T> mrstft(const Var<T>& y, const Var<T>& y_hat, const MrstftConfig& cfg = {});

template <typename T>
struct LossTerms {
  Var<T> total;
  double l1 = 0.0;
  double mrstft = 0.0;
};

// w.l1 * l1 + w.mrstft * mrstft. A zero weight skips its term entirely.
template <typename T>
LossTerms<T> combined_loss(const Var<T>& y, const Var<T>& y_hat, const LossWeights& w, const MrstftConfig& cfg = {});

// --- metrics on plain buffers ---------------------------------------------
double mae(std::span<const double> y, std::span<const double> y_hat);
double mse(std::span<const double> y, std::span<const double> y_hat);
double mape(std::span<const double> y, std::span<const double> y_hat);
double esr(std::span<const double> y, std::span<const double> y_hat);
double dc_loss(std::span<const double> y, std::span<const double> y_hat);
double mrstft(std::span<const double> y, std::span<const double> y_hat, const MrstftConfig& cfg = {});

struct Metrics {
  double tot = 0.0;
  double l1 = 0.0;
  double mrstft = 0.0;
  double esr = 0.0;
  double dc = 0.0;
  double mse = 0.0;
  double mape = 0.0;
};

// All metrics for one segment; tot = w.l1 * l1 + w.mrstft * mrstft. MAE equals
// L1 and is reported in that column.
Metrics compute_metrics(std::span<const double> y, std::span<const double> y_hat, const LossWeights& w,
                        const MrstftConfig& cfg = {});
// Elementwise mean over segments.
Metrics mean_metrics(std::span<const Metrics> rows);

}  // namespace deffx::loss
