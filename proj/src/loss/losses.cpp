#include "deffx/loss/losses.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "autodiff/ops_util.hpp"
#include "deffx/core/error.hpp"

namespace deffx::loss {

namespace {

constexpr double kMagnitudeFloor = 1e-8;

template <typename T>
void check_pair(const Var<T>& y, const Var<T>& y_hat) {
  if (y.size() != y_hat.size())
    throw InvalidArgument("loss length mismatch: " + std::to_string(y.size()) + " vs " + std::to_string(y_hat.size()));
  if (y.size() == 0) throw InvalidArgument("loss of empty signals");
}

template <typename T>
Var<T> flat(const Var<T>& a) {
  return a.shape().size() == 1 ? a : reshape(a, {a.size()});
}

template <typename T>
double target_energy(const Var<T>& y) {
  double e = 0.0;
  for (T v : y.value().storage()) e += static_cast<double>(v) * v;
  if (!(e > 0.0)) throw UndefinedMetric("target signal is silent");
  return e;
}

void check_pair(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size())
    throw InvalidArgument("metric length mismatch: " + std::to_string(y.size()) + " vs " + std::to_string(y_hat.size()));
  if (y.empty()) throw InvalidArgument("metric of empty signals");
}

}  // namespace

void MrstftConfig::validate() const {
  if (resolutions.empty()) throw InvalidArgument("MR-STFT needs at least one resolution");
  for (const auto& r : resolutions)
    if (!(r.fft_size >= r.window_len && r.window_len > r.hop && r.hop > 0))
      throw InvalidArgument("MR-STFT resolution needs fft_size >= window_len > hop > 0, got (" +
                            std::to_string(r.fft_size) + ", " + std::to_string(r.hop) + ", " +
                            std::to_string(r.window_len) + ")");
}

std::size_t MrstftConfig::min_length() const {
  std::size_t n = 0;
  for (const auto& r : resolutions) n = std::max(n, r.fft_size);
  return n;
}

void LossWeights::validate() const {
  if (!(l1 >= 0.0) || !(mrstft >= 0.0)) throw InvalidArgument("loss weights must be nonnegative");
  if (l1 == 0.0 && mrstft == 0.0) throw InvalidArgument("loss weights are both zero");
}

template <typename T>
std::vector<T> hann_window(std::size_t n) {
  std::vector<T> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = static_cast<T>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
  return w;
}

template <typename T>
Var<T> l1(const Var<T>& y, const Var<T>& y_hat) {
  check_pair(y, y_hat);
  return mean(abs(flat(y_hat) - flat(y)));
}

template <typename T>
Var<T> mse(const Var<T>& y, const Var<T>& y_hat) {
  check_pair(y, y_hat);
  return mean(pow(flat(y_hat) - flat(y), 2));
}

template <typename T>
Var<T> esr(const Var<T>& y, const Var<T>& y_hat) {
  check_pair(y, y_hat);
  target_energy(y);
  const Var<T> a = flat(y);
  return sum(pow(flat(y_hat) - a, 2)) / sum(pow(a, 2));
}

template <typename T>
Var<T> dc_loss(const Var<T>& y, const Var<T>& y_hat) {
  check_pair(y, y_hat);
  target_energy(y);
  const Var<T> a = flat(y);
  return pow(mean(a) - mean(flat(y_hat)), 2) / mean(pow(a, 2));
}

template <typename T>
Var<T> mrstft(const Var<T>& y, const Var<T>& y_hat, const MrstftConfig& cfg) {
  check_pair(y, y_hat);
  cfg.validate();
  if (y.size() < cfg.min_length())
    throw InvalidArgument("MR-STFT needs at least " + std::to_string(cfg.min_length()) + " samples, got " +
                          std::to_string(y.size()));
  Tape<T>& tape = y_hat.tape();
  const Var<T> a = flat(y), b = flat(y_hat);
  Var<T> total;
  for (const auto& r : cfg.resolutions) {
    const Var<T> window = tape.constant(Tensor<T>::vector(hann_window<T>(r.window_len)));
    auto magnitude = [&](const Var<T>& s) {
      return cabs(rfft(frame(s, r.window_len, r.hop) * window, r.fft_size), static_cast<T>(kMagnitudeFloor));
    };
    const Var<T> ma = magnitude(a), mb = magnitude(b);
    const Var<T> sc = sqrt(sum(pow(ma - mb, 2))) / sqrt(sum(pow(ma, 2)));
    const Var<T> mag = mean(abs(log(ma) - log(mb)));
    const Var<T> term = sc + mag;
    total = total.valid() ? total + term : term;
  }
  return total * static_cast<T>(1.0 / static_cast<double>(cfg.resolutions.size()));
}

template <typename T>
LossTerms<T> combined_loss(const Var<T>& y, const Var<T>& y_hat, const LossWeights& w, const MrstftConfig& cfg) {
  w.validate();
  LossTerms<T> out;
  if (w.l1 > 0.0) {
    const Var<T> v = l1(y, y_hat);
    out.l1 = static_cast<double>(v.value()[0]);
    out.total = v * static_cast<T>(w.l1);
  }
  if (w.mrstft > 0.0) {
    const Var<T> v = mrstft(y, y_hat, cfg);
    out.mrstft = static_cast<double>(v.value()[0]);
    const Var<T> weighted = v * static_cast<T>(w.mrstft);
    out.total = out.total.valid() ? out.total + weighted : weighted;
  }
  return out;
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y_hat[i] - y[i]);
  return s / static_cast<double>(y.size());
}

double mse(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y_hat[i] - y[i]) * (y_hat[i] - y[i]);
  return s / static_cast<double>(y.size());
}

double mape(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]) / std::max(std::abs(y[i]), 1e-8);
  return s / static_cast<double>(y.size());
}

double esr(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    den += y[i] * y[i];
  }
  if (!(den > 0.0)) throw UndefinedMetric("target signal is silent");
  return num / den;
}

double dc_loss(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat);
  const double n = static_cast<double>(y.size());
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  const double mh = std::accumulate(y_hat.begin(), y_hat.end(), 0.0) / n;
  double energy = 0.0;
  for (double v : y) energy += v * v;
  if (!(energy > 0.0)) throw UndefinedMetric("target signal is silent");
  return (my - mh) * (my - mh) / (energy / n);
}

double mrstft(std::span<const double> y, std::span<const double> y_hat, const MrstftConfig& cfg) {
  Tape<double> tape;
  tape.set_grad_enabled(false);
  const Var<double> a = tape.constant(Tensor<double>::vector({y.begin(), y.end()}));
  const Var<double> b = tape.constant(Tensor<double>::vector({y_hat.begin(), y_hat.end()}));
  return mrstft(a, b, cfg).value()[0];
}

Metrics compute_metrics(std::span<const double> y, std::span<const double> y_hat, const LossWeights& w,
                        const MrstftConfig& cfg) {
  Metrics m;
  m.l1 = mae(y, y_hat);
  m.mrstft = mrstft(y, y_hat, cfg);
  m.tot = w.l1 * m.l1 + w.mrstft * m.mrstft;
  m.esr = esr(y, y_hat);
  m.dc = dc_loss(y, y_hat);
  m.mse = mse(y, y_hat);
  m.mape = mape(y, y_hat);
  return m;
}

Metrics mean_metrics(std::span<const Metrics> rows) {
  if (rows.empty()) throw InvalidArgument("no metric rows to average");
  Metrics m;
  for (const auto& r : rows) {
    m.tot += r.tot;
    m.l1 += r.l1;
    m.mrstft += r.mrstft;
    m.esr += r.esr;
    m.dc += r.dc;
    m.mse += r.mse;
    m.mape += r.mape;
  }
  const double n = static_cast<double>(rows.size());
  m.tot /= n;
  m.l1 /= n;
  m.mrstft /= n;
  m.esr /= n;
  m.dc /= n;
  m.mse /= n;
  m.mape /= n;
  return m;
}

#define DEFFX_LOSSES(T)                                                                          \
  template std::vector<T> hann_window<T>(std::size_t);                                           \
  template Var<T> l1(const Var<T>&, const Var<T>&);                                              \
  template Var<T> mse(const Var<T>&, const Var<T>&);                                             \
  template Var<T> esr(const Var<T>&, const Var<T>&);                                             \
  template Var<T> dc_loss(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mrstft(const Var<T>&, const Var<T>&, const MrstftConfig&);                     \
  template LossTerms<T> combined_loss(const Var<T>&, const Var<T>&, const LossWeights&, const MrstftConfig&);
DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_LOSSES)

}  // namespace deffx::loss
