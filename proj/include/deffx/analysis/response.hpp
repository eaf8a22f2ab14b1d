#pragma once

// Stepped-sine frequency response measurement, nonlinearity amplitude
// curves, per-stage time traces, and their CSV/SVG emission.

#include <complex>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deffx/model/model.hpp"

namespace deffx::analysis {

struct SweepConfig {
  double f1 = 10.0;
  double f2 = 0.0;  // 0 selects 0.9 * fs / 2
  std::size_t steps = 50;
  double duration = 5.0;  // seconds per sinusoid
  double amplitude = 0.1;
  double fs = 48000.0;
  double warmup = 1.0;  // seconds rendered first for recurrent systems

  double upper() const { return f2 > 0.0 ? f2 : 0.45 * fs; }
  void validate() const;
  // Exponentially spaced from f1 to upper().
  std::vector<double> frequencies() const;
  std::size_t signal_length() const;
  std::size_t tail_length() const;
};

// T * floor(fs / f1) samples: the final segment that is analyzed.
std::size_t tail_length(double duration, double fs, double f1);

struct ResponseCurve {
  std::vector<double> freqs;
  std::vector<double> magnitude_db;
  std::vector<double> phase_rad;  // unwrapped along frequency
};

// Maps an input signal to an output signal of the same length.
using System = std::function<std::vector<double>(const std::vector<double>&)>;

// Single-bin DFT of the last whole number of periods of f in x.
std::complex<double> project(std::span<const double> x, double f, double fs);

ResponseCurve stepped_sine_response(const System& system, const SweepConfig& cfg, bool warmup);

template <typename T>
System model_system(model::Model<T>& model, const std::vector<double>& controls);

template <typename T>
ResponseCurve stepped_sine_response(model::Model<T>& model, const SweepConfig& cfg,
                                    const std::vector<double>& controls);

// Magnitude/phase of a biquad cascade on the given grid.
ResponseCurve analytic_response(const std::vector<dsp::BiquadSection>& sections, const std::vector<double>& freqs,
                                double fs);

void unwrap(std::vector<double>& phase);

struct AmplitudeCurve {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> reference;  // tanh(x)
};

// f evaluated on n evenly spaced points of [-1, 1].
AmplitudeCurve amplitude_response(const System& f, std::size_t n);

template <typename T>
System processor_system(const dsp::Processor<T>& processor);

// One gray-box stage in isolation, its parameters taken from the stage's
// controller at `controls`. The returned system throws for time-varying stages.
template <typename T>
System stage_system(model::GrayBoxModel<T>& model, std::size_t stage, const std::vector<double>& controls);

struct TimeTrace {
  double fs = 48000.0;
  std::vector<double> input;
  std::vector<double> output;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // physical units, one per sample
};

// Parameter trajectory of a gray-box stage driven by a dynamic controller.
// Throws InvalidArgument for static stages (use stage_parameters).
template <typename T>
TimeTrace time_trace(model::GrayBoxModel<T>& model, std::size_t stage, const std::vector<double>& x,
                     const std::vector<double>& controls);

// Physical parameter values of a statically controlled stage.
template <typename T>
std::vector<std::pair<std::string, double>> stage_parameters(model::GrayBoxModel<T>& model, std::size_t stage,
                                                             const std::vector<double>& controls);

// --- plot data --------------------------------------------------------------
// CSV columns: freq_hz,mag_db,phase_rad.
void write_csv(const ResponseCurve& curve, const std::filesystem::path& path);
ResponseCurve read_response_csv(const std::filesystem::path& path);
// CSV columns: x,y,tanh.
void write_csv(const AmplitudeCurve& curve, const std::filesystem::path& path);
// CSV columns: time_s,input,output,<parameter names...>.
void write_csv(const TimeTrace& trace, const std::filesystem::path& path);

// 800x480 SVG polyline plots.
void write_svg(const ResponseCurve& curve, const std::filesystem::path& path, const std::string& title);
void write_svg(const AmplitudeCurve& curve, const std::filesystem::path& path, const std::string& title);
void write_svg(const TimeTrace& trace, const std::filesystem::path& path, const std::string& title);

}  // namespace deffx::analysis
