#include "deffx/dsp/processors.hpp"

#include <cmath>
#include <numbers>

#include "../autodiff/ops_util.hpp"
#include "deffx/dsp/prefit.hpp"

namespace deffx::dsp {

template <typename T>
std::vector<BiquadSection> Processor<T>::sections(const std::vector<double>&) const {
  return {};
}

template <typename T>
Var<T> Processor<T>::physical(const Controls<T>& g, std::size_t index) const {
  const ParamSpec& spec = specs_.at(index);
  if (!g.dynamic()) return denormalize(slice(g.values, 0, index, 1), spec.range);
  const std::size_t blocks = g.values.dim(0);
  return denormalize(reshape(slice(g.values, 1, index, 1), {blocks}), spec.range);
}

template <typename T>
Var<T> phase_inversion(const Var<T>& x) {
  return neg(x);
}

template <typename T>
Var<T> apply_gain(const Var<T>& x, const Var<T>& gain_db) {
  return x * exp(scale(gain_db, static_cast<T>(std::numbers::ln10 / 20.0)));
}

template <typename T>
Var<T> apply_offset(const Var<T>& x, const Var<T>& offset) {
  return x + offset;
}

template <typename T>
Var<T> hold_blocks(const Var<T>& values, std::size_t block_size, std::size_t length) {
  return upsample_nearest1d(reshape(values, {1, values.size()}), block_size, length);
}

template <typename T>
Var<T> fir_filter(const Var<T>& x, const Var<T>& taps) {
  const std::size_t n = taps.size();
  // conv1d correlates, so feed the taps reversed.
  std::vector<Var<T>> rev;
  rev.reserve(n);
  for (std::size_t i = n; i-- > 0;) rev.push_back(slice(taps, 0, i, 1));
  const Var<T> w = reshape(concat(rev, 0), {1, 1, n});
  return conv1d(x, w, 1, n - 1);
}

template <typename T>
Var<T> rational(const Var<T>& x, const Var<T>& numerator, const Var<T>& denominator) {
  const Var<T> xc = clamp(x, T(-8), T(8));
  const std::size_t m = numerator.size();
  const std::size_t n = denominator.size();
  Var<T> p = slice(numerator, 0, m - 1, 1);
  for (std::size_t i = m - 1; i-- > 0;) p = p * xc + slice(numerator, 0, i, 1);
  // q = 1 + x (b1 + x (b2 + ...)).
  Var<T> q = slice(denominator, 0, n - 1, 1);
  for (std::size_t j = n - 1; j-- > 0;) q = q * xc + slice(denominator, 0, j, 1);
  q = shift(q * xc, T(1));
  return p / q;
}

namespace {

ParamRange lookup(const ProcessorConfig& cfg, const std::string& name, const ParamRange& fallback) {
  const auto it = cfg.ranges.find(name);
  const ParamRange r = it == cfg.ranges.end() ? fallback : it->second;
  validate(r);
  return r;
}

template <typename T>
class PhaseInversion : public Processor<T> {
 public:
  std::string_view kind() const override { return "phase_inversion"; }
  Var<T> process(const Var<T>& x, const Controls<T>*) const override { return phase_inversion(x); }
  bool memoryless() const override { return true; }
};

template <typename T>
class Tanh : public Processor<T> {
 public:
  std::string_view kind() const override { return "tanh"; }
  Var<T> process(const Var<T>& x, const Controls<T>*) const override { return tanh(x); }
  bool memoryless() const override { return true; }
};

// Gain and DC offset: one parameter applied sample-wise.
template <typename T>
class Scalar : public Processor<T> {
 public:
  Scalar(bool is_gain, ParamRange r) : gain_(is_gain) {
    this->specs_.push_back({is_gain ? "gain_db" : "offset", r});
  }
  std::string_view kind() const override { return gain_ ? "gain" : "dc_offset"; }
  bool memoryless() const override { return true; }

  Var<T> process(const Var<T>& x, const Controls<T>* g) const override {
    if (!g) throw InvalidArgument(std::string(kind()) + " needs a controller");
    Var<T> v = this->physical(*g, 0);
    if (g->dynamic()) v = hold_blocks(v, g->block_size, x.dim(1));
    return gain_ ? apply_gain(x, v) : apply_offset(x, v);
  }

 private:
  bool gain_;
};

// Cascade of cookbook sections applied by frequency sampling.
template <typename T>
class BiquadCascade : public Processor<T> {
 public:
  BiquadCascade(std::string kind, std::vector<std::pair<std::string, FilterKind>> stages, const ProcessorConfig& cfg,
                double fs)
      : kind_(std::move(kind)), stages_(std::move(stages)), fs_(fs) {
    for (const auto& [prefix, k] : stages_) {
      const std::string p = prefix.empty() ? "" : prefix + ".";
      if (filter_param_count(k) == 3) this->specs_.push_back({p + "gain_db", lookup(cfg, p + "gain_db", filter_gain_range())});
      this->specs_.push_back({p + "freq_hz", lookup(cfg, p + "freq_hz", frequency_range(fs))});
      this->specs_.push_back({p + "q", lookup(cfg, p + "q", q_range())});
    }
    for (const auto& s : this->specs_) {
      if (s.name.ends_with("freq_hz") && !(s.range.max < fs / 2.0)) {
        throw InvalidArgument("frequency range of " + s.name + " must stay below fs/2");
      }
    }
  }

  std::string_view kind() const override { return kind_; }

  Var<T> process(const Var<T>& x, const Controls<T>* g) const override {
    if (!g) throw InvalidArgument(kind_ + " needs a controller");
    const std::size_t len = x.shape().back();
    const std::size_t n = fft_size_for(len);
    std::vector<Var<T>> rows;  // per section: [blocks, 6]
    std::size_t index = 0;
    for (const auto& [prefix, k] : stages_) {
      Var<T> gain;
      if (filter_param_count(k) == 3) gain = this->physical(*g, index++);
      const Var<T> f0 = this->physical(*g, index++);
      const Var<T> q = this->physical(*g, index++);
      if (!gain.valid()) gain = f0;
      rows.push_back(biquad_rows(k, gain, f0, q, fs_));
    }
    if (!g->dynamic()) return apply_filter(x, concat(rows, 0), n);
    const std::size_t blocks = g->values.dim(0);
    std::vector<Var<T>> per_block;
    per_block.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
      std::vector<Var<T>> secs;
      for (const auto& r : rows) secs.push_back(slice(r, 0, b, 1));
      per_block.push_back(concat(secs, 0));
    }
    return apply_filter_blocks(x, per_block, g->block_size, n);
  }

  std::vector<BiquadSection> sections(const std::vector<double>& physical) const override {
    if (physical.size() != this->num_params()) throw InvalidArgument("parameter count mismatch for " + kind_);
    std::vector<BiquadSection> out;
    std::size_t i = 0;
    for (const auto& [prefix, k] : stages_) {
      FilterParams p;
      p.kind = k;
      p.fs = fs_;
      if (filter_param_count(k) == 3) p.gain_db = physical[i++];
      p.f0 = physical[i++];
      p.q = physical[i++];
      out.push_back(biquad_coefficients(p));
    }
    return out;
  }

 private:
  std::string kind_;
  std::vector<std::pair<std::string, FilterKind>> stages_;
  double fs_;
};

}  // namespace

// --- StaticFir -------------------------------------------------------------

template <typename T>
StaticFir<T>::StaticFir(const std::string& name, std::size_t taps, std::size_t hidden, std::size_t layers, Rng& rng)
    : net_(name + ".siren", 1, hidden, layers, 1, rng), taps_(taps) {
  if (taps == 0) throw InvalidArgument("static_fir needs at least one tap");
}

template <typename T>
Var<T> StaticFir<T>::taps(Tape<T>& tape) const {
  Tensor<T> idx({1, taps_});
  for (std::size_t i = 0; i < taps_; ++i) {
    idx[i] = taps_ == 1 ? T(-1) : static_cast<T>(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(taps_ - 1));
  }
  return reshape(net_(tape.constant(std::move(idx))), {taps_});
}

template <typename T>
Var<T> StaticFir<T>::process(const Var<T>& x, const Controls<T>*) const {
  return fir_filter(x, taps(x.tape()));
}

// --- StaticMlp -------------------------------------------------------------

template <typename T>
StaticMlp<T>::StaticMlp(const std::string& name, std::size_t hidden, std::size_t layers, bool tanh_init, Rng& rng) {
  if (!tanh_init) {
    net_ = nn::Siren<T>(name + ".siren", 1, hidden, layers, 1, rng);
    return;
  }
  const Prefit& fit = tanh_prefit("siren");
  net_ = nn::Siren<T>(name + ".siren", 1, fit.hidden, fit.hidden_layers, 1, rng, static_cast<T>(fit.first_omega),
                      static_cast<T>(fit.input_scale));
  for (std::size_t i = 0; i < net_.layers.size(); ++i) {
    const std::string prefix = "layers." + std::to_string(i);
    net_.layers[i].weight.value = fit.tensor(prefix + ".weight").cast<T>();
    net_.layers[i].bias.value = fit.tensor(prefix + ".bias").cast<T>();
  }
}

template <typename T>
Var<T> StaticMlp<T>::process(const Var<T>& x, const Controls<T>*) const {
  if (x.shape().size() != 2 || x.dim(0) != 1) return reshape(net_(reshape(x, {1, x.size()})), x.shape());
  return net_(x);
}

// --- StaticRational --------------------------------------------------------

template <typename T>
StaticRational<T>::StaticRational(const std::string& name, bool tanh_init)
    : numerator{name + ".numerator", Tensor<T>({7})}, denominator{name + ".denominator", Tensor<T>({5})} {
  if (tanh_init) {
    const Prefit& fit = tanh_prefit("rational");
    numerator.value = fit.tensor("numerator").cast<T>();
    denominator.value = fit.tensor("denominator").cast<T>();
  } else {
    numerator.value[1] = T(1);
  }
}

template <typename T>
Var<T> StaticRational<T>::process(const Var<T>& x, const Controls<T>*) const {
  Tape<T>& t = x.tape();
  return rational(x, t.param(numerator), t.param(denominator));
}

template <typename T>
void StaticRational<T>::collect(nn::ParamRefs<T>& out) {
  out.push_back(&numerator);
  out.push_back(&denominator);
}

// --- factory ---------------------------------------------------------------

std::vector<std::string> processor_kinds() {
  return {"phase_inversion", "gain",        "dc_offset",   "lowpass",    "highpass",
          "lowshelf",        "highshelf",   "peak",        "parametric_eq", "shelving_eq",
          "static_fir",      "tanh",        "static_mlp",  "static_rational"};
}

template <typename T>
std::unique_ptr<Processor<T>> make_processor(const ProcessorConfig& cfg, double fs, Rng& rng,
                                             const std::string& name) {
  using S = std::vector<std::pair<std::string, FilterKind>>;
  const std::string& k = cfg.kind;
  if (k == "phase_inversion") return std::make_unique<PhaseInversion<T>>();
  if (k == "tanh") return std::make_unique<Tanh<T>>();
  if (k == "gain") return std::make_unique<Scalar<T>>(true, lookup(cfg, "gain_db", chain_gain_range()));
  if (k == "dc_offset") return std::make_unique<Scalar<T>>(false, lookup(cfg, "offset", offset_range()));
  if (k == "lowpass") return std::make_unique<BiquadCascade<T>>(k, S{{"", FilterKind::kLowpass}}, cfg, fs);
  if (k == "highpass") return std::make_unique<BiquadCascade<T>>(k, S{{"", FilterKind::kHighpass}}, cfg, fs);
  if (k == "lowshelf") return std::make_unique<BiquadCascade<T>>(k, S{{"", FilterKind::kLowShelf}}, cfg, fs);
  if (k == "highshelf") return std::make_unique<BiquadCascade<T>>(k, S{{"", FilterKind::kHighShelf}}, cfg, fs);
  if (k == "peak") return std::make_unique<BiquadCascade<T>>(k, S{{"", FilterKind::kPeak}}, cfg, fs);
  if (k == "parametric_eq") {
    return std::make_unique<BiquadCascade<T>>(k,
                                              S{{"low_shelf", FilterKind::kLowShelf},
                                                {"peak1", FilterKind::kPeak},
                                                {"peak2", FilterKind::kPeak},
                                                {"peak3", FilterKind::kPeak},
                                                {"high_shelf", FilterKind::kHighShelf}},
                                              cfg, fs);
  }
  if (k == "shelving_eq") {
    return std::make_unique<BiquadCascade<T>>(k,
                                              S{{"highpass", FilterKind::kHighpass},
                                                {"low_shelf", FilterKind::kLowShelf},
                                                {"high_shelf", FilterKind::kHighShelf},
                                                {"lowpass", FilterKind::kLowpass}},
                                              cfg, fs);
  }
  if (k == "static_fir") return std::make_unique<StaticFir<T>>(name, cfg.fir_taps, cfg.siren_hidden, cfg.siren_layers, rng);
  if (k == "static_mlp") {
    return std::make_unique<StaticMlp<T>>(name, cfg.siren_hidden, cfg.siren_layers, cfg.tanh_init, rng);
  }
  if (k == "static_rational") return std::make_unique<StaticRational<T>>(name, cfg.tanh_init);
  throw InvalidArgument("unknown processor kind '" + k + "'");
}

#define DEFFX_INSTANTIATE(T)                                                                                 \
  template class Processor<T>;                                                                               \
  template class StaticFir<T>;                                                                               \
  template class StaticMlp<T>;                                                                               \
  template class StaticRational<T>;                                                                          \
  template Var<T> phase_inversion<T>(const Var<T>&);                                                         \
  template Var<T> apply_gain<T>(const Var<T>&, const Var<T>&);                                               \
  template Var<T> apply_offset<T>(const Var<T>&, const Var<T>&);                                             \
  template Var<T> hold_blocks<T>(const Var<T>&, std::size_t, std::size_t);                                   \
  template Var<T> fir_filter<T>(const Var<T>&, const Var<T>&);                                               \
  template Var<T> rational<T>(const Var<T>&, const Var<T>&, const Var<T>&);                                  \
  template std::unique_ptr<Processor<T>> make_processor<T>(const ProcessorConfig&, double, Rng&, const std::string&);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx::dsp
