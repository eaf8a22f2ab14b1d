#include "deffx/model/model.hpp"

#include <cmath>

#include "../autodiff/ops_util.hpp"

namespace deffx::model {

using cond::CondKind;

std::size_t receptive_field(std::size_t blocks, std::size_t kernel, std::size_t growth) {
  if (blocks == 0 || kernel == 0 || growth == 0) throw InvalidArgument("receptive_field arguments must be >= 1");
  std::size_t sum = 0, d = 1;
  for (std::size_t i = 0; i < blocks; ++i, d *= growth) sum += d;
  return 1 + (kernel - 1) * sum;
}

template <typename T>
std::size_t Model<T>::param_count() {
  return nn::count_parameters(parameters());
}

template <typename T>
nn::ParamRefs<T> Model<T>::parameters() {
  nn::ParamRefs<T> p;
  collect(p);
  return p;
}

namespace {

template <typename T>
nn::StateList<T>* slot(ModelState<T>* state, std::size_t index, std::size_t slots) {
  if (!state) return nullptr;
  if (state->size() != slots) state->resize(slots);
  return &(*state)[index];
}

template <typename T>
void require_controls(const Var<T>& c, std::size_t n) {
  if (n == 0) return;
  if (!c.valid() || c.size() != n) {
    throw InvalidArgument("model expects " + std::to_string(n) + " controls, got " +
                          std::to_string(c.valid() ? c.size() : 0));
  }
}

template <typename T>
void require_signal(const Var<T>& x) {
  if (x.shape().size() != 2 || x.dim(0) != 1 || x.dim(1) == 0) {
    throw InvalidArgument("model input must be [1, L] with L >= 1, got " + to_string(x.shape()));
  }
}

// TCN and GCN. Each block: dilated causal conv, optional batchnorm,
// conditioning, activation, residual. GCN blocks gate the conv output and mix
// it with a 1x1 conv; their gated activations feed the output layer.
template <typename T>
class ConvModel : public Model<T> {
 public:
  explicit ConvModel(ModelSpec spec) : Model<T>(std::move(spec)) {
    const ModelSpec& s = this->spec();
    const ConvConfig& c = s.conv;
    gated_ = s.arch == Arch::kGcn;
    Rng rng(s.seed);
    const std::size_t nc = s.num_controls;
    const std::size_t width = gated_ ? 2 * c.channels : c.channels;
    const bool identity = true;
    if (c.cond == CondKind::kFilm) gen_ = cond::FilmGenerator<T>("film", nc, c.film_hidden, c.film_latent, rng);
    if (c.cond == CondKind::kTVFilm) tv_ = cond::TVFilmController<T>("tvfilm", nc, c.tv_latent, c.block_size, rng);
    std::size_t in = c.cond == CondKind::kConcat ? 1 + nc : 1;
    std::size_t dilation = 1;
    for (std::size_t i = 0; i < c.blocks; ++i, dilation *= c.dilation_growth) {
      const std::string name = "blocks." + std::to_string(i);
      Block b;
      b.conv = nn::Conv1d<T>(name + ".conv", in, width, c.kernel, dilation, rng);
      if (in != c.channels) {
        b.shortcut = nn::Conv1d<T>(name + ".shortcut", in, c.channels, 1, 1, rng);
        b.has_shortcut = true;
      }
      if (c.batchnorm) b.bn = nn::BatchNorm1d<T>(name + ".bn", width);
      switch (c.cond) {
        case CondKind::kFilm:
          b.head = cond::FilmHead<T>(name + ".film", c.film_latent, width, identity, rng);
          break;
        case CondKind::kTVFilm:
          b.head = cond::FilmHead<T>(name + ".film", c.tv_latent, width, identity, rng);
          break;
        case CondKind::kTFilm:
          b.tfilm = cond::TFilm<T>(name + ".tfilm", width, nc, c.block_size, identity, rng);
          break;
        case CondKind::kTTFilm:
          b.ttfilm = cond::TTFilm<T>(name + ".ttfilm", width, nc, c.block_size, c.tt_rank, c.tt_hidden, identity, rng);
          break;
        default:
          break;
      }
      if (gated_) b.mix = nn::Conv1d<T>(name + ".mix", c.channels, c.channels, 1, 1, rng);
      blocks_.push_back(std::move(b));
      in = c.channels;
    }
    output_ = nn::Linear<T>("output", gated_ ? c.blocks * c.channels : c.channels, 1, rng);
  }

  Var<T> forward(const Var<T>& x, const Var<T>& c, ModelState<T>* state, bool training) override {
    const ModelSpec& s = this->spec();
    const ConvConfig& cfg = s.conv;
    require_signal(x);
    const bool uses_controls = cfg.cond != CondKind::kNone;
    if (uses_controls) require_controls(c, s.num_controls);
    const Var<T> cc = uses_controls && s.num_controls > 0 ? c : Var<T>{};
    const std::size_t len = x.dim(1);
    const std::size_t slots = num_slots();

    Var<T> h = x;
    if (cfg.cond == CondKind::kConcat) h = concat<T>({x, control::repeat_controls(cc, len)}, 0);
    Var<T> z;
    if (cfg.cond == CondKind::kFilm) z = gen_(cc);
    if (cfg.cond == CondKind::kTVFilm) z = tv_(x, cc, slot(state, 0, slots));

    std::vector<Var<T>> skips;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      Block& b = blocks_[i];
      Var<T> y = b.conv(h);
      if (cfg.batchnorm) y = b.bn.forward(y, training);
      switch (cfg.cond) {
        case CondKind::kFilm: {
          const auto [gamma, beta] = b.head(z);
          y = cond::film_apply(y, gamma, beta);
          break;
        }
        case CondKind::kTVFilm:
          y = cond::tvfilm_modulate(y, b.head, z, cfg.block_size);
          break;
        case CondKind::kTFilm:
          y = b.tfilm(y, cc, slot(state, i, slots));
          break;
        case CondKind::kTTFilm:
          y = b.ttfilm(y, cc, slot(state, i, slots));
          break;
        default:
          break;
      }
      const Var<T> res = b.has_shortcut ? b.shortcut.forward(h, 0) : h;
      if (gated_) {
        const std::size_t ch = cfg.channels;
        const Var<T> a = tanh(slice(y, 0, 0, ch)) * sigmoid(slice(y, 0, ch, ch));
        skips.push_back(a);
        h = b.mix.forward(a, 0) + res;
      } else {
        h = tanh(y) + res;
      }
    }
    return output_(gated_ ? concat(skips, 0) : h);
  }

  void collect(nn::ParamRefs<T>& out) override {
    const CondKind ck = this->spec().conv.cond;
    if (ck == CondKind::kFilm) gen_.collect(out);
    if (ck == CondKind::kTVFilm) tv_.collect(out);
    for (Block& b : blocks_) {
      b.conv.collect(out);
      if (b.has_shortcut) b.shortcut.collect(out);
      if (this->spec().conv.batchnorm) b.bn.collect(out);
      if (ck == CondKind::kFilm || ck == CondKind::kTVFilm) b.head.collect(out);
      if (ck == CondKind::kTFilm) b.tfilm.collect(out);
      if (ck == CondKind::kTTFilm) b.ttfilm.collect(out);
      if (gated_) b.mix.collect(out);
    }
    output_.collect(out);
  }

  void collect_buffers(nn::ParamRefs<T>& out) override {
    if (!this->spec().conv.batchnorm) return;
    for (Block& b : blocks_) b.bn.collect_buffers(out);
  }

  bool recurrent() const override { return cond::temporal(this->spec().conv.cond); }

  std::size_t receptive_field() const override {
    const ConvConfig& c = this->spec().conv;
    return model::receptive_field(c.blocks, c.kernel, c.dilation_growth);
  }

 private:
  struct Block {
    nn::Conv1d<T> conv;
    nn::Conv1d<T> shortcut;
    bool has_shortcut = false;
    nn::BatchNorm1d<T> bn;
    cond::FilmHead<T> head;
    cond::TFilm<T> tfilm;
    cond::TTFilm<T> ttfilm;
    nn::Conv1d<T> mix;
  };

  std::size_t num_slots() const {
    const CondKind ck = this->spec().conv.cond;
    if (ck == CondKind::kTFilm || ck == CondKind::kTTFilm) return blocks_.size();
    return ck == CondKind::kTVFilm ? 1 : 0;
  }

  bool gated_ = false;
  cond::FilmGenerator<T> gen_;
  cond::TVFilmController<T> tv_;
  std::vector<Block> blocks_;
  nn::Linear<T> output_;
};

// Single LSTM layer, linear output and tanh. Controls enter by concatenation,
// either repeated (concat) or as a time-varying sequence (tvcond).
template <typename T>
class LstmModel : public Model<T> {
 public:
  explicit LstmModel(ModelSpec spec) : Model<T>(std::move(spec)) {
    const ModelSpec& s = this->spec();
    const LstmConfig& l = s.lstm;
    Rng rng(s.seed);
    std::size_t in = 1;
    if (l.cond == CondKind::kConcat) in += s.num_controls;
    if (l.cond == CondKind::kTVCond) {
      tv_ = cond::TVFilmController<T>("tvcond", s.num_controls, l.tv_latent, l.block_size, rng);
      in += l.tv_latent;
    }
    lstm_.emplace_back("lstm", in, l.hidden, rng);
    output_ = nn::Linear<T>("output", l.hidden, 1, rng);
  }

  Var<T> forward(const Var<T>& x, const Var<T>& c, ModelState<T>* state, bool) override {
    const ModelSpec& s = this->spec();
    require_signal(x);
    const CondKind ck = s.lstm.cond;
    if (ck != CondKind::kNone) require_controls(c, s.num_controls);
    const Var<T> cc = ck != CondKind::kNone && s.num_controls > 0 ? c : Var<T>{};
    std::vector<Var<T>> parts{x};
    if (ck == CondKind::kConcat) parts.push_back(control::repeat_controls(cc, x.dim(1)));
    if (ck == CondKind::kTVCond) parts.push_back(cond::tvcond_generate(tv_, x, cc, slot(state, 1, 2)));
    const Var<T> in = parts.size() == 1 ? x : concat(parts, 0);
    return tanh(output_(nn::run_lstm_stack(lstm_, in, slot(state, 0, 2))));
  }

  void collect(nn::ParamRefs<T>& out) override {
    if (this->spec().lstm.cond == CondKind::kTVCond) tv_.collect(out);
    lstm_.front().collect(out);
    output_.collect(out);
  }

  bool recurrent() const override { return true; }

 private:
  cond::TVFilmController<T> tv_;
  std::vector<nn::Lstm<T>> lstm_;
  nn::Linear<T> output_;
};

}  // namespace

// --- GrayBoxModel ----------------------------------------------------------

template <typename T>
GrayBoxModel<T>::GrayBoxModel(ModelSpec spec) : Model<T>(std::move(spec)) {
  const ModelSpec& s = this->spec();
  Rng rng(s.seed);
  const auto& stages = s.graybox.stages;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string name = "stages." + std::to_string(i);
    try {
      processors_.push_back(dsp::make_processor<T>(stages[i].processor, s.sample_rate, rng, name + ".processor"));
      control::ControllerConfig cc = stages[i].controller;
      cc.block_size = s.graybox.block_size;
      controllers_.emplace_back(cc, processors_.back()->num_params(), s.num_controls, name + ".controller", rng);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("stage " + std::to_string(i) + " (" + stages[i].processor.kind + "): " + e.what());
    }
  }
}

template <typename T>
Var<T> GrayBoxModel<T>::forward(const Var<T>& x, const Var<T>& c, ModelState<T>* state, bool) {
  return forward_traced(x, c, state, nullptr);
}

template <typename T>
Var<T> GrayBoxModel<T>::forward_traced(const Var<T>& x, const Var<T>& c, ModelState<T>* state,
                                       std::vector<StageTrace<T>>* trace) {
  require_signal(x);
  const std::size_t nc = this->spec().num_controls;
  require_controls(c, nc);
  const Var<T> cc = nc > 0 ? c : Var<T>{};
  if (trace) trace->clear();
  Var<T> h = x;
  for (std::size_t i = 0; i < processors_.size(); ++i) {
    const control::Controller<T>& ctl = controllers_[i];
    const dsp::Controls<T> g = ctl(h, cc, ctl.recurrent() ? slot(state, i, processors_.size()) : nullptr);
    h = processors_[i]->process(h, g.values.valid() ? &g : nullptr);
    if (trace) {
      trace->push_back({std::string(processors_[i]->kind()), std::string(control::controller_kind_name(ctl.kind())),
                        g, h});
    }
  }
  return h;
}

template <typename T>
void GrayBoxModel<T>::collect(nn::ParamRefs<T>& out) {
  for (std::size_t i = 0; i < processors_.size(); ++i) {
    processors_[i]->collect(out);
    controllers_[i].collect(out);
  }
}

template <typename T>
bool GrayBoxModel<T>::recurrent() const {
  for (const auto& c : controllers_)
    if (c.recurrent()) return true;
  return false;
}

template <typename T>
std::size_t GrayBoxModel<T>::num_controlled_params() const {
  std::size_t n = 0;
  for (const auto& p : processors_) n += p->num_params();
  return n;
}

template <typename T>
void GrayBoxModel<T>::set_static_physical(std::size_t stage, const std::vector<double>& physical) {
  control::Controller<T>& ctl = controllers_.at(stage);
  const dsp::Processor<T>& proc = *processors_.at(stage);
  if (ctl.kind() != control::ControllerKind::kStatic) throw InvalidArgument("stage has no static controller");
  if (physical.size() != proc.num_params()) throw InvalidArgument("parameter count mismatch");
  for (std::size_t i = 0; i < physical.size(); ++i) {
    const double u = std::clamp(dsp::normalize(physical[i], proc.params()[i].range), 1e-12, 1.0 - 1e-12);
    ctl.bias.value[i] = static_cast<T>(std::log(u / (1.0 - u)));
  }
}

template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelSpec& spec) {
  switch (spec.arch) {
    case Arch::kTcn:
    case Arch::kGcn:
      return std::make_unique<ConvModel<T>>(spec);
    case Arch::kLstm:
      return std::make_unique<LstmModel<T>>(spec);
    case Arch::kGrayBox:
      return std::make_unique<GrayBoxModel<T>>(spec);
  }
  throw InvalidArgument("unknown architecture");
}

#define DEFFX_INSTANTIATE(T)   \
  template class Model<T>;     \
  template class GrayBoxModel<T>; \
  template std::unique_ptr<Model<T>> build_model<T>(const ModelSpec&);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx::model
