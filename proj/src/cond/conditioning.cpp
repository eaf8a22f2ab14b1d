#include "deffx/cond/conditioning.hpp"

#include <array>

#include "../autodiff/ops_util.hpp"

namespace deffx::cond {

namespace {

constexpr std::array<std::pair<CondKind, std::string_view>, 7> kNames = {{
    {CondKind::kNone, "none"},
    {CondKind::kConcat, "concat"},
    {CondKind::kFilm, "film"},
    {CondKind::kTFilm, "tfilm"},
    {CondKind::kTTFilm, "ttfilm"},
    {CondKind::kTVFilm, "tvfilm"},
    {CondKind::kTVCond, "tvcond"},
}};

template <typename T>
void check_activations(const Var<T>& h, std::size_t channels) {
  if (h.shape().size() != 2 || h.dim(0) != channels) {
    throw InvalidArgument("expected activations [" + std::to_string(channels) + ", L], got " + to_string(h.shape()));
  }
}

// Pooled activations joined with the repeated controls: [C (+ nc), blocks].
template <typename T>
Var<T> with_controls(const Var<T>& pooled, const Var<T>& c, std::size_t num_controls) {
  if (num_controls == 0) return pooled;
  if (!c.valid() || c.size() != num_controls) {
    throw InvalidArgument("expected " + std::to_string(num_controls) + " controls, got " +
                          std::to_string(c.valid() ? c.size() : 0));
  }
  return concat<T>({pooled, repeat(reshape(c, {num_controls, 1}), 1, pooled.dim(1))}, 0);
}

}  // namespace

std::string_view cond_kind_name(CondKind kind) {
  for (const auto& [k, n] : kNames)
    if (k == kind) return n;
  return "unknown";
}

std::optional<CondKind> parse_cond_kind(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

bool temporal(CondKind kind) {
  return kind == CondKind::kTFilm || kind == CondKind::kTTFilm || kind == CondKind::kTVFilm ||
         kind == CondKind::kTVCond;
}

template <typename T>
Var<T> film_apply(const Var<T>& h, const Var<T>& gamma, const Var<T>& beta) {
  check_activations(h, gamma.dim(0));
  if (gamma.shape() != Shape{h.dim(0), 1} || beta.shape() != gamma.shape()) {
    throw InvalidArgument("film_apply expects gamma and beta [C, 1], got " + to_string(gamma.shape()) + " and " +
                          to_string(beta.shape()));
  }
  return h * gamma + beta;
}

template <typename T>
Var<T> film_apply_blocks(const Var<T>& h, const Var<T>& gamma, const Var<T>& beta, std::size_t block_size) {
  check_activations(h, gamma.dim(0));
  const std::size_t len = h.dim(1);
  const std::size_t blocks = (len + block_size - 1) / block_size;
  if (gamma.shape() != Shape{h.dim(0), blocks} || beta.shape() != gamma.shape()) {
    throw InvalidArgument("film_apply_blocks expects [" + std::to_string(h.dim(0)) + ", " + std::to_string(blocks) +
                          "] modulation, got " + to_string(gamma.shape()));
  }
  if (blocks == 1) return h * gamma + beta;
  return h * upsample_nearest1d(gamma, block_size, len) + upsample_nearest1d(beta, block_size, len);
}

// --- FilmHead ----------------------------------------------------------------

template <typename T>
FilmHead<T>::FilmHead(const std::string& name, std::size_t latent, std::size_t channels, bool identity_init, Rng& rng)
    : linear(name, latent, 2 * channels, rng) {
  if (identity_init) linear.weight.value.fill(T(0));
  for (std::size_t i = 0; i < 2 * channels; ++i) linear.bias.value[i] = i < channels ? T(1) : T(0);
}

template <typename T>
std::pair<Var<T>, Var<T>> FilmHead<T>::operator()(const Var<T>& z) const {
  const Var<T> out = linear(z);
  const std::size_t c = channels();
  return {slice(out, 0, 0, c), slice(out, 0, c, c)};
}

// --- FilmGenerator -------------------------------------------------------------

template <typename T>
FilmGenerator<T>::FilmGenerator(const std::string& name, std::size_t num_controls, std::size_t hidden,
                                std::size_t latent, Rng& rng)
    : mlp(name, {num_controls, hidden, latent}, nn::Activation::kTanh, nn::Activation::kNone, rng) {
  if (num_controls == 0) throw InvalidArgument(name + ": FiLM needs at least one control");
}

template <typename T>
Var<T> FilmGenerator<T>::operator()(const Var<T>& c) const {
  const std::size_t nc = mlp.layers.front().in_features();
  if (!c.valid() || c.size() != nc) {
    throw InvalidArgument("FiLM generator expects " + std::to_string(nc) + " controls");
  }
  return mlp(reshape(c, {nc, 1}));
}

// --- TFilm ---------------------------------------------------------------------

template <typename T>
TFilm<T>::TFilm(const std::string& name, std::size_t channels, std::size_t num_controls, std::size_t block_size_,
                bool identity_init, Rng& rng)
    : block_size(block_size_), num_controls(num_controls) {
  if (block_size == 0) throw InvalidArgument(name + ": block_size must be >= 1");
  lstm.emplace_back(name + ".lstm", channels + num_controls, 2 * channels, rng);
  if (identity_init) {
    // A zero cell-gate pre-activation keeps the cell at 0, so the output is 0.
    nn::Lstm<T>& l = lstm.front();
    const std::size_t hs = l.hidden_size();
    for (std::size_t r = 2 * hs; r < 3 * hs; ++r) {
      for (std::size_t j = 0; j < l.input_size(); ++j) l.w_ih.value.at(r, j) = T(0);
      for (std::size_t j = 0; j < hs; ++j) l.w_hh.value.at(r, j) = T(0);
      l.bias.value[r] = T(0);
    }
  }
}

template <typename T>
Var<T> TFilm<T>::operator()(const Var<T>& h, const Var<T>& c, nn::StateList<T>* state) const {
  const std::size_t ch = lstm.front().hidden_size() / 2;
  check_activations(h, ch);
  const Var<T> in = with_controls(max_pool1d(h, block_size), c, num_controls);
  const Var<T> out = nn::run_lstm_stack(lstm, in, state);
  return film_apply_blocks(h, shift(slice(out, 0, 0, ch), T(1)), slice(out, 0, ch, ch), block_size);
}

// --- TTFilm --------------------------------------------------------------------

template <typename T>
TTFilm<T>::TTFilm(const std::string& name, std::size_t channels, std::size_t num_controls, std::size_t block_size_,
                  std::size_t rank, std::size_t hidden, bool identity_init, Rng& rng)
    : project(name + ".project", channels, rank, rng),
      expand_hidden(name + ".expand.0", rank, hidden, rng),
      head(name + ".expand.1", hidden, channels, identity_init, rng),
      block_size(block_size_),
      num_controls(num_controls) {
  if (rank == 0 || rank >= channels) throw InvalidArgument(name + ": rank must be in [1, channels)");
  if (block_size == 0) throw InvalidArgument(name + ": block_size must be >= 1");
  lstm.emplace_back(name + ".lstm", rank + num_controls, rank, rng);
}

template <typename T>
Var<T> TTFilm<T>::operator()(const Var<T>& h, const Var<T>& c, nn::StateList<T>* state) const {
  check_activations(h, head.channels());
  const Var<T> in = with_controls(project(max_pool1d(h, block_size)), c, num_controls);
  const Var<T> z = tanh(expand_hidden(nn::run_lstm_stack(lstm, in, state)));
  const auto [gamma, beta] = head(z);
  return film_apply_blocks(h, gamma, beta, block_size);
}

template <typename T>
void TTFilm<T>::collect(nn::ParamRefs<T>& out) {
  project.collect(out);
  lstm.front().collect(out);
  expand_hidden.collect(out);
  head.collect(out);
}

// --- TVFilm --------------------------------------------------------------------

template <typename T>
TVFilmController<T>::TVFilmController(const std::string& name, std::size_t num_controls, std::size_t latent,
                                      std::size_t block_size_, Rng& rng)
    : block_size(block_size_), num_controls(num_controls) {
  if (block_size == 0) throw InvalidArgument(name + ": block_size must be >= 1");
  lstm.emplace_back(name + ".lstm", 1 + num_controls, latent, rng);
}

template <typename T>
Var<T> TVFilmController<T>::operator()(const Var<T>& x, const Var<T>& c, nn::StateList<T>* state) const {
  if (x.shape().size() != 2 || x.dim(0) != 1) {
    throw InvalidArgument("TVFiLM controller expects a [1, L] signal, got " + to_string(x.shape()));
  }
  return nn::run_lstm_stack(lstm, with_controls(avg_pool1d(x, block_size), c, num_controls), state);
}

template <typename T>
Var<T> tvfilm_modulate(const Var<T>& h, const FilmHead<T>& head, const Var<T>& z, std::size_t block_size) {
  const auto [gamma, beta] = head(z);
  return film_apply_blocks(h, gamma, beta, block_size);
}

template <typename T>
Var<T> tvcond_generate(const TVFilmController<T>& ctrl, const Var<T>& x, const Var<T>& c,
                       nn::StateList<std::type_identity_t<T>>* state) {
  const Var<T> z = ctrl(x, c, state);
  return upsample_nearest1d(z, ctrl.block_size, x.dim(1));
}

#define DEFFX_INSTANTIATE(T)                                                                                 \
  template Var<T> film_apply<T>(const Var<T>&, const Var<T>&, const Var<T>&);                                \
  template Var<T> film_apply_blocks<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t);            \
  template class FilmHead<T>;                                                                                \
  template class FilmGenerator<T>;                                                                           \
  template class TFilm<T>;                                                                                   \
  template class TTFilm<T>;                                                                                  \
  template class TVFilmController<T>;                                                                        \
  template Var<T> tvfilm_modulate<T>(const Var<T>&, const FilmHead<T>&, const Var<T>&, std::size_t);         \
  template Var<T> tvcond_generate<T>(const TVFilmController<T>&, const Var<T>&, const Var<T>&, nn::StateList<T>*);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx::cond
