#pragma once

// Feature-wise modulation of [C, L] activations by control vectors and by
// recurrent summaries of the signal.

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "deffx/nn/layers.hpp"

namespace deffx::cond {

enum class CondKind { kNone, kConcat, kFilm, kTFilm, kTTFilm, kTVFilm, kTVCond };

// "none", "concat", "film", "tfilm", "ttfilm", "tvfilm", "tvcond".
std::string_view cond_kind_name(CondKind kind);
std::optional<CondKind> parse_cond_kind(std::string_view name);
bool temporal(CondKind kind);

// gamma * h + beta with gamma, beta [C, 1] broadcast over time.
template <typename T>
Var<T> film_apply(const Var<T>& h, const Var<T>& gamma, const Var<T>& beta);
// gamma, beta [C, blocks] held for `block_size` samples each.
template <typename T>
Var<T> film_apply_blocks(const Var<T>& h, const Var<T>& gamma, const Var<T>& beta, std::size_t block_size);

// Linear map from a latent [D, N] to gamma and beta [C, N]. The gamma rows
// start with bias 1 and the beta rows with bias 0; with `identity_init` the
// weights start at zero so the head outputs (1, 0) for every latent.
template <typename T>
class FilmHead {
 public:
  FilmHead() = default;
  FilmHead(const std::string& name, std::size_t latent, std::size_t channels, bool identity_init, Rng& rng);

  std::pair<Var<T>, Var<T>> operator()(const Var<T>& z) const;
  void collect(nn::ParamRefs<T>& out) { linear.collect(out); }
  std::size_t channels() const { return linear.out_features() / 2; }

  nn::Linear<T> linear;
};

// MLP from the control vector to a static latent z.
template <typename T>
class FilmGenerator {
 public:
  FilmGenerator() = default;
  FilmGenerator(const std::string& name, std::size_t num_controls, std::size_t hidden, std::size_t latent, Rng& rng);

  // c [nc] -> z [latent, 1]
  Var<T> operator()(const Var<T>& c) const;
  void collect(nn::ParamRefs<T>& out) { mlp.collect(out); }
  std::size_t latent() const { return mlp.layers.back().out_features(); }

  nn::Mlp<T> mlp;
};

// Temporal FiLM for one network block: an LSTM over max-pooled activations
// (and the repeated controls) emits gamma - 1 and beta per time block.
template <typename T>
class TFilm {
 public:
  TFilm() = default;
  TFilm(const std::string& name, std::size_t channels, std::size_t num_controls, std::size_t block_size,
        bool identity_init, Rng& rng);

  // h [C, L]; c [nc] or invalid when nc == 0.
  Var<T> operator()(const Var<T>& h, const Var<T>& c, nn::StateList<T>* state) const;
  void collect(nn::ParamRefs<T>& out) { lstm.front().collect(out); }

  std::vector<nn::Lstm<T>> lstm;  // one layer, hidden 2C
  std::size_t block_size = 128;
  std::size_t num_controls = 0;
};

// TFiLM with a narrow recurrent core: pooled activations are projected to
// `rank` features, run through an LSTM of width `rank` and expanded to
// (gamma, beta) by a one-hidden-layer MLP.
template <typename T>
class TTFilm {
 public:
  TTFilm() = default;
  TTFilm(const std::string& name, std::size_t channels, std::size_t num_controls, std::size_t block_size,
         std::size_t rank, std::size_t expand_hidden, bool identity_init, Rng& rng);

  Var<T> operator()(const Var<T>& h, const Var<T>& c, nn::StateList<T>* state) const;
  void collect(nn::ParamRefs<T>& out);

  nn::Linear<T> project;
  std::vector<nn::Lstm<T>> lstm;
  nn::Linear<T> expand_hidden;
  FilmHead<T> head;
  std::size_t block_size = 128;
  std::size_t num_controls = 0;
};

// Recurrent replacement for the FiLM generator: the input signal, average
// pooled per block and joined with the controls, drives an LSTM whose output
// is a latent sequence z [latent, blocks] shared by all network blocks.
template <typename T>
class TVFilmController {
 public:
  TVFilmController() = default;
  TVFilmController(const std::string& name, std::size_t num_controls, std::size_t latent, std::size_t block_size,
                   Rng& rng);

  // x [1, L] -> z [latent, ceil(L / block_size)]
  Var<T> operator()(const Var<T>& x, const Var<T>& c, nn::StateList<T>* state) const;
  void collect(nn::ParamRefs<T>& out) { lstm.front().collect(out); }
  std::size_t latent() const { return lstm.front().hidden_size(); }

  std::vector<nn::Lstm<T>> lstm;
  std::size_t block_size = 128;
  std::size_t num_controls = 0;
};

// Per-block modulation from a shared latent sequence.
template <typename T>
Var<T> tvfilm_modulate(const Var<T>& h, const FilmHead<T>& head, const Var<T>& z, std::size_t block_size);

// Latent sequence held at the sample rate: [latent, L].
template <typename T>
Var<T> tvcond_generate(const TVFilmController<T>& ctrl, const Var<T>& x, const Var<T>& c,
                       nn::StateList<std::type_identity_t<T>>* state);

}  // namespace deffx::cond
