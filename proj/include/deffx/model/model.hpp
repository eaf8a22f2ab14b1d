#pragma once

// Black-box backbones (LSTM, TCN, GCN) and gray-box processor chains behind a
// common forward interface.

#include <memory>

#include "deffx/model/spec.hpp"

namespace deffx::model {

// One entry per recurrent component, in a fixed order per model.
template <typename T>
using ModelState = std::vector<nn::StateList<T>>;

// 1 + (kernel - 1) * sum_{i < blocks} growth^i.
std::size_t receptive_field(std::size_t blocks, std::size_t kernel, std::size_t growth);

template <typename T>
class Model {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {}
  virtual ~Model() = default;

  const ModelSpec& spec() const { return spec_; }

  // x [1, L]; c [num_controls] on the same tape, or an invalid Var when the
  // model takes no controls. With `state` non-null recurrent components start
  // from it and leave their final detached state in it. `training` selects
  // batch statistics in batchnorm layers.
  virtual Var<T> forward(const Var<T>& x, const Var<T>& c, ModelState<T>* state, bool training) = 0;
  Var<T> forward(const Var<T>& x, const Var<T>& c) { return forward(x, c, nullptr, false); }

  virtual void collect(nn::ParamRefs<T>& out) = 0;
  // Non-trainable tensors that are part of the model state (batchnorm stats).
  virtual void collect_buffers(nn::ParamRefs<T>&) {}
  virtual bool recurrent() const = 0;
  // Samples of past input that influence one output sample; 0 if unbounded.
  virtual std::size_t receptive_field() const { return 0; }

  std::size_t param_count();
  nn::ParamRefs<T> parameters();

 private:
  ModelSpec spec_;
};

// Per-stage record of a gray-box forward pass.
template <typename T>
struct StageTrace {
  std::string processor;
  std::string controller;
  dsp::Controls<T> controls;  // normalized values; invalid Var for dummy
  Var<T> output;
};

template <typename T>
class GrayBoxModel : public Model<T> {
 public:
  explicit GrayBoxModel(ModelSpec spec);

  Var<T> forward(const Var<T>& x, const Var<T>& c, ModelState<T>* state, bool training) override;
  // forward() that also records every stage.
  Var<T> forward_traced(const Var<T>& x, const Var<T>& c, ModelState<T>* state, std::vector<StageTrace<T>>* trace);
  void collect(nn::ParamRefs<T>& out) override;
  bool recurrent() const override;

  std::size_t num_stages() const { return processors_.size(); }
  dsp::Processor<T>& processor(std::size_t i) { return *processors_.at(i); }
  const dsp::Processor<T>& processor(std::size_t i) const { return *processors_.at(i); }
  control::Controller<T>& controller(std::size_t i) { return controllers_.at(i); }
  // Total number of controlled parameters over all stages.
  std::size_t num_controlled_params() const;

  // Sets a static controller so that it outputs the given physical values.
  void set_static_physical(std::size_t stage, const std::vector<double>& physical);

 private:
  std::vector<std::unique_ptr<dsp::Processor<T>>> processors_;
  std::vector<control::Controller<T>> controllers_;
};

// Builds the model, initializing weights from spec.seed.
template <typename T>
std::unique_ptr<Model<T>> build_model(const ModelSpec& spec);

}  // namespace deffx::model
