#pragma once

// Declarative model descriptions and their JSON form.

#include <json.hpp>
#include <string>
#include <vector>

#include "deffx/cond/conditioning.hpp"
#include "deffx/control/controllers.hpp"
#include "deffx/dsp/processors.hpp"

namespace deffx::model {

enum class Arch { kLstm, kTcn, kGcn, kGrayBox };

std::string_view arch_name(Arch arch);

// Shared by TCN and GCN backbones.
struct ConvConfig {
  std::size_t blocks = 5;
  std::size_t kernel = 7;
  std::size_t dilation_growth = 4;
  std::size_t channels = 16;
  cond::CondKind cond = cond::CondKind::kNone;
  bool batchnorm = false;
  std::size_t block_size = 128;  // time block of the temporal conditioning
  std::size_t film_hidden = 16;
  std::size_t film_latent = 32;
  std::size_t tt_rank = 8;
  std::size_t tt_hidden = 32;
  std::size_t tv_latent = 32;
};

struct LstmConfig {
  std::size_t hidden = 32;
  cond::CondKind cond = cond::CondKind::kNone;  // none, concat or tvcond
  std::size_t block_size = 128;
  std::size_t tv_latent = 16;
};

struct StageSpec {
  dsp::ProcessorConfig processor;
  control::ControllerConfig controller;
};

struct GrayBoxSpec {
  std::vector<StageSpec> stages;
  std::size_t block_size = 128;  // shared by every dynamic controller
};

struct ModelSpec {
  std::string name = "model";
  Arch arch = Arch::kTcn;
  double sample_rate = 48000.0;
  std::size_t num_controls = 0;
  std::uint64_t seed = 0;  // weight initialization
  ConvConfig conv;
  LstmConfig lstm;
  GrayBoxSpec graybox;
};

// Stage list from the compact chain notation, e.g.
// "PEQ.sc > G.sc > O.dc > MLP > G.sc > PEQ.sc". Processor tags: PI, G, O, LP,
// HP, LS, HS, PK, PEQ, SEQ, FIR, TANH, MLP, RNL. Controller suffixes: .s, .sc,
// .d, .dc; no suffix means a dummy controller.
std::vector<StageSpec> parse_chain(std::string_view chain);
std::string chain_string(const std::vector<StageSpec>& stages);

// Throws ConfigError with a JSON pointer below `pointer` on any invalid field.
ModelSpec parse_model_spec(const nlohmann::json& doc, const std::string& pointer = "");
nlohmann::json to_json(const ModelSpec& spec);

}  // namespace deffx::model
