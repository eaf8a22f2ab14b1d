#include "deffx/dsp/prefit.hpp"

#include <json.hpp>

#include "deffx/core/error.hpp"
#include "prefit_data.hpp"

namespace deffx::dsp {

const Tensor<double>& Prefit::tensor(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw IoError("prefit data '" + kind + "' has no tensor " + std::string(name));
}

Prefit parse_prefit(std::string_view json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    if (doc.at("format") != "deffx-prefit-v1") throw IoError("unknown prefit format");
    Prefit p;
    p.kind = doc.at("kind").get<std::string>();
    for (const auto& t : doc.at("tensors")) {
      Shape shape = t.at("shape").get<Shape>();
      std::vector<double> data = t.at("data").get<std::vector<double>>();
      if (numel(shape) != data.size()) throw IoError("prefit tensor shape does not match its data");
      p.tensors.push_back({t.at("name").get<std::string>(), Tensor<double>(std::move(shape), std::move(data))});
    }
    p.oracle_x = doc.at("oracle").at("x").get<std::vector<double>>();
    p.oracle_y = doc.at("oracle").at("y").get<std::vector<double>>();
    if (doc.contains("config")) {
      const auto& c = doc.at("config");
      p.hidden = c.at("hidden").get<std::size_t>();
      p.hidden_layers = c.at("hidden_layers").get<std::size_t>();
      p.first_omega = c.at("first_omega").get<double>();
      p.input_scale = c.at("input_scale").get<double>();
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed prefit data: ") + e.what());
  }
}

const Prefit& tanh_prefit(std::string_view kind) {
  static const Prefit rational = parse_prefit(detail::kTanhRationalJson);
  static const Prefit siren = parse_prefit(detail::kTanhSirenJson);
  if (kind == "rational") return rational;
  if (kind == "siren") return siren;
  throw InvalidArgument("unknown prefit kind " + std::string(kind));
}

}  // namespace deffx::dsp
