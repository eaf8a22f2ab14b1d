#pragma once

// Binary checkpoint: "DFXC", u32 version, then length-prefixed sections (spec
// JSON, extra JSON, tensor groups) and a trailing FNV-1a 64 checksum of all
// preceding bytes. Integers are little-endian; tensor data is IEEE float64
// regardless of the training precision, so float32 values round-trip exactly.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "deffx/model/model.hpp"

namespace deffx::model {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct Checkpoint {
  std::string spec_json;
  std::string extra_json = "{}";  // training-loop state
  std::uint64_t step = 0;
  std::vector<NamedTensor> model;      // parameters then buffers
  std::vector<NamedTensor> optimizer;  // e.g. Adam moments
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws IoError on unreadable, truncated or corrupt files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
NamedTensor to_named(const Parameter<T>& p);
template <typename T>
std::vector<NamedTensor> snapshot(Model<T>& model);
// Copies tensors into the model by name. Throws InvalidArgument when the
// checkpoint was written for a different spec or a tensor is missing or has
// the wrong shape.
template <typename T>
void restore(Model<T>& model, const Checkpoint& ckpt);
template <typename T>
void assign(Parameter<T>& p, const NamedTensor& t);

}  // namespace deffx::model
