#pragma once

#include <map>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "model.hpp"

namespace ratnmt::model {

// Checkpoint: text manifest (meta JSON + per-parameter name/shape/offset)
// followed by a blob of row-major little-endian float32 values.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, autodiff::Tensor<float>>> params;

  const autodiff::Tensor<float>* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path,
                     const std::vector<autodiff::Parameter<float>*>& params,
                     const std::map<std::string, std::string>& meta,
                     const std::string& header);

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into the model parameters by name. Parameters
// whose name starts with "rat_proj" may be absent (warm start from a baseline
// checkpoint); anything else missing or shape-mismatched is an error.
void apply_checkpoint(const Checkpoint& ckpt, TransformerModel<float>& m);

std::map<std::string, std::string> config_to_meta(const TransformerConfig& cfg);
TransformerConfig config_from_meta(const std::map<std::string, std::string>& meta);

}  // namespace ratnmt::model
