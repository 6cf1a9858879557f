#ifndef HPO_NN_CHECKPOINT_H_
#define HPO_NN_CHECKPOINT_H_

#include <string>
#include <vector>

#include "hpo/autodiff/tensor.h"
#include "json.hpp"

namespace hpo::nn {

struct NamedTensor {
  std::string name;
  ad::Tensor value;
};

// {"name": ..., "shape": [...], "data": [...]} per tensor, row-major.
nlohmann::json TensorsToJson(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> TensorsFromJson(const nlohmann::json& j);

nlohmann::json TensorToJson(const ad::Tensor& t);
ad::Tensor TensorFromJson(const nlohmann::json& j);

}  // namespace hpo::nn

#endif  // HPO_NN_CHECKPOINT_H_
