#include "hpo/nn/checkpoint.h"

#include <stdexcept>

namespace hpo::nn {

nlohmann::json TensorToJson(const ad::Tensor& t) {
  return {{"shape", t.shape()}, {"data", t.ToVector()}};
}

ad::Tensor TensorFromJson(const nlohmann::json& j) {
  ad::Shape shape = j.at("shape").get<ad::Shape>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  if (ad::NumElements(shape) != data.size()) {
    throw std::runtime_error("checkpoint tensor: shape " +
                             ad::ShapeToString(shape) + " does not match " +
                             std::to_string(data.size()) + " values");
  }
  return ad::Tensor(std::move(shape), std::move(data));
}

nlohmann::json TensorsToJson(const std::vector<NamedTensor>& tensors) {
  nlohmann::json out = nlohmann::json::array();
  for (const NamedTensor& t : tensors) {
    nlohmann::json entry = TensorToJson(t.value);
    entry["name"] = t.name;
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<NamedTensor> TensorsFromJson(const nlohmann::json& j) {
  std::vector<NamedTensor> out;
  for (const auto& entry : j) {
    out.push_back({entry.at("name").get<std::string>(), TensorFromJson(entry)});
  }
  return out;
}

}  // namespace hpo::nn
