#include "pinn/checkpoint.hpp"

#include <fstream>

namespace pinn::net {

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json j;
  j["layers"] = ck.spec.layers;
  j["activation"] = activation_name(ck.spec.activation);
  j["externals"] = ck.spec.externals;
  j["iteration"] = ck.iteration;
  j["values"] = ck.params.values;
  if (!ck.optimizer.empty()) j["optimizer"] = ck.optimizer;
  std::ofstream out(path);
  if (!out) throw StructuralError("checkpoint: cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("checkpoint: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw StructuralError("checkpoint: '" + path + "' is not valid JSON: " + e.what());
  }
  Checkpoint ck;
  ck.spec.layers = j.at("layers").get<std::vector<int>>();
  ck.spec.activation = activation_from_name(j.at("activation").get<std::string>());
  ck.spec.externals = j.at("externals").get<int>();
  ck.spec.validate();
  ck.iteration = j.at("iteration").get<long>();
  ck.params = Parameters::zeros(ck.spec);
  const auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != ck.params.values.size()) {
    throw StructuralError("checkpoint: parameter count does not match the architecture");
  }
  ck.params.values = values;
  if (j.contains("optimizer")) ck.optimizer = j["optimizer"];
  return ck;
}

}  // namespace pinn::net
