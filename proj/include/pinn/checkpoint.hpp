#pragma once

#include <string>

#include "json.hpp"
#include "pinn/network.hpp"

namespace pinn::net {

/// Serialized training snapshot: architecture, flat parameters, iteration
/// counter, and optional optimizer scratch (so a restart continues the exact
/// trajectory).
struct Checkpoint {
  NetworkSpec spec;
  Parameters params;
  long iteration = 0;
  nlohmann::json optimizer;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pinn::net
