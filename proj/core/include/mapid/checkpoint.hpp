#pragma once

#include <cstdint>
#include <string>

#include "mapid/netcore.hpp"

namespace mapid {

struct Checkpoint {
  int format_version = 1;
  NetworkConfig config;
  std::uint64_t seed = 0;
  NetworkParams params;
};

// JSON round trip is bit-exact on every weight.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mapid
