#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "camda/netzoo/network.hpp"

namespace camda::cyclegan {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checkpoint directory holds manifest.txt (text: architecture, tensor
/// names, shapes, byte offsets, endianness) and params.bin (little-endian
/// float32 arrays). It is written to a temporary sibling and renamed into
/// place.
struct NamedNetwork {
  std::string name;
  netzoo::Network<float>* network;
};

void save_checkpoint(const std::filesystem::path& dir, const std::vector<NamedNetwork>& networks,
                     const std::map<std::string, std::string>& metadata = {});

/// Rebuilds one network (architecture from the manifest) and restores its state.
netzoo::Network<float> load_network(const std::filesystem::path& dir, const std::string& name);

std::vector<std::string> checkpoint_networks(const std::filesystem::path& dir);
std::map<std::string, std::string> checkpoint_metadata(const std::filesystem::path& dir);

}  // namespace camda::cyclegan
