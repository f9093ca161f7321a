#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace statelab {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ull);

/// Named f64 tensors plus a JSON header. On disk: 8-byte magic, u32 version,
/// u64 header length, header, raw little-endian tensors in header order,
/// then a u64 FNV-1a checksum of everything before it.
struct TensorContainer {
  nlohmann::json header = nlohmann::json::object();
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

  const Eigen::MatrixXd& get(const std::string& name) const;
  void put(std::string name, Eigen::MatrixXd value);
};

void write_container(const std::string& path, const std::string& magic, std::uint32_t version,
                     const TensorContainer& c);
/// Throws IoError on a bad magic, version, truncation or checksum.
TensorContainer read_container(const std::string& path, const std::string& magic, std::uint32_t version);

}  // namespace statelab
