#include "statelab/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "statelab/error.hpp"

namespace statelab {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

const Eigen::MatrixXd& TensorContainer::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw IoError("container: missing tensor '" + name + "'");
}

void TensorContainer::put(std::string name, Eigen::MatrixXd value) {
  tensors.emplace_back(std::move(name), std::move(value));
}

namespace {

void append(std::string& buf, const void* data, std::size_t size) {
  buf.append(static_cast<const char*>(data), size);
}

}  // namespace

void write_container(const std::string& path, const std::string& magic, std::uint32_t version,
                     const TensorContainer& c) {
  if (magic.size() != 8) throw ValidationError("container magic must be 8 bytes");
  nlohmann::json header = c.header;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : c.tensors) header["tensors"].push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  const std::string text = header.dump();
  std::string buf = magic;
  append(buf, &version, sizeof version);
  const std::uint64_t len = text.size();
  append(buf, &len, sizeof len);
  buf += text;
  for (const auto& [name, t] : c.tensors) append(buf, t.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
  const std::uint64_t sum = fnv1a(buf.data(), buf.size());
  append(buf, &sum, sizeof sum);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

TensorContainer read_container(const std::string& path, const std::string& magic, std::uint32_t version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  const std::size_t fixed = 8 + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (buf.size() < fixed + sizeof(std::uint64_t) || buf.compare(0, 8, magic) != 0) {
    throw IoError("'" + path + "' is not a " + magic.substr(0, magic.find('\0')) + " file");
  }
  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - sizeof stored, sizeof stored);
  if (fnv1a(buf.data(), buf.size() - sizeof stored) != stored) throw IoError("'" + path + "': checksum mismatch");
  std::uint32_t v = 0;
  std::memcpy(&v, buf.data() + 8, sizeof v);
  if (v != version) {
    throw IoError("'" + path + "': format version " + std::to_string(v) + ", expected " + std::to_string(version));
  }
  std::uint64_t len = 0;
  std::memcpy(&len, buf.data() + 12, sizeof len);
  if (fixed + len > buf.size()) throw IoError("'" + path + "': truncated header");
  TensorContainer c;
  try {
    c.header = nlohmann::json::parse(buf.substr(fixed, len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': malformed header: " + e.what());
  }
  std::size_t pos = fixed + len;
  for (const auto& t : c.header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    Eigen::MatrixXd m(rows, cols);
    const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(rows * cols);
    if (pos + bytes + sizeof(std::uint64_t) > buf.size()) throw IoError("'" + path + "': truncated tensor data");
    std::memcpy(m.data(), buf.data() + pos, bytes);
    pos += bytes;
    c.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
  }
  c.header.erase("tensors");
  return c;
}

}  // namespace statelab
