#include "run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "statelab/analysis.hpp"
#include "statelab/error.hpp"

namespace statelab::cli {

CLI::Option* OptionSet::add_flag(const std::string& key, bool& var, const std::string& help) {
  std::string flag = "--" + key;
  for (char& c : flag) c = c == '_' ? '-' : c;
  CLI::Option* opt = app_->add_flag(flag, var, help);
  entries_.push_back({key, opt, [&var](const nlohmann::json& j) { var = j.get<bool>(); },
                      [&var] { return nlohmann::json(var); }});
  return opt;
}

void OptionSet::resolve(const nlohmann::json& file, const std::string& section) {
  if (!file.is_object()) return;
  const nlohmann::json empty = nlohmann::json::object();
  const nlohmann::json& sec = file.contains(section) && file[section].is_object() ? file[section] : empty;
  for (auto& e : entries_) {
    if (e.option->count() > 0) continue;
    const nlohmann::json* v = nullptr;
    if (sec.contains(e.key)) {
      v = &sec[e.key];
    } else if (file.contains(e.key)) {
      v = &file[e.key];
    }
    if (v == nullptr) continue;
    try {
      e.set(*v);
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError("config key '" + e.key + "': " + ex.what());
    }
  }
}

nlohmann::json OptionSet::resolved() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& e : entries_) j[e.key] = e.get();
  return j;
}

bool OptionSet::given(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return e.option->count() > 0;
  }
  return false;
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed config " + path + ": " + e.what());
  }
}

std::string content_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string header = "blob " + std::to_string(body.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, body.data(), body.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw IoError("hashing failed for " + path);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

void write_manifest(const std::string& command, const nlohmann::json& config,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  nlohmann::json m;
  m["command"] = command;
  m["version"] = STATELAB_VERSION;
  m["config"] = config;
  m["inputs"] = nlohmann::json::array();
  for (const auto& p : inputs) m["inputs"].push_back({{"path", p}, {"hash", content_hash(p)}});
  m["outputs"] = nlohmann::json::array();
  for (const auto& p : outputs) m["outputs"].push_back({{"path", p}, {"hash", content_hash(p)}});
  write_text(outputs.front() + ".manifest.json", m.dump(2) + "\n");
}

int resolve_threads(int flag_value, bool flag_given) {
  int n = 1;
  if (flag_given) {
    n = flag_value;
  } else if (const char* env = std::getenv("STATELAB_THREADS"); env != nullptr && *env != '\0') {
    try {
      n = std::stoi(env);
    } catch (const std::exception&) {
      throw ValidationError(std::string("STATELAB_THREADS is not an integer: ") + env);
    }
  }
  if (n < 1) throw ValidationError("thread count must be >= 1");
  return n;
}

}  // namespace statelab::cli
