#pragma once

#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace statelab::cli {

/// Flags of one subcommand that can also come from the config file. A value
/// given on the command line wins over the file, the file over the default.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& key, T& var, const std::string& help) {
    std::string flag = "--" + key;
    for (char& c : flag) c = c == '_' ? '-' : c;
    CLI::Option* opt = app_->add_option(flag, var, help)->capture_default_str();
    entries_.push_back({key, opt, [&var](const nlohmann::json& j) { var = j.get<T>(); },
                        [&var] { return nlohmann::json(var); }});
    return opt;
  }

  CLI::Option* add_flag(const std::string& key, bool& var, const std::string& help);

  /// Applies `file[section]` then top-level `file` keys to options not given
  /// on the command line. Unknown keys are ignored.
  void resolve(const nlohmann::json& file, const std::string& section);

  /// Every registered key with its final value.
  nlohmann::json resolved() const;

  bool given(const std::string& key) const;

 private:
  struct Entry {
    std::string key;
    CLI::Option* option;
    std::function<void(const nlohmann::json&)> set;
    std::function<nlohmann::json()> get;
  };
  CLI::App* app_;
  std::vector<Entry> entries_;
};

/// Parses a JSON config file; throws IoError if unreadable or malformed.
nlohmann::json load_config_file(const std::string& path);

/// Git blob hash (SHA-1 of "blob <size>\0" + content) of a file.
std::string content_hash(const std::string& path);

/// Writes <primary_output>.manifest.json with the command, the resolved
/// config and hashes of all inputs and outputs.
void write_manifest(const std::string& command, const nlohmann::json& config,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs);

/// --threads if given, else STATELAB_THREADS, else 1.
int resolve_threads(int flag_value, bool flag_given);

}  // namespace statelab::cli
