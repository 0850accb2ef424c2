#include "cs4l/config_file.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <string_view>

#include "cs4l/errors.hpp"

namespace cs4l {

namespace {

constexpr std::array<std::string_view, 17> kKeys{
    "dataset", "data_dir", "arch",        "budget",        "seed",      "omega",
    "epochs",  "batch",    "colorizer",   "out",           "lr",        "momentum",
    "weight_decay", "width_scale", "proxy_classes", "max_steps", "augment"};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace

ConfigValues parse_config_text(const std::string& text) {
  ConfigValues values;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (key == "budget" || key == "seed") {
      std::istringstream items(value);
      std::string item;
      while (std::getline(items, item, ','))
        if (auto v = trim(item); !v.empty()) values[key].push_back(v);
    } else {
      values[key].push_back(value);
    }
  }
  return values;
}

ConfigValues read_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace cs4l
