#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cs4l {

// Plain "key = value" lines; '#' starts a comment. Repeated keys accumulate.
//
// Recognized keys: dataset, data_dir, arch, budget, seed, omega, epochs, batch,
// colorizer, out, lr, momentum, weight_decay, width_scale, proxy_classes,
// max_steps, augment. budget and seed also accept comma-separated lists.
using ConfigValues = std::map<std::string, std::vector<std::string>>;

ConfigValues parse_config_text(const std::string& text);
ConfigValues read_config_file(const std::filesystem::path& file);

}  // namespace cs4l
