#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gazegan/error.hpp"

namespace gazegan::detail {

inline std::string read_file(const std::filesystem::path& path, ErrorKind missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(missing, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

/// Throws InvalidConfig if `j` has keys outside `allowed`.
template <typename Keys>
void reject_unknown_keys(const nlohmann::json& j, const Keys& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const auto& k : allowed) known = known || it.key() == k;
    if (!known) throw Error(ErrorKind::InvalidConfig, "unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace gazegan::detail
