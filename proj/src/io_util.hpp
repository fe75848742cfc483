#pragma once

#include "q3dw/types.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>

namespace q3dw::detail {

// Creates parent directories and opens path for writing at full precision.
inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

inline void check_written(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace q3dw::detail
