#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "paramnet/errors.hpp"

namespace paramnet::test {

// Runs `f` and reports the ErrorKind it threw, or nullopt-like sentinel -1.
template <class F>
int thrown_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return static_cast<int>(e.kind());
  }
  return -1;
}

inline int kind(ErrorKind k) { return static_cast<int>(k); }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("paramnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace paramnet::test

#define CHECK_THROWS_KIND(expr, k) \
  CHECK(::paramnet::test::thrown_kind([&] { (void)(expr); }) == ::paramnet::test::kind(k))
