#pragma once

#include <cstdio>
#include <vector>

#include "martnet/common.hpp"

namespace martnet::detail {

// Raw little-endian binary I/O for the checkpoint and ensemble cache files.

template <class T>
void put(std::FILE* f, const T& x) {
  std::fwrite(&x, sizeof(T), 1, f);
}

template <class T>
T get(std::FILE* f) {
  T x{};
  require(std::fread(&x, sizeof(T), 1, f) == 1, "binary file: truncated");
  return x;
}

inline void put_doubles(std::FILE* f, const std::vector<double>& v) {
  std::fwrite(v.data(), sizeof(double), v.size(), f);
}

inline void get_doubles(std::FILE* f, std::vector<double>& v) {
  require(std::fread(v.data(), sizeof(double), v.size(), f) == v.size(),
          "binary file: truncated");
}

template <class T>
void put_vec(std::FILE* f, const std::vector<T>& v) {
  const uint64_t n = v.size();
  std::fwrite(&n, sizeof(n), 1, f);
  std::fwrite(v.data(), sizeof(T), v.size(), f);
}

template <class T>
void get_vec(std::FILE* f, std::vector<T>& v) {
  uint64_t n = 0;
  require(std::fread(&n, sizeof(n), 1, f) == 1, "binary file: truncated");
  v.resize(size_t(n));
  require(std::fread(v.data(), sizeof(T), v.size(), f) == v.size(),
          "binary file: truncated");
}

}  // namespace martnet::detail
