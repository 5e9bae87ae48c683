#pragma once

#include "splatprune/error.hpp"

namespace splatprune {

template <typename T>
std::vector<T> filter_rows(const std::vector<T>& values, const KeepMask& keep,
                           std::size_t width) {
  if (values.size() != keep.size() * width) {
    fail(ErrorKind::InvalidParameter, "mask length does not match array length");
  }
  std::vector<T> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    out.insert(out.end(), values.begin() + static_cast<std::ptrdiff_t>(i * width),
               values.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
  }
  return out;
}

}  // namespace splatprune
