#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "provbind/error.hpp"

namespace provbind::binary {

// Little-endian fixed-width blobs. The host is assumed little-endian; the
// static_assert keeps a big-endian port from silently writing garbage.
static_assert(std::endian::native == std::endian::little, "big-endian hosts need byte swapping");

template <typename T>
void write_blob(std::ostream& out, std::span<const T> values) {
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw IoError("failed writing binary blob");
}

template <typename T>
std::vector<T> read_blob(std::istream& in, std::size_t count) {
  std::vector<T> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T)) throw FormatError("truncated binary blob");
  return values;
}

}  // namespace provbind::binary
