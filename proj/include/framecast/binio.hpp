#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>

#include "framecast/tensor.hpp"

namespace fc {

// Little-endian primitives, assembled byte by byte so files are identical on
// any host.
void write_u32le(std::ostream& os, std::uint32_t v);
void write_u64le(std::ostream& os, std::uint64_t v);
void write_f64le(std::ostream& os, double v);
std::uint32_t read_u32le(std::istream& is);
std::uint64_t read_u64le(std::istream& is);
double read_f64le(std::istream& is);

void write_bytes(std::ostream& os, const void* p, std::size_t n);
void read_bytes(std::istream& is, void* p, std::size_t n);

/// (rows, cols, raw f64 payload).
void write_tensor(std::ostream& os, const Tensor2& t);
Tensor2 read_tensor(std::istream& is);

/// Writes via "<path>.tmp" and renames on success, so failures never leave a
/// partial file at the destination.
void atomic_write_file(const std::string& path, const std::function<void(std::ostream&)>& writer);

} // namespace fc
