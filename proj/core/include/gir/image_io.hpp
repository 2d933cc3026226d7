#pragma once

#include <iosfwd>
#include <string>

#include "gir/tensor.hpp"

namespace gir {

namespace io {

void write_u32(std::ostream& out, std::uint32_t v);  // little-endian
std::uint32_t read_u32(std::istream& in);

// GIRT: ASCII magic "GIRT", u32 rank, u32 dims[rank], f64 data row-major,
// all little-endian.
void girt_write(std::ostream& out, const Tensor& t);
Tensor girt_read(std::istream& in);

}  // namespace io

void write_girt(const Tensor& t, const std::string& path);
Tensor read_girt(const std::string& path);

/// Reads PGM (P5) as [1,H,W], PPM (P6) as [3,H,W], or GIRT as stored.
/// 8-bit and 16-bit (big-endian) samples supported; values scale to [0,1].
Tensor read_image(const std::string& path);

/// Writes by extension: .pgm (first channel or [H,W]), .ppm ([3,H,W]),
/// anything else as GIRT. PNM output quantizes to the given bit depth.
void write_image(const Tensor& t, const std::string& path, int bits = 8);

}  // namespace gir
