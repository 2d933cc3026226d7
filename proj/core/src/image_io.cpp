#include "gir/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gir {

namespace io {

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

namespace {

void write_f64(std::ostream& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void girt_write(std::ostream& out, const Tensor& t) {
  out.write("GIRT", 4);
  write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t i = 0; i < t.rank(); ++i)
    write_u32(out, static_cast<std::uint32_t>(t.dim(i)));
  for (std::size_t i = 0; i < t.size(); ++i) write_f64(out, t[i]);
}

Tensor girt_read(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "GIRT")
    throw std::runtime_error("girt: bad magic");
  const std::uint32_t rank = read_u32(in);
  if (rank > 8) throw std::runtime_error("girt: implausible rank");
  Shape shape(rank);
  for (auto& d : shape) d = read_u32(in);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = read_f64(in);
  if (!in) throw std::runtime_error("girt: truncated tensor");
  return t;
}

}  // namespace io

void write_girt(const Tensor& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("girt: cannot write " + path);
  io::girt_write(out, t);
  if (!out) throw std::runtime_error("girt: write failed for " + path);
}

Tensor read_girt(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("girt: cannot open " + path);
  return io::girt_read(in);
}

namespace {

// PNM header token, skipping whitespace and '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.get()) != EOF && !std::isspace(c))
        tok.push_back(static_cast<char>(c));
      return tok;
    }
  }
  throw std::runtime_error("pnm: truncated header");
}

Tensor read_pnm(std::istream& in, const std::string& path) {
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P6")
    throw std::runtime_error("pnm: unsupported magic '" + magic + "' in " +
                             path);
  const std::size_t channels = magic == "P5" ? 1 : 3;
  const std::size_t w = std::stoul(pnm_token(in));
  const std::size_t h = std::stoul(pnm_token(in));
  const unsigned long maxval = std::stoul(pnm_token(in));
  if (maxval == 0 || maxval > 65535)
    throw std::runtime_error("pnm: unsupported maxval " +
                             std::to_string(maxval) + " in " + path);
  const bool wide = maxval > 255;
  const std::size_t count = channels * h * w;
  std::vector<unsigned char> raw(count * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("pnm: truncated pixel data in " + path);

  Tensor t({channels, h, w});
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t c = 0; c < channels; ++c) {
      // interleaved samples, 16-bit is big-endian per the format
      const std::size_t s = p * channels + c;
      unsigned v = wide ? (static_cast<unsigned>(raw[2 * s]) << 8) | raw[2 * s + 1]
                        : raw[s];
      t[c * h * w + p] = static_cast<double>(v) * scale;
    }
  return t;
}

void write_pnm(const Tensor& t, const std::string& path, std::size_t channels,
               int bits) {
  if (bits != 8 && bits != 16)
    throw std::runtime_error("pnm: bit depth must be 8 or 16");
  std::size_t h, w;
  const double* data;
  Tensor flat;
  if (t.rank() == 2) {
    if (channels != 1) throw std::runtime_error("pnm: [H,W] tensor needs .pgm");
    h = t.dim(0);
    w = t.dim(1);
    data = t.data().data();
  } else if (t.rank() == 3 && t.dim(0) >= channels) {
    h = t.dim(1);
    w = t.dim(2);
    data = t.data().data();
  } else {
    throw std::runtime_error("pnm: cannot write tensor " +
                             shape_str(t.shape()) + " with " +
                             std::to_string(channels) + " channel(s)");
  }
  const unsigned maxval = bits == 8 ? 255u : 65535u;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pnm: cannot write " + path);
  out << (channels == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n"
      << maxval << "\n";
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = std::clamp(data[c * h * w + p], 0.0, 1.0);
      const unsigned q =
          static_cast<unsigned>(std::lround(v * static_cast<double>(maxval)));
      if (bits == 16) out.put(static_cast<char>((q >> 8) & 0xff));
      out.put(static_cast<char>(q & 0xff));
    }
  if (!out) throw std::runtime_error("pnm: write failed for " + path);
}

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

Tensor read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_image: cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  in.seekg(0);
  if (std::string(magic, 4) == "GIRT") return io::girt_read(in);
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'))
    return read_pnm(in, path);
  throw std::runtime_error("read_image: unrecognized format in " + path);
}

void write_image(const Tensor& t, const std::string& path, int bits) {
  if (has_suffix(path, ".pgm"))
    write_pnm(t, path, 1, bits);
  else if (has_suffix(path, ".ppm"))
    write_pnm(t, path, 3, bits);
  else
    write_girt(t, path);
}

}  // namespace gir
