#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "oddm/common.hpp"
#include "oddm/modem.hpp"

namespace oddm {

// Flat binary tensor layout for test fixtures:
//   bytes 0-3   magic "ODDM"
//   bytes 4-7   uint32 LE: number of dimensions
//   then        uint64 LE per dimension
//   then        complex64 LE payload (float32 re, float32 im), column-major
namespace io {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline void write_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  static_assert(sizeof(bits) == sizeof(f));
  std::memcpy(&bits, &f, 4);
  write_u32(out, bits);
}

inline float read_f32(std::istream& in) {
  std::uint32_t bits = read_u32(in);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace io

inline void write_tensor(std::ostream& out, const std::vector<std::uint64_t>& dims,
                         const cplx* data, std::size_t count) {
  out.write("ODDM", 4);
  io::write_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) io::write_u64(out, d);
  for (std::size_t i = 0; i < count; ++i) {
    io::write_f32(out, static_cast<float>(data[i].real()));
    io::write_f32(out, static_cast<float>(data[i].imag()));
  }
}

inline std::vector<cplx> read_tensor(std::istream& in, std::vector<std::uint64_t>& dims) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "ODDM")
    throw std::runtime_error("bad tensor magic");
  std::uint32_t nd = io::read_u32(in);
  dims.resize(nd);
  std::size_t count = nd == 0 ? 0 : 1;
  for (auto& d : dims) {
    d = io::read_u64(in);
    count *= static_cast<std::size_t>(d);
  }
  std::vector<cplx> data(count);
  for (auto& v : data) {
    float re = io::read_f32(in);
    float im = io::read_f32(in);
    v = cplx(re, im);
  }
  if (!in) throw std::runtime_error("truncated tensor payload");
  return data;
}

/// Writes the per-antenna frames as an M x N x N_t tensor.
inline void save_frames(const std::string& path, const FrameSet& fs) {
  std::ofstream out(path, std::ios::binary);
  std::vector<cplx> buf;
  buf.reserve(std::size_t(fs.slots) * fs.subcarriers * fs.antennas());
  for (const auto& f : fs.frames)
    buf.insert(buf.end(), f.data(), f.data() + f.size());
  write_tensor(out, {std::uint64_t(fs.slots), std::uint64_t(fs.subcarriers),
                     std::uint64_t(fs.antennas())},
               buf.data(), buf.size());
}

inline FrameSet load_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::uint64_t> dims;
  auto data = read_tensor(in, dims);
  if (dims.size() != 3) throw std::runtime_error("frame tensor must be rank 3");
  FrameSet fs{static_cast<int>(dims[0]), static_cast<int>(dims[1]), {}};
  std::size_t per = std::size_t(dims[0]) * dims[1];
  for (std::uint64_t a = 0; a < dims[2]; ++a) {
    Mat f(fs.slots, fs.subcarriers);
    std::copy(data.begin() + a * per, data.begin() + (a + 1) * per, f.data());
    fs.frames.push_back(std::move(f));
  }
  return fs;
}

}  // namespace oddm
