#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "polyvox/common.hpp"

namespace polyvox {

// Little-endian binary stream helpers shared by cache and checkpoint files.

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : out_(path, std::ios::binary), path_(path.string()) {
    if (!out_) throw IoError("cannot open for write: " + path_);
  }

  void write_raw(const void* data, size_t n) {
    out_.write(static_cast<const char*>(data), std::streamsize(n));
    if (!out_) throw IoError("write failed: " + path_);
  }
  void write_u32(uint32_t v) { write_raw(&v, sizeof v); }
  void write_u64(uint64_t v) { write_raw(&v, sizeof v); }
  void write_i64(int64_t v) { write_raw(&v, sizeof v); }
  void write_f64(double v) { write_raw(&v, sizeof v); }
  void write_string(const std::string& s) {
    write_u64(s.size());
    write_raw(s.data(), s.size());
  }
  void write_matrix(const Matrix& m) {
    write_u64(uint64_t(m.rows()));
    write_u64(uint64_t(m.cols()));
    write_raw(m.data(), sizeof(double) * size_t(m.size()));
  }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path)
      : in_(path, std::ios::binary), path_(path.string()) {
    if (!in_) throw IoError("cannot open for read: " + path_);
  }

  void read_raw(void* data, size_t n) {
    in_.read(static_cast<char*>(data), std::streamsize(n));
    if (!in_) throw ParseError("unexpected end of file: " + path_);
  }
  uint32_t read_u32() { uint32_t v; read_raw(&v, sizeof v); return v; }
  uint64_t read_u64() { uint64_t v; read_raw(&v, sizeof v); return v; }
  int64_t read_i64() { int64_t v; read_raw(&v, sizeof v); return v; }
  double read_f64() { double v; read_raw(&v, sizeof v); return v; }
  std::string read_string() {
    uint64_t n = read_u64();
    if (n > (1ULL << 32)) throw ParseError("string length implausible: " + path_);
    std::string s(n, '\0');
    read_raw(s.data(), n);
    return s;
  }
  Matrix read_matrix() {
    uint64_t r = read_u64(), c = read_u64();
    if (r > (1ULL << 32) || c > (1ULL << 32))
      throw ParseError("matrix dims implausible: " + path_);
    Matrix m{Eigen::Index(r), Eigen::Index(c)};
    read_raw(m.data(), sizeof(double) * size_t(m.size()));
    return m;
  }

 private:
  std::ifstream in_;
  std::string path_;
};

// Writes via a unique temp file in the same directory, then renames into
// place. Rename is atomic on POSIX, so concurrent writers cannot interleave.
void atomic_write_file(const std::filesystem::path& path,
                       const std::function<void(BinaryWriter&)>& fill);

}  // namespace polyvox
