#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <variant>

#include "pertasym/spectral.hpp"

namespace pertasym {

// Field files: a JSON header {N, L, layout, kind, data} next to a sidecar
// binary of little-endian float64 values (grid) or interleaved re/im pairs
// (spectral). `data` names the sidecar relative to the header.
void write_field(const SpectralField& field, const std::string& header_path);
void write_field(const GridField& grid, const std::string& header_path);

using AnyField = std::variant<GridField, SpectralField>;
AnyField read_field(const std::string& header_path);
// Reads either kind and returns spectral coefficients.
SpectralField read_spectral(const std::string& header_path);

// Shortest round-trip decimal representation.
std::string fmt_double(double v);

// Creates dir (and parents); throws an I/O error on failure.
void ensure_directory(const std::string& dir);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header);
  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(long long v);
  CsvWriter& operator<<(int v) { return *this << static_cast<long long>(v); }
  void end_row();
  void close();

 private:
  std::ofstream os_;
  std::string path_;
  bool first_ = true;
};

void write_text(const std::string& path, const std::string& text);

}  // namespace pertasym
