#include "pertasym/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <json.hpp>
#include <vector>

#include "pertasym/error.hpp"

namespace pertasym {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_le(std::vector<char>& buf, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

std::string sidecar_name(const std::string& header_path) {
  fs::path p(header_path);
  return p.stem().string() + ".bin";
}

void write_pair(const std::string& header_path, const TorusGeometry& g, const char* kind,
                const std::vector<char>& bytes) {
  const std::string bin = sidecar_name(header_path);
  const fs::path bin_path = fs::path(header_path).parent_path() / bin;
  {
    std::ofstream os(bin_path, std::ios::binary);
    if (!os) fail(ErrorKind::Io, "cannot open " + bin_path.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) fail(ErrorKind::Io, "failed writing " + bin_path.string());
  }
  json h;
  h["N"] = g.N;
  h["L"] = g.L;
  h["layout"] = "row-major";
  h["kind"] = kind;
  h["data"] = bin;
  write_text(header_path, h.dump(2) + "\n");
}

}  // namespace

void write_field(const SpectralField& field, const std::string& header_path) {
  std::vector<char> bytes;
  bytes.reserve(field.size() * 16);
  for (std::size_t i = 0; i < field.size(); ++i) {
    put_le(bytes, field.re()[i]);
    put_le(bytes, field.im()[i]);
  }
  write_pair(header_path, field.geometry(), "spectral", bytes);
}

void write_field(const GridField& grid, const std::string& header_path) {
  std::vector<char> bytes;
  bytes.reserve(grid.values.size() * 8);
  for (double v : grid.values) put_le(bytes, v);
  write_pair(header_path, grid.geometry, "grid", bytes);
}

AnyField read_field(const std::string& header_path) {
  std::ifstream is(header_path);
  if (!is) fail(ErrorKind::Io, "cannot open field header " + header_path);
  json h;
  try {
    is >> h;
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, "malformed field header " + header_path + ": " + e.what());
  }
  TorusGeometry g;
  std::string kind, layout, data;
  try {
    g.N = h.at("N").get<int>();
    g.L = h.at("L").get<double>();
    kind = h.at("kind").get<std::string>();
    layout = h.at("layout").get<std::string>();
    data = h.value("data", sidecar_name(header_path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, "field header " + header_path + " missing keys: " + e.what());
  }
  try {
    g.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Io, "field header " + header_path + ": " + e.what());
  }
  if (layout != "row-major") fail(ErrorKind::Io, "unsupported layout " + layout);
  if (kind != "grid" && kind != "spectral") fail(ErrorKind::Io, "unknown field kind " + kind);
  const fs::path bin = fs::path(header_path).parent_path() / data;
  std::ifstream bs(bin, std::ios::binary);
  if (!bs) fail(ErrorKind::Io, "cannot open field data " + bin.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bs)), std::istreambuf_iterator<char>());
  const std::size_t per = kind == "grid" ? 8 : 16;
  if (bytes.size() != g.size() * per)
    fail(ErrorKind::Io, "field data " + bin.string() + " has wrong size");
  if (kind == "grid") {
    GridField grid{g, std::vector<double>(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) grid.values[i] = get_le(bytes.data() + 8 * i);
    return grid;
  }
  SpectralField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    f.re()[i] = get_le(bytes.data() + 16 * i);
    f.im()[i] = get_le(bytes.data() + 16 * i + 8);
  }
  return f;
}

SpectralField read_spectral(const std::string& header_path) {
  AnyField f = read_field(header_path);
  if (auto* s = std::get_if<SpectralField>(&f)) return std::move(*s);
  try {
    return forward_transform(std::get<GridField>(f));
  } catch (const Error& e) {
    fail(ErrorKind::Io, header_path + ": " + e.what());
  }
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorKind::Io, "cannot create directory " + dir);
}

CsvWriter::CsvWriter(const std::string& path, const std::string& header)
    : os_(path, std::ios::binary), path_(path) {
  if (!os_) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  os_ << header << '\n';
}

CsvWriter& CsvWriter::operator<<(double v) {
  if (!first_) os_ << ',';
  os_ << fmt_double(v);
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::operator<<(long long v) {
  if (!first_) os_ << ',';
  os_ << v;
  first_ = false;
  return *this;
}

void CsvWriter::end_row() {
  os_ << '\n';
  first_ = true;
}

void CsvWriter::close() {
  os_.close();
  if (!os_) fail(ErrorKind::Io, "failed writing " + path_);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  os << text;
  if (!os) fail(ErrorKind::Io, "failed writing " + path);
}

}  // namespace pertasym
