#include "elasto/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

namespace elasto::io {

namespace {

constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xffu),
                        static_cast<unsigned char>((v >> 8) & 0xffu),
                        static_cast<unsigned char>((v >> 16) & 0xffu),
                        static_cast<unsigned char>((v >> 24) & 0xffu)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_header(std::ostream& out, const char tag[4], Index rows, Index cols) {
  out.write(tag, 4);
  put_u32(out, static_cast<std::uint32_t>(rows));
  put_u32(out, static_cast<std::uint32_t>(cols));
  put_u32(out, 0);
}

void write_payload(std::ostream& out, const Matrix& grid) {
  std::vector<unsigned char> buf(static_cast<std::size_t>(grid.size()) * 4);
  std::size_t k = 0;
  for (Index i = 0; i < grid.rows(); ++i)
    for (Index j = 0; j < grid.cols(); ++j) {
      double v = grid(i, j);
      if (!std::isfinite(v) || std::fabs(v) > std::numeric_limits<float>::max())
        throw SpecError("write: value not representable as 32-bit float");
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      buf[k++] = static_cast<unsigned char>(bits & 0xffu);
      buf[k++] = static_cast<unsigned char>((bits >> 8) & 0xffu);
      buf[k++] = static_cast<unsigned char>((bits >> 16) & 0xffu);
      buf[k++] = static_cast<unsigned char>((bits >> 24) & 0xffu);
    }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write: stream failure");
}

void write_file(std::ostream& out, const char tag[4],
                std::initializer_list<const Matrix*> payloads) {
  const Matrix& first = **payloads.begin();
  write_header(out, tag, first.rows(), first.cols());
  for (const Matrix* p : payloads) write_payload(out, *p);
  if (!out) throw IoError("write: stream failure");
}

[[noreturn]] void fail_at(const char* what, std::size_t offset) {
  std::ostringstream msg;
  msg << what << " at byte offset " << offset;
  throw FormatError(msg.str());
}

struct Header {
  Index rows = 0;
  Index cols = 0;
};

Header read_header(std::istream& in, const char tag[4]) {
  unsigned char h[kHeaderBytes];
  in.read(reinterpret_cast<char*>(h), kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes))
    fail_at("truncated header", static_cast<std::size_t>(std::max<std::streamsize>(in.gcount(), 0)));
  if (std::memcmp(h, tag, 4) != 0) fail_at("bad magic", 0);
  Header out;
  std::uint32_t rows = get_u32(h + 4);
  std::uint32_t cols = get_u32(h + 8);
  if (rows == 0) fail_at("zero rows", 4);
  if (cols == 0) fail_at("zero cols", 8);
  if (get_u32(h + 12) != 0) fail_at("nonzero reserved field", 12);
  out.rows = static_cast<Index>(rows);
  out.cols = static_cast<Index>(cols);
  return out;
}

Matrix read_payload(std::istream& in, const Header& h, std::size_t base_offset) {
  const std::size_t count = static_cast<std::size_t>(h.rows) * static_cast<std::size_t>(h.cols);
  std::vector<unsigned char> buf(count * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    fail_at("truncated payload",
            base_offset + static_cast<std::size_t>(std::max<std::streamsize>(in.gcount(), 0)));
  Matrix grid(h.rows, h.cols);
  std::size_t k = 0;
  for (Index i = 0; i < h.rows; ++i)
    for (Index j = 0; j < h.cols; ++j) {
      float v = std::bit_cast<float>(get_u32(buf.data() + k));
      if (!std::isfinite(v)) fail_at("non-finite value", base_offset + k);
      grid(i, j) = static_cast<double>(v);
      k += 4;
    }
  return grid;
}

std::filesystem::path meta_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p.replace_extension(".meta");
  return p;
}

template <typename T, typename WriteFn>
void save_file(const std::filesystem::path& path, const T& value, WriteFn fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  fn(value, out);
}

template <typename ReadFn>
auto load_file(const std::filesystem::path& path, ReadFn fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return fn(in);
}

}  // namespace

void write_frame(const RfFrame& frame, std::ostream& out) {
  validate_frame(frame);
  write_file(out, "EFR1", {&frame.samples});
}

RfFrame read_frame(std::istream& in) {
  Header h = read_header(in, "EFR1");
  RfFrame frame;
  frame.samples = read_payload(in, h, kHeaderBytes);
  return frame;
}

void write_displacement(const DisplacementField& field, std::ostream& out) {
  validate_displacement(field);
  write_file(out, "EDF1", {&field.axial, &field.lateral});
}

DisplacementField read_displacement(std::istream& in) {
  Header h = read_header(in, "EDF1");
  DisplacementField f;
  const std::size_t payload = static_cast<std::size_t>(h.rows) * static_cast<std::size_t>(h.cols) * 4;
  f.axial = read_payload(in, h, kHeaderBytes);
  f.lateral = read_payload(in, h, kHeaderBytes + payload);
  return f;
}

void write_strain(const StrainTensorField& field, std::ostream& out) {
  validate_strain(field);
  write_file(out, "ESF1", {&field.syy, &field.sxx});
}

StrainTensorField read_strain(std::istream& in) {
  Header h = read_header(in, "ESF1");
  StrainTensorField f;
  const std::size_t payload = static_cast<std::size_t>(h.rows) * static_cast<std::size_t>(h.cols) * 4;
  f.syy = read_payload(in, h, kHeaderBytes);
  f.sxx = read_payload(in, h, kHeaderBytes + payload);
  return f;
}

void write_epr(const EprField& field, std::ostream& out) {
  validate_grid(field.nu, "EprField.nu");
  write_file(out, "EPF1", {&field.nu});
}

EprField read_epr(std::istream& in, bool validate, double nu_min, double nu_max) {
  Header h = read_header(in, "EPF1");
  EprField f;
  f.nu = read_payload(in, h, kHeaderBytes);
  if (validate) validate_epr(f, nu_min, nu_max);
  return f;
}

void write_meta(const RfFrame& frame, std::ostream& out) {
  out.precision(17);
  out << "axial_spacing_mm = " << frame.axial_spacing_mm << "\n"
      << "lateral_pitch_mm = " << frame.lateral_pitch_mm << "\n"
      << "center_frequency_mhz = " << frame.center_frequency_mhz << "\n"
      << "sampling_frequency_mhz = " << frame.sampling_frequency_mhz << "\n";
  if (!out) throw IoError("write: stream failure");
}

void apply_meta(RfFrame& frame, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("metadata line " + std::to_string(lineno) + ": missing '='");
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    double x = 0;
    try {
      std::size_t pos = 0;
      x = std::stod(val, &pos);
      if (pos != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw FormatError("metadata line " + std::to_string(lineno) + ": bad number '" + val + "'");
    }
    if (key == "axial_spacing_mm") frame.axial_spacing_mm = x;
    else if (key == "lateral_pitch_mm") frame.lateral_pitch_mm = x;
    else if (key == "center_frequency_mhz") frame.center_frequency_mhz = x;
    else if (key == "sampling_frequency_mhz") frame.sampling_frequency_mhz = x;
    else
      throw FormatError("metadata line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
}

void save_frame(const std::filesystem::path& path, const RfFrame& frame) {
  save_file(path, frame, [](const RfFrame& f, std::ostream& o) { write_frame(f, o); });
  std::ofstream meta(meta_path(path));
  if (!meta) throw IoError("cannot open for writing: " + meta_path(path).string());
  write_meta(frame, meta);
}

RfFrame load_frame(const std::filesystem::path& path) {
  RfFrame frame = load_file(path, [](std::istream& i) { return read_frame(i); });
  std::ifstream meta(meta_path(path));
  if (meta) apply_meta(frame, meta);
  return frame;
}

void save_displacement(const std::filesystem::path& path, const DisplacementField& field) {
  save_file(path, field, [](const DisplacementField& f, std::ostream& o) { write_displacement(f, o); });
}

DisplacementField load_displacement(const std::filesystem::path& path) {
  return load_file(path, [](std::istream& i) { return read_displacement(i); });
}

void save_strain(const std::filesystem::path& path, const StrainTensorField& field) {
  save_file(path, field, [](const StrainTensorField& f, std::ostream& o) { write_strain(f, o); });
}

StrainTensorField load_strain(const std::filesystem::path& path) {
  return load_file(path, [](std::istream& i) { return read_strain(i); });
}

void save_epr(const std::filesystem::path& path, const EprField& field) {
  save_file(path, field, [](const EprField& f, std::ostream& o) { write_epr(f, o); });
}

EprField load_epr(const std::filesystem::path& path) {
  return load_file(path, [](std::istream& i) { return read_epr(i); });
}

}  // namespace elasto::io
