#include "rm4d/map_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace rm4d {
namespace {

constexpr std::uint16_t kFormatVersion = 1;
constexpr char kMagicReach[4] = {'R', 'M', '4', 'D'};
constexpr char kMagicCapability[4] = {'C', 'A', 'P', 'M'};

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

// Accumulates the checksum while writing/reading so the bit payload never
// needs a second pass.
class CrcStream {
 public:
  explicit CrcStream(std::ostream* out) : out_(out) {}
  explicit CrcStream(std::istream* in) : in_(in) {}

  void write(const void* data, std::size_t n) {
    out_->write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    accumulate(data, n);
  }

  void read(void* data, std::size_t n) {
    in_->read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_->gcount()) != n) {
      throw MapIoError("truncated map file");
    }
    accumulate(data, n);
  }

  template <typename T>
  void write_le(T value) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
    }
    write(buf, sizeof(T));
  }

  template <typename T>
  T read_le() {
    unsigned char buf[sizeof(T)];
    read(buf, sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
  }

  void write_f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_le<std::uint64_t>(bits);
  }

  double read_f64() {
    const std::uint64_t bits = read_le<std::uint64_t>();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::uint32_t crc() const { return crc_ ^ 0xFFFFFFFFu; }

 private:
  void accumulate(const void* data, std::size_t n) {
    static const auto table = make_crc_table();
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) crc_ = table[(crc_ ^ p[i]) & 0xFF] ^ (crc_ >> 8);
  }

  std::ostream* out_ = nullptr;
  std::istream* in_ = nullptr;
  std::uint32_t crc_ = 0xFFFFFFFFu;
};

void write_raw_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_raw_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4) throw MapIoError("truncated map file (missing checksum)");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

void write_bits(CrcStream& s, const BitArray& bits) {
  const std::uint64_t n_bytes = (bits.size() + 7) / 8;
  std::vector<unsigned char> buf;
  buf.reserve(n_bytes);
  const auto words = bits.words();
  for (std::uint64_t b = 0; b < n_bytes; ++b) {
    buf.push_back(static_cast<unsigned char>((words[b >> 3] >> ((b & 7) * 8)) & 0xFF));
  }
  s.write(buf.data(), buf.size());
}

void read_bits(CrcStream& s, BitArray& bits) {
  const std::uint64_t n_bytes = (bits.size() + 7) / 8;
  std::vector<unsigned char> buf(n_bytes);
  s.read(buf.data(), buf.size());
  auto words = bits.words();
  for (std::uint64_t b = 0; b < n_bytes; ++b) {
    words[b >> 3] |= static_cast<std::uint64_t>(buf[b]) << ((b & 7) * 8);
  }
}

void write_header_common(CrcStream& s, const std::string& name, double r_xy, double r_z,
                         double l_c, double delta_theta, std::uint32_t n_z, std::uint32_t n_theta,
                         std::uint32_t n_xy) {
  s.write_le<std::uint16_t>(kFormatVersion);
  s.write_le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
  s.write(name.data(), name.size());
  s.write_f64(r_xy);
  s.write_f64(r_z);
  s.write_f64(l_c);
  s.write_f64(delta_theta);
  s.write_le<std::uint32_t>(n_z);
  s.write_le<std::uint32_t>(n_theta);
  s.write_le<std::uint32_t>(n_xy);
}

struct CommonHeader {
  std::string name;
  double r_xy, r_z, l_c, delta_theta;
  std::uint32_t n_z, n_theta, n_xy;
};

CommonHeader read_header_common(CrcStream& s) {
  const auto version = s.read_le<std::uint16_t>();
  if (version != kFormatVersion) {
    throw MapIoError("unsupported map format version " + std::to_string(version));
  }
  CommonHeader h;
  const auto name_len = s.read_le<std::uint32_t>();
  if (name_len > (1u << 20)) throw MapIoError("implausible robot name length");
  h.name.resize(name_len);
  if (name_len > 0) s.read(h.name.data(), name_len);
  h.r_xy = s.read_f64();
  h.r_z = s.read_f64();
  h.l_c = s.read_f64();
  h.delta_theta = s.read_f64();
  h.n_z = s.read_le<std::uint32_t>();
  h.n_theta = s.read_le<std::uint32_t>();
  h.n_xy = s.read_le<std::uint32_t>();
  return h;
}

char peek_magic(std::istream& in, char out_magic[4]) {
  in.read(out_magic, 4);
  if (in.gcount() != 4) throw MapIoError("truncated map file (missing magic)");
  return out_magic[0];
}

}  // namespace

std::uint32_t crc32(std::span<const unsigned char> data, std::uint32_t seed) {
  static const auto table = make_crc_table();
  std::uint32_t crc = seed ^ 0xFFFFFFFFu;
  for (unsigned char byte : data) crc = table[(crc ^ byte) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

void save_map(const ReachGrid4D& grid, std::ostream& out) {
  out.write(kMagicReach, 4);
  CrcStream s(&out);
  const auto& p = grid.params();
  write_header_common(s, grid.robot_name, p.r_xy, p.r_z, p.l_c, p.delta_theta,
                      static_cast<std::uint32_t>(grid.n_z()),
                      static_cast<std::uint32_t>(grid.n_theta()),
                      static_cast<std::uint32_t>(grid.n_xy()));
  s.write_le<std::uint64_t>(grid.sample_count);
  write_bits(s, grid.bits());
  write_raw_u32(out, s.crc());
  if (!out) throw MapIoError("write failure while saving map");
}

void save_map(const CapabilityGrid& grid, std::ostream& out) {
  out.write(kMagicCapability, 4);
  CrcStream s(&out);
  const auto& p = grid.params();
  write_header_common(s, grid.robot_name, p.r_xy, p.r_z, p.l_c, /*delta_theta=*/0.0,
                      static_cast<std::uint32_t>(p.n_z()), /*n_theta=*/1,
                      static_cast<std::uint32_t>(p.n_xy()));
  s.write_le<std::uint32_t>(static_cast<std::uint32_t>(p.n_dirs));
  s.write_le<std::uint32_t>(static_cast<std::uint32_t>(p.n_inplane));
  s.write_le<std::uint64_t>(grid.sample_count);
  write_bits(s, grid.bits());
  write_raw_u32(out, s.crc());
  if (!out) throw MapIoError("write failure while saving map");
}

ReachGrid4D load_reach_grid(std::istream& in) {
  char magic[4];
  peek_magic(in, magic);
  if (std::memcmp(magic, kMagicReach, 4) != 0) throw MapIoError("bad magic, not an RM4D map file");

  CrcStream s(&in);
  const CommonHeader h = read_header_common(s);
  GridParams params{h.r_xy, h.r_z, h.l_c, h.delta_theta};
  params.validate();
  ReachGrid4D grid(params);
  if (static_cast<std::uint32_t>(grid.n_z()) != h.n_z ||
      static_cast<std::uint32_t>(grid.n_theta()) != h.n_theta ||
      static_cast<std::uint32_t>(grid.n_xy()) != h.n_xy) {
    throw MapIoError("map dims do not match its grid params");
  }
  grid.robot_name = h.name;
  grid.sample_count = s.read_le<std::uint64_t>();
  read_bits(s, grid.bits());
  const std::uint32_t expect = s.crc();
  const std::uint32_t actual = read_raw_u32(in);
  if (expect != actual) throw MapIoError("checksum mismatch, map file is corrupted");
  grid.reconcile_marked_count();
  return grid;
}

CapabilityGrid load_capability_grid(std::istream& in) {
  char magic[4];
  peek_magic(in, magic);
  if (std::memcmp(magic, kMagicCapability, 4) != 0) {
    throw MapIoError("bad magic, not a capability map file");
  }

  CrcStream s(&in);
  const CommonHeader h = read_header_common(s);
  CapabilityParams params;
  params.r_xy = h.r_xy;
  params.r_z = h.r_z;
  params.l_c = h.l_c;
  params.n_dirs = static_cast<int>(s.read_le<std::uint32_t>());
  params.n_inplane = static_cast<int>(s.read_le<std::uint32_t>());
  params.validate();
  CapabilityGrid grid(params);
  if (static_cast<std::uint32_t>(params.n_z()) != h.n_z ||
      static_cast<std::uint32_t>(params.n_xy()) != h.n_xy) {
    throw MapIoError("map dims do not match its grid params");
  }
  grid.robot_name = h.name;
  grid.sample_count = s.read_le<std::uint64_t>();
  read_bits(s, grid.bits());
  const std::uint32_t expect = s.crc();
  const std::uint32_t actual = read_raw_u32(in);
  if (expect != actual) throw MapIoError("checksum mismatch, map file is corrupted");
  grid.reconcile_marked_count();
  return grid;
}

void save_map_file(const ReachGrid4D& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MapIoError("cannot open for writing: " + path);
  save_map(grid, out);
}

void save_map_file(const CapabilityGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MapIoError("cannot open for writing: " + path);
  save_map(grid, out);
}

ReachGrid4D load_reach_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapIoError("cannot open map file: " + path);
  return load_reach_grid(in);
}

CapabilityGrid load_capability_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapIoError("cannot open map file: " + path);
  return load_capability_grid(in);
}

MapFileKind peek_map_kind(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapIoError("cannot open map file: " + path);
  char magic[4];
  peek_magic(in, magic);
  if (std::memcmp(magic, kMagicReach, 4) == 0) return MapFileKind::reach4d;
  if (std::memcmp(magic, kMagicCapability, 4) == 0) return MapFileKind::capability;
  throw MapIoError("bad magic, not a map file: " + path);
}

std::unique_ptr<ReachabilityMap> load_any_map_file(const std::string& path) {
  if (peek_map_kind(path) == MapFileKind::reach4d) {
    return std::make_unique<ReachGrid4D>(load_reach_grid_file(path));
  }
  return std::make_unique<CapabilityGrid>(load_capability_grid_file(path));
}

}  // namespace rm4d
