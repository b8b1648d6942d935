#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include "rm4d/capability_map.hpp"
#include "rm4d/reach_map.hpp"

namespace rm4d {

/// Map container read/write failure: bad magic, version mismatch, truncated
/// payload, or checksum failure.
class MapIoError : public std::runtime_error {
 public:
  explicit MapIoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// CRC-32 (IEEE), reflected polynomial 0xEDB88320.
std::uint32_t crc32(std::span<const unsigned char> data, std::uint32_t seed = 0);

// Container layout, all integers little-endian:
//   magic ("RM4D" or "CAPM"), version u16, name length u32 + UTF-8 bytes,
//   params f64 x4 (r_xy, r_z, l_c, delta_theta), dims u32 x3 (n_z, n_theta,
//   n_xy), [CAPM only: n_dirs u32, n_inplane u32], sample count u64, packed
//   cell bits (bit k of byte j = cell 8j + k), CRC32 of everything between
//   the magic and the checksum.
void save_map(const ReachGrid4D& grid, std::ostream& out);
void save_map(const CapabilityGrid& grid, std::ostream& out);
void save_map_file(const ReachGrid4D& grid, const std::string& path);
void save_map_file(const CapabilityGrid& grid, const std::string& path);

ReachGrid4D load_reach_grid(std::istream& in);
ReachGrid4D load_reach_grid_file(const std::string& path);
CapabilityGrid load_capability_grid(std::istream& in);
CapabilityGrid load_capability_grid_file(const std::string& path);

enum class MapFileKind { reach4d, capability };

MapFileKind peek_map_kind(const std::string& path);

/// Loads either container kind behind the shared map interface.
std::unique_ptr<ReachabilityMap> load_any_map_file(const std::string& path);

}  // namespace rm4d
