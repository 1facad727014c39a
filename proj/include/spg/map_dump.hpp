#ifndef SPG_MAP_DUMP_HPP_
#define SPG_MAP_DUMP_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "spg/core.hpp"

namespace spg {

enum class MapKind : uint32_t { kAttention = 0, kB1 = 1, kB2 = 2, kC = 3, kFusedMask = 4 };
const char* map_kind_name(MapKind kind);
MapKind map_kind_from_name(const std::string& name);

// Serialized map panel. Masks are stored as floats 0 / 1 / 255.
//
// File layout, little-endian:
//   "SPGM"  u32 version(=1)  u32 id_len  id bytes  u32 kind  u32 height  u32 width
//   height*width x f32 (row-major)
struct MapDump {
  std::string image_id;
  MapKind kind = MapKind::kAttention;
  LocalizationMap map;
  bool operator==(const MapDump&) const = default;
};

MapDump mask_dump(const std::string& image_id, const GuidanceMask& mask);

std::vector<uint8_t> encode_map_dump(const MapDump& dump);
MapDump decode_map_dump(const std::vector<uint8_t>& bytes, const std::string& what = "map dump");
void write_map_dump(const MapDump& dump, const std::string& path);
MapDump read_map_dump(const std::string& path);

}  // namespace spg

#endif  // SPG_MAP_DUMP_HPP_
