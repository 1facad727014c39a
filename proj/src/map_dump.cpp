#include "spg/map_dump.hpp"

#include <cstring>

#include "binary_io.hpp"

namespace spg {

namespace {
constexpr char kMagic[4] = {'S', 'P', 'G', 'M'};
constexpr uint32_t kVersion = 1;
const char* const kKindNames[] = {"attention", "B1", "B2", "C", "fused_mask"};
}  // namespace

const char* map_kind_name(MapKind kind) {
  const auto i = static_cast<uint32_t>(kind);
  return i < 5 ? kKindNames[i] : "unknown";
}

MapKind map_kind_from_name(const std::string& name) {
  for (uint32_t i = 0; i < 5; ++i)
    if (name == kKindNames[i]) return static_cast<MapKind>(i);
  fail(ErrorCode::kInvalidArgument, "unknown map kind '" + name + "'");
}

MapDump mask_dump(const std::string& image_id, const GuidanceMask& mask) {
  MapDump d{image_id, MapKind::kFusedMask, LocalizationMap(mask.height, mask.width, 0.0f)};
  for (size_t i = 0; i < mask.size(); ++i) d.map.scores[i] = static_cast<float>(mask.labels[i]);
  return d;
}

std::vector<uint8_t> encode_map_dump(const MapDump& dump) {
  if (dump.map.size() != static_cast<size_t>(dump.map.height) * dump.map.width || dump.map.size() == 0)
    fail(ErrorCode::kInvalidArgument, "map dump payload does not match its dimensions");
  io::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<uint32_t>(dump.image_id.size()));
  w.bytes(dump.image_id.data(), dump.image_id.size());
  w.u32(static_cast<uint32_t>(dump.kind));
  w.u32(static_cast<uint32_t>(dump.map.height));
  w.u32(static_cast<uint32_t>(dump.map.width));
  for (float v : dump.map.scores) w.f32(v);
  return w.data();
}

MapDump decode_map_dump(const std::vector<uint8_t>& bytes, const std::string& what) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorCode::kFormat, what + ": bad magic (expected SPGM)");
  io::Reader r(bytes.data(), bytes.size(), what);
  r.str(4);
  if (const uint32_t v = r.u32(); v != kVersion)
    fail(ErrorCode::kFormat, what + ": unsupported version " + std::to_string(v));
  MapDump d;
  d.image_id = r.str(r.u32());
  const uint32_t kind = r.u32();
  if (kind > 4) fail(ErrorCode::kFormat, what + ": unknown map kind " + std::to_string(kind));
  d.kind = static_cast<MapKind>(kind);
  const uint32_t h = r.u32(), w = r.u32();
  if (h == 0 || w == 0 || h > 65536 || w > 65536) fail(ErrorCode::kFormat, what + ": bad dimensions");
  const size_t n = static_cast<size_t>(h) * w;
  r.need(n * 4);
  if (r.remaining() != n * 4) fail(ErrorCode::kFormat, what + ": trailing bytes after payload");
  std::vector<float> values(n);
  for (float& v : values) v = r.f32();
  d.map = LocalizationMap(static_cast<int>(h), static_cast<int>(w), std::move(values));
  return d;
}

void write_map_dump(const MapDump& dump, const std::string& path) { io::write_file(path, encode_map_dump(dump)); }

MapDump read_map_dump(const std::string& path) { return decode_map_dump(io::read_file(path), "map dump '" + path + "'"); }

}  // namespace spg
