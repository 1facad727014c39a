#include <filesystem>
#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "spg/config.hpp"
#include "spg/training.hpp"

namespace spg {

namespace io {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<uint8_t>& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) fail(ErrorCode::kIo, "write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

}  // namespace io

namespace {

constexpr char kMagic[4] = {'S', 'P', 'G', 'C'};
constexpr uint32_t kVersion = 1;
const std::string kParamPrefix = "param:";
const std::string kMomentumPrefix = "momentum:";

struct Entry {
  std::string name;
  uint8_t group = 0;
  std::vector<uint32_t> dims;
  uint64_t count = 0;
  uint64_t offset = 0;
};

}  // namespace

// Layout (all little-endian):
//   "SPGC" u32 version u64 config_hash u32 epoch
//   u32 config_len, config text
//   u32 entries, each: str16 name, u8 group, u8 rank, rank x u32 dim, u64 count, u64 offset
//   u64 float_count, float_count x f32
//   u64 fnv1a64 of all preceding bytes
void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  if (ckpt.momentum.size() != ckpt.params.size())
    fail(ErrorCode::kInvalidArgument, "momentum table must parallel the parameter table");
  const std::string text = to_text(ckpt.config);
  io::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u64(config_hash(ckpt.config));
  w.u32(static_cast<uint32_t>(ckpt.epoch));
  w.u32(static_cast<uint32_t>(text.size()));
  w.bytes(text.data(), text.size());

  w.u32(static_cast<uint32_t>(ckpt.params.size() * 2));
  uint64_t offset = 0;
  auto entry = [&](const std::string& name, const Parameter& p, size_t count) {
    if (count != p.values.size()) fail(ErrorCode::kInvalidArgument, "momentum size mismatch for " + p.name);
    w.str16(name);
    w.u8(static_cast<uint8_t>(p.group));
    w.u8(static_cast<uint8_t>(p.shape.size()));
    for (int d : p.shape) w.u32(static_cast<uint32_t>(d));
    w.u64(count);
    w.u64(offset);
    offset += count;
  };
  for (size_t i = 0; i < ckpt.params.size(); ++i) entry(kParamPrefix + ckpt.params[i].name, ckpt.params[i], ckpt.params[i].values.size());
  for (size_t i = 0; i < ckpt.params.size(); ++i) entry(kMomentumPrefix + ckpt.params[i].name, ckpt.params[i], ckpt.momentum[i].size());
  w.u64(offset);
  for (const auto& p : ckpt.params)
    for (float v : p.values) w.f32(v);
  for (const auto& m : ckpt.momentum)
    for (float v : m) w.f32(v);
  const uint64_t sum = fnv1a64(w.data().data(), w.data().size());
  w.u64(sum);
  io::write_file(path, w.data());
}

Checkpoint load_checkpoint(const std::string& path, const RunConfig* expected) {
  const std::vector<uint8_t> bytes = io::read_file(path);
  const std::string what = "checkpoint '" + path + "'";
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorCode::kFormat, what + ": bad magic (expected SPGC)");
  if (bytes.size() < 12) fail(ErrorCode::kFormat, what + ": truncated file");
  {
    io::Reader tail(bytes.data() + bytes.size() - 8, 8, what);
    if (tail.u64() != fnv1a64(bytes.data(), bytes.size() - 8))
      fail(ErrorCode::kFormat, what + ": checksum mismatch (truncated or corrupt)");
  }
  io::Reader r(bytes.data(), bytes.size() - 8, what);
  r.str(4);
  const uint32_t version = r.u32();
  if (version != kVersion) fail(ErrorCode::kFormat, what + ": unsupported version " + std::to_string(version));
  const uint64_t hash = r.u64();
  Checkpoint ck;
  ck.epoch = static_cast<int>(r.u32());
  const std::string text = r.str(r.u32());
  ck.config = parse_run_config(text);
  if (config_hash(ck.config) != hash) fail(ErrorCode::kFormat, what + ": config hash mismatch");
  if (expected && resume_hash(*expected) != resume_hash(ck.config))
    fail(ErrorCode::kInvalidArgument, what + ": produced by a different configuration");

  std::vector<Entry> entries(r.u32());
  for (Entry& e : entries) {
    e.name = r.str16();
    e.group = r.u8();
    e.dims.resize(r.u8());
    for (auto& d : e.dims) d = r.u32();
    e.count = r.u64();
    e.offset = r.u64();
  }
  const uint64_t total = r.u64();
  r.need(total * 4);
  if (r.remaining() != total * 4) fail(ErrorCode::kFormat, what + ": trailing bytes after payload");
  const size_t blob_start = r.pos();

  auto read_values = [&](const Entry& e) {
    if (e.offset + e.count > total) fail(ErrorCode::kFormat, what + ": entry '" + e.name + "' out of bounds");
    io::Reader blob(bytes.data() + blob_start + e.offset * 4, e.count * 4, what);
    std::vector<float> v(e.count);
    for (float& x : v) x = blob.f32();
    return v;
  };
  std::vector<std::pair<std::string, std::vector<float>>> moments;
  for (const Entry& e : entries) {
    if (e.name.rfind(kParamPrefix, 0) == 0) {
      Parameter p;
      p.name = e.name.substr(kParamPrefix.size());
      if (e.group > static_cast<uint8_t>(ParamGroup::kBuffer))
        fail(ErrorCode::kFormat, what + ": bad group for '" + e.name + "'");
      p.group = static_cast<ParamGroup>(e.group);
      p.shape.assign(e.dims.begin(), e.dims.end());
      p.values = read_values(e);
      ck.params.push_back(std::move(p));
    } else if (e.name.rfind(kMomentumPrefix, 0) == 0) {
      moments.emplace_back(e.name.substr(kMomentumPrefix.size()), read_values(e));
    } else {
      fail(ErrorCode::kFormat, what + ": unknown entry '" + e.name + "'");
    }
  }
  if (moments.size() != ck.params.size()) fail(ErrorCode::kFormat, what + ": momentum table incomplete");
  for (size_t i = 0; i < moments.size(); ++i) {
    if (moments[i].first != ck.params[i].name) fail(ErrorCode::kFormat, what + ": momentum table out of order");
    ck.momentum.push_back(std::move(moments[i].second));
  }
  // Validates names and shapes against the config.
  Network<float> check(ck.config.network, ck.params);
  return ck;
}

}  // namespace spg
