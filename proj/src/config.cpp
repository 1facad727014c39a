#include "spg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace spg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class Num>
Num parse_number(const std::string& s, const std::string& where) {
  Num v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    fail(ErrorCode::kFormat, where + ": expected a number, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s, const std::string& where) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(ErrorCode::kFormat, where + ": expected true/false, got '" + s + "'");
}

std::string format_block(const ConvBlockSpec& b) {
  return std::to_string(b.filters) + (b.downsample ? "/down" : "");
}

ConvBlockSpec parse_block(const std::string& raw, const std::string& where) {
  std::string s = trim(raw);
  ConvBlockSpec b;
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    if (trim(s.substr(slash + 1)) != "down")
      fail(ErrorCode::kFormat, where + ": block suffix must be '/down'");
    b.downsample = true;
    s = trim(s.substr(0, slash));
  }
  b.filters = parse_number<int>(s, where);
  return b;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(const std::string&, const std::string&)> set;
  std::function<std::string()> get;
};

class Schema {
 public:
  template <class Num>
  void number(const std::string& section, const std::string& key, Num& ref) {
    fields_.push_back({section, key, [&ref](const std::string& v, const std::string& w) {
                         ref = parse_number<Num>(v, w);
                       },
                       [&ref] {
                         if constexpr (std::is_floating_point_v<Num>)
                           return format_double(ref);
                         else
                           return std::to_string(ref);
                       }});
  }
  void flag(const std::string& section, const std::string& key, bool& ref) {
    fields_.push_back({section, key, [&ref](const std::string& v, const std::string& w) { ref = parse_bool(v, w); },
                       [&ref] { return std::string(ref ? "true" : "false"); }});
  }
  void block(const std::string& section, const std::string& key, ConvBlockSpec& ref) {
    fields_.push_back({section, key, [&ref](const std::string& v, const std::string& w) { ref = parse_block(v, w); },
                       [&ref] { return format_block(ref); }});
  }
  void blocks(const std::string& section, const std::string& key, std::vector<ConvBlockSpec>& ref) {
    fields_.push_back({section, key,
                       [&ref](const std::string& v, const std::string& w) {
                         ref.clear();
                         std::stringstream ss(v);
                         std::string item;
                         while (std::getline(ss, item, ','))
                           if (!trim(item).empty()) ref.push_back(parse_block(item, w));
                       },
                       [&ref] {
                         std::string out;
                         for (size_t i = 0; i < ref.size(); ++i) out += (i ? "," : "") + format_block(ref[i]);
                         return out;
                       }});
  }

  void parse(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string where = "config line " + std::to_string(lineno);
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(ErrorCode::kFormat, where + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        bool known = false;
        for (const auto& f : fields_) known |= f.section == section;
        if (!known) fail(ErrorCode::kFormat, where + ": unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(ErrorCode::kFormat, where + ": expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      const Field* match = nullptr;
      for (const auto& f : fields_)
        if (f.section == section && f.key == key) match = &f;
      if (!match) fail(ErrorCode::kFormat, where + ": unknown key '" + key + "' in [" + section + "]");
      if (!seen.insert(section + "." + key).second)
        fail(ErrorCode::kFormat, where + ": duplicate key '" + key + "'");
      match->set(value, where);
    }
  }

  std::string text() const {
    std::string out, section;
    for (const auto& f : fields_) {
      if (f.section != section) {
        if (!section.empty()) out += "\n";
        section = f.section;
        out += "[" + section + "]\n";
      }
      out += f.key + " = " + f.get() + "\n";
    }
    return out;
  }

 private:
  std::vector<Field> fields_;
};

void describe(Schema& s, RunConfig& c) {
  NetworkConfig& m = c.network;
  s.number("model", "input_height", m.input_height);
  s.number("model", "input_width", m.input_width);
  s.number("model", "num_classes", m.num_classes);
  s.blocks("model", "stem", m.stem);
  s.block("model", "a1", m.a1);
  s.block("model", "a2", m.a2);
  s.block("model", "a3", m.a3);
  s.number("model", "b_adapter_filters", m.b_adapter_filters);
  s.number("model", "b_shared_filters", m.b_shared_filters);
  s.number("model", "c_head_filters", m.c_head_filters);
  s.flag("model", "share_b_layers", m.share_b_layers);
  s.flag("model", "enable_spg", m.enable_spg);
  s.flag("model", "enable_c_head", m.enable_c_head);
  s.flag("model", "batch_norm", m.batch_norm);
  s.number("model", "init_seed", m.init_seed);

  GuidanceOptions& g = c.guidance;
  s.number("guidance", "b2_low", g.b2.low);
  s.number("guidance", "b2_high", g.b2.high);
  s.number("guidance", "b1_low", g.b1.low);
  s.number("guidance", "b1_high", g.b1.high);
  s.number("guidance", "fuse_low", g.fuse.low);
  s.number("guidance", "fuse_high", g.fuse.high);
  s.flag("guidance", "cascade", g.cascade);
  s.flag("guidance", "renormalize_b2", g.renormalize_b2);

  TrainConfig& t = c.train;
  s.number("train", "epochs", t.epochs);
  s.number("train", "batch_size", t.batch_size);
  s.number("train", "base_lr", t.base_lr);
  s.number("train", "added_lr", t.added_lr);
  s.number("train", "lr_decay_factor", t.lr_decay_factor);
  s.number("train", "momentum", t.momentum);
  s.number("train", "weight_decay", t.weight_decay);
  s.number("train", "aux_loss_weight", t.aux_loss_weight);
  s.number("train", "seed", t.seed);
}

void describe(Schema& s, DatasetSpec& d) {
  s.number("dataset", "num_classes", d.num_classes);
  s.number("dataset", "train_images", d.train_images);
  s.number("dataset", "val_images", d.val_images);
  s.number("dataset", "test_images", d.test_images);
  s.number("dataset", "image_size", d.image_size);
  s.number("dataset", "scale_min", d.scale_min);
  s.number("dataset", "scale_max", d.scale_max);
  s.number("dataset", "noise_amplitude", d.noise_amplitude);
  s.number("dataset", "color_jitter", d.color_jitter);
  s.number("dataset", "seed", d.seed);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  Schema s;
  describe(s, c);
  s.parse(text);
  c.network.validate();
  c.train.validate();
  c.guidance.b1.validate();
  c.guidance.b2.validate();
  c.guidance.fuse.validate();
  return c;
}

DatasetSpec parse_dataset_spec(const std::string& text) {
  DatasetSpec d;
  Schema s;
  describe(s, d);
  s.parse(text);
  d.validate();
  return d;
}

RunConfig load_run_config(const std::string& path) {
  try {
    return parse_run_config(read_text(path));
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

DatasetSpec load_dataset_spec(const std::string& path) {
  try {
    return parse_dataset_spec(read_text(path));
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

std::string to_text(const RunConfig& config) {
  RunConfig copy = config;
  Schema s;
  describe(s, copy);
  return s.text();
}

std::string to_text(const DatasetSpec& spec) {
  DatasetSpec copy = spec;
  Schema s;
  describe(s, copy);
  return s.text();
}

uint64_t fnv1a64(const void* data, size_t size, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t config_hash(const RunConfig& config) {
  const std::string text = to_text(config);
  return fnv1a64(text.data(), text.size());
}

uint64_t resume_hash(const RunConfig& config) {
  RunConfig c = config;
  c.train.epochs = 0;
  return config_hash(c);
}

}  // namespace spg
