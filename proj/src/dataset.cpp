#include "spg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "rng.hpp"
#include "spg/config.hpp"

namespace fs = std::filesystem;

namespace spg {

const char* shape_name(int class_id) {
  static const char* names[] = {"disk", "rectangle", "triangle", "ring"};
  return class_id >= 0 && class_id < kMaxShapeClasses ? names[class_id] : "unknown";
}

void DatasetSpec::validate() const {
  if (num_classes < 2 || num_classes > kMaxShapeClasses)
    fail(ErrorCode::kInvalidArgument, "dataset num_classes must be in [2, 4]");
  if (train_images < 0 || val_images < 0 || test_images < 0)
    fail(ErrorCode::kInvalidArgument, "split sizes must be >= 0");
  if (image_size < 16) fail(ErrorCode::kInvalidArgument, "image_size must be >= 16");
  if (!(0.0 < scale_min && scale_min <= scale_max && scale_max <= 0.9))
    fail(ErrorCode::kInvalidArgument, "object scale range must satisfy 0 < min <= max <= 0.9");
  if (!(noise_amplitude >= 0 && color_jitter >= 0))
    fail(ErrorCode::kInvalidArgument, "noise and jitter amplitudes must be >= 0");
}

uint8_t to_byte(float v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

namespace {

// Smooth value noise in [-1, 1]: bilinear interpolation of a random lattice.
std::vector<float> value_noise(Rng& rng, int size, int cells) {
  std::vector<double> lattice(static_cast<size_t>(cells + 1) * (cells + 1));
  for (double& v : lattice) v = rng.uniform(-1.0, 1.0);
  std::vector<float> out(static_cast<size_t>(size) * size);
  const double step = static_cast<double>(cells) / size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double gx = (x + 0.5) * step, gy = (y + 0.5) * step;
      const int ix = std::min(static_cast<int>(gx), cells - 1), iy = std::min(static_cast<int>(gy), cells - 1);
      const double fx = gx - ix, fy = gy - iy;
      auto L = [&](int a, int b) { return lattice[static_cast<size_t>(b) * (cells + 1) + a]; };
      const double top = (1 - fx) * L(ix, iy) + fx * L(ix + 1, iy);
      const double bot = (1 - fx) * L(ix, iy + 1) + fx * L(ix + 1, iy + 1);
      out[static_cast<size_t>(y) * size + x] = static_cast<float>((1 - fy) * top + fy * bot);
    }
  return out;
}

struct Shape {
  ShapeKind kind;
  double cx = 0, cy = 0, r = 0, inner = 0;  // disk / ring
  BBox box;                                 // rectangle / analytic box
  double ax = 0, ay = 0, bx = 0, by = 0, px = 0, py = 0;  // triangle

  bool contains(double x, double y) const {
    switch (kind) {
      case ShapeKind::kDisk:
      case ShapeKind::kRing: {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        return d2 <= r * r && (kind == ShapeKind::kDisk || d2 >= inner * inner);
      }
      case ShapeKind::kRectangle:
        return x >= box.x0 && x < box.x1 && y >= box.y0 && y < box.y1;
      case ShapeKind::kTriangle: {
        auto edge = [](double x0, double y0, double x1, double y1, double x, double y) {
          return (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
        };
        const double e0 = edge(ax, ay, bx, by, x, y), e1 = edge(bx, by, px, py, x, y), e2 = edge(px, py, ax, ay, x, y);
        return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
      }
    }
    return false;
  }
};

Shape make_shape(Rng& rng, ShapeKind kind, int size, double extent) {
  Shape s{};
  s.kind = kind;
  switch (kind) {
    case ShapeKind::kDisk:
    case ShapeKind::kRing: {
      s.r = extent / 2;
      s.inner = s.r * rng.uniform(0.45, 0.6);
      s.cx = rng.uniform(s.r, size - s.r);
      s.cy = rng.uniform(s.r, size - s.r);
      s.box = {s.cx - s.r, s.cy - s.r, s.cx + s.r, s.cy + s.r};
      break;
    }
    case ShapeKind::kRectangle: {
      double w = std::round(extent), h = std::round(extent * rng.uniform(0.55, 0.9));
      if (rng.uniform() < 0.5) std::swap(w, h);
      const double x0 = static_cast<double>(rng.below(static_cast<uint64_t>(size - w) + 1));
      const double y0 = static_cast<double>(rng.below(static_cast<uint64_t>(size - h) + 1));
      s.box = {x0, y0, x0 + w, y0 + h};
      break;
    }
    case ShapeKind::kTriangle: {
      // Integer base corners and an apex on a pixel-centre column keep the
      // rendered coverage within one pixel of the analytic box.
      const double w = std::round(extent), h = std::round(extent * rng.uniform(0.8, 1.0));
      const double x0 = static_cast<double>(rng.below(static_cast<uint64_t>(size - w) + 1));
      const double y0 = static_cast<double>(rng.below(static_cast<uint64_t>(size - h) + 1));
      const double apex = x0 + std::floor(rng.uniform(0.2, 0.8) * w) + 0.5;
      const bool up = rng.uniform() < 0.5;
      const double base_y = up ? y0 + h : y0, tip_y = up ? y0 : y0 + h;
      s.ax = x0;
      s.ay = base_y;
      s.bx = x0 + w;
      s.by = base_y;
      s.px = apex;
      s.py = tip_y;
      s.box = {x0, y0, x0 + w, y0 + h};
      break;
    }
  }
  return s;
}

std::string id_for(int split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05d", kSplits[split], index);
  return buf;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

RenderedSample render_sample(const DatasetSpec& spec, int split, int index) {
  if (split < 0 || split > 2) fail(ErrorCode::kOutOfRange, "split index out of range");
  Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(split) * 1000003ULL + static_cast<uint64_t>(index)));
  const int n = spec.image_size;
  RenderedSample out;
  out.label = static_cast<int>(rng.below(static_cast<uint64_t>(spec.num_classes)));

  double bg[3], gain[3], fg[3];
  for (int c = 0; c < 3; ++c) {
    bg[c] = rng.uniform(0.25, 0.75);
    gain[c] = rng.uniform(0.5, 1.0);
  }
  do {
    for (double& c : fg) c = rng.uniform(0.0, 1.0);
  } while (std::hypot(fg[0] - bg[0], fg[1] - bg[1], fg[2] - bg[2]) < 0.35);

  const std::vector<float> coarse = value_noise(rng, n, 4);
  const std::vector<float> fine = value_noise(rng, n, 16);
  const double extent = rng.uniform(spec.scale_min, spec.scale_max) * n;
  const Shape shape = make_shape(rng, static_cast<ShapeKind>(out.label), n, extent);
  out.box = shape.box;

  out.image.height = out.image.width = n;
  out.image.rgb.resize(static_cast<size_t>(n) * n * 3);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const size_t i = static_cast<size_t>(y) * n + x;
      const double texture = 0.6 * coarse[i] + 0.4 * fine[i];
      const bool inside = shape.contains(x + 0.5, y + 0.5);
      for (int c = 0; c < 3; ++c) {
        double v = inside ? fg[c] + spec.color_jitter * rng.uniform(-1.0, 1.0)
                          : bg[c] + spec.noise_amplitude * gain[c] * texture;
        out.image.at(y, x, c) = static_cast<float>(to_byte(static_cast<float>(v))) / 255.0f;
      }
    }
  return out;
}

void write_ppm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<uint8_t> bytes(image.rgb.size());
  std::transform(image.rgb.begin(), image.rgb.end(), bytes.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  auto token = [&]() {
    std::string t;
    int ch;
    while ((ch = in.get()) != EOF) {
      if (ch == '#') {
        while ((ch = in.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(static_cast<char>(ch));
    }
    return t;
  };
  if (token() != "P6") fail(ErrorCode::kFormat, path + ": not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    fail(ErrorCode::kFormat, path + ": malformed PPM header");
  }
  if (w < 1 || h < 1 || maxval != 255) fail(ErrorCode::kFormat, path + ": unsupported PPM dimensions or maxval");
  Image img;
  img.width = w;
  img.height = h;
  std::vector<uint8_t> bytes(static_cast<size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) fail(ErrorCode::kFormat, path + ": truncated pixel data");
  img.rgb.resize(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i) img.rgb[i] = bytes[i] / 255.0f;
  return img;
}

void generate_dataset(const DatasetSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create '" + out_dir + "': " + ec.message());
  {
    std::ofstream cfg(fs::path(out_dir) / "dataset.cfg");
    if (!cfg) fail(ErrorCode::kIo, "cannot write dataset.cfg in '" + out_dir + "'");
    cfg << to_text(spec);
  }
  const int counts[3] = {spec.train_images, spec.val_images, spec.test_images};
  for (int split = 0; split < 3; ++split) {
    const fs::path dir = fs::path(out_dir) / kSplits[split];
    fs::create_directories(dir / "images", ec);
    if (ec) fail(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
    std::ofstream labels(dir / "labels.csv"), boxes(dir / "boxes.csv");
    if (!labels || !boxes) fail(ErrorCode::kIo, "cannot write CSV files in '" + dir.string() + "'");
    labels << "image_id,class_id\n";
    boxes << "image_id,x0,y0,x1,y1\n";
    for (int i = 0; i < counts[split]; ++i) {
      const RenderedSample s = render_sample(spec, split, i);
      const std::string id = id_for(split, i);
      write_ppm(s.image, (dir / "images" / (id + ".ppm")).string());
      labels << id << ',' << s.label << '\n';
      boxes << id << ',' << fmt(s.box.x0) << ',' << fmt(s.box.y0) << ',' << fmt(s.box.x1) << ',' << fmt(s.box.y1) << '\n';
    }
    if (!labels || !boxes) fail(ErrorCode::kIo, "write failed in '" + dir.string() + "'");
  }
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path, size_t columns) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns)
      fail(ErrorCode::kFormat, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                   std::to_string(columns) + " columns");
    if (lineno == 1 && cells[0] == "image_id") continue;
    cells.push_back(std::to_string(lineno));
    rows.push_back(std::move(cells));
  }
  return rows;
}

template <class Num>
Num csv_number(const std::string& s, const fs::path& path, const std::string& line) {
  Num v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    fail(ErrorCode::kFormat, path.string() + ":" + line + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<ImageRecord> load_dataset(const std::string& split_dir) {
  const fs::path dir(split_dir);
  const fs::path labels_path = dir / "labels.csv";
  std::vector<ImageRecord> records;
  std::unordered_map<std::string, size_t> index;
  for (const auto& row : read_csv(labels_path, 2)) {
    ImageRecord r;
    r.id = row[0];
    r.label = csv_number<int>(row[1], labels_path, row[2]);
    if (r.label < 0) fail(ErrorCode::kFormat, labels_path.string() + ":" + row[2] + ": negative class id");
    if (!index.emplace(r.id, records.size()).second)
      fail(ErrorCode::kFormat, labels_path.string() + ":" + row[2] + ": duplicate image id");
    r.image = read_ppm((dir / "images" / (r.id + ".ppm")).string());
    records.push_back(std::move(r));
  }
  const fs::path boxes_path = dir / "boxes.csv";
  if (fs::exists(boxes_path)) {
    for (const auto& row : read_csv(boxes_path, 5)) {
      auto it = index.find(row[0]);
      if (it == index.end())
        fail(ErrorCode::kFormat, boxes_path.string() + ":" + row[5] + ": unknown image id '" + row[0] + "'");
      BBox b{csv_number<double>(row[1], boxes_path, row[5]), csv_number<double>(row[2], boxes_path, row[5]),
             csv_number<double>(row[3], boxes_path, row[5]), csv_number<double>(row[4], boxes_path, row[5])};
      if (!b.valid()) fail(ErrorCode::kFormat, boxes_path.string() + ":" + row[5] + ": degenerate box");
      records[it->second].boxes.push_back(b);
    }
  }
  return records;
}

}  // namespace spg
