#include "spg/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace spg {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, '\t')) out.push_back(cell);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

template <class Num>
Num parse_cell(const std::string& s, const std::string& where) {
  Num v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    fail(ErrorCode::kFormat, where + ": bad number '" + s + "'");
  return v;
}

const BBox* box_at(const PredictionRecord& p, int cls, size_t i) {
  auto it = p.boxes.find(cls);
  if (it == p.boxes.end() || i >= it->second.size()) return nullptr;
  return &it->second[i];
}

bool any_correct(const PredictionRecord& p, const GroundTruth& g, std::span<const std::pair<size_t, size_t>> picks) {
  for (auto [rank, box_idx] : picks) {
    if (rank >= p.ranked_classes.size()) continue;
    const int cls = p.ranked_classes[rank];
    if (const BBox* b = box_at(p, cls, box_idx); b && is_correct(cls, *b, g.label, g.boxes)) return true;
  }
  return false;
}

std::unordered_map<std::string, const PredictionRecord*> index_predictions(std::span<const PredictionRecord> preds) {
  std::unordered_map<std::string, const PredictionRecord*> idx;
  for (const auto& p : preds)
    if (!idx.emplace(p.image_id, &p).second) fail(ErrorCode::kInvalidArgument, "duplicate prediction for " + p.image_id);
  return idx;
}

}  // namespace

const char* mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::kTop1: return "top1";
    case EvalMode::kTop5: return "top5";
    case EvalMode::kTop5Star: return "top5_star";
    case EvalMode::kGtKnown: return "gt_known";
  }
  return "?";
}

bool is_correct(int pred_class, const BBox& pred_box, int gt_class, std::span<const BBox> gt_boxes) {
  if (pred_class != gt_class) return false;
  double best = 0.0;
  for (const BBox& g : gt_boxes) best = std::max(best, iou(pred_box, g));
  return best > 0.5;
}

ModeResult evaluate(std::span<const PredictionRecord> preds, std::span<const GroundTruth> gt, EvalMode mode) {
  const auto idx = index_predictions(preds);
  static constexpr std::pair<size_t, size_t> kTop1[] = {{0, 0}};
  static constexpr std::pair<size_t, size_t> kTop5[] = {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}};
  static constexpr std::pair<size_t, size_t> kStar[] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 0}};
  ModeResult r;
  for (const GroundTruth& g : gt) {
    auto it = idx.find(g.image_id);
    if (it == idx.end()) fail(ErrorCode::kInvalidArgument, "no prediction for image " + g.image_id);
    const PredictionRecord& p = *it->second;
    bool ok = false;
    switch (mode) {
      case EvalMode::kTop1: ok = any_correct(p, g, kTop1); break;
      case EvalMode::kTop5: ok = any_correct(p, g, kTop5); break;
      case EvalMode::kTop5Star: ok = any_correct(p, g, kStar); break;
      case EvalMode::kGtKnown: {
        const BBox* b = box_at(p, g.label, 0);
        if (!b) fail(ErrorCode::kInvalidArgument, "no box for the ground-truth class of image " + g.image_id);
        ok = is_correct(g.label, *b, g.label, g.boxes);
        break;
      }
    }
    r.correct += ok;
    ++r.total;
  }
  r.error = r.total ? 100.0 * static_cast<double>(r.total - r.correct) / static_cast<double>(r.total) : 0.0;
  return r;
}

EvalReport evaluate_report(std::span<const PredictionRecord> preds, std::span<const GroundTruth> gt) {
  EvalReport rep;
  rep.images = gt.size();
  rep.top1_loc_err = evaluate(preds, gt, EvalMode::kTop1).error;
  rep.top5_loc_err = evaluate(preds, gt, EvalMode::kTop5).error;
  rep.top5_star_loc_err = evaluate(preds, gt, EvalMode::kTop5Star).error;
  rep.gt_known_loc_err = evaluate(preds, gt, EvalMode::kGtKnown).error;
  const auto idx = index_predictions(preds);
  size_t top1 = 0, top5 = 0;
  for (const GroundTruth& g : gt) {
    const auto& ranked = idx.at(g.image_id)->ranked_classes;
    if (!ranked.empty() && ranked[0] == g.label) ++top1;
    const size_t n = std::min<size_t>(5, ranked.size());
    if (std::find(ranked.begin(), ranked.begin() + n, g.label) != ranked.begin() + n) ++top5;
  }
  if (!gt.empty()) {
    rep.top1_cls_err = 100.0 * static_cast<double>(gt.size() - top1) / static_cast<double>(gt.size());
    rep.top5_cls_err = 100.0 * static_cast<double>(gt.size() - top5) / static_cast<double>(gt.size());
  }
  return rep;
}

std::vector<PredictionRecord> apply_external_ranking(std::span<const PredictionRecord> preds,
                                                     const ExternalRanking& external) {
  if (external.size() != preds.size())
    fail(ErrorCode::kInvalidArgument, "external ranking covers " + std::to_string(external.size()) +
                                          " images, predictions cover " + std::to_string(preds.size()));
  std::vector<PredictionRecord> out;
  out.reserve(preds.size());
  for (const PredictionRecord& p : preds) {
    auto it = external.find(p.image_id);
    if (it == external.end()) fail(ErrorCode::kInvalidArgument, "external ranking lacks image " + p.image_id);
    PredictionRecord q = p;
    q.ranked_classes = it->second;
    q.scores.clear();
    for (int cls : q.ranked_classes) {
      auto pos = std::find(p.ranked_classes.begin(), p.ranked_classes.end(), cls);
      const size_t r = static_cast<size_t>(pos - p.ranked_classes.begin());
      q.scores.push_back(pos != p.ranked_classes.end() && r < p.scores.size() ? p.scores[r] : 0.0);
      if (!p.boxes.contains(cls))
        fail(ErrorCode::kInvalidArgument, "no localization for class " + std::to_string(cls) + " of image " + p.image_id);
    }
    out.push_back(std::move(q));
  }
  return out;
}

EvalReport evaluate_with_external_predictions(const ExternalRanking& external, std::span<const PredictionRecord> own,
                                              std::span<const GroundTruth> gt) {
  const auto combined = apply_external_ranking(own, external);
  EvalReport rep = evaluate_report(combined, gt);
  return rep;
}

ExternalRanking read_external_ranking(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  ExternalRanking out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto cells = split_tabs(line);
    if (cells.size() < 2 || cells.size() > 6) fail(ErrorCode::kFormat, where + ": expected image_id and 1-5 classes");
    if (cells[0] == "image_id") continue;
    std::vector<int> ranked;
    for (size_t i = 1; i < cells.size(); ++i) {
      const int cls = parse_cell<int>(cells[i], where);
      if (std::find(ranked.begin(), ranked.end(), cls) != ranked.end())
        fail(ErrorCode::kFormat, where + ": repeated class");
      ranked.push_back(cls);
    }
    if (!out.emplace(cells[0], std::move(ranked)).second) fail(ErrorCode::kFormat, where + ": duplicate image id");
  }
  return out;
}

void write_external_ranking(const ExternalRanking& ranking, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  for (const auto& [id, ranked] : ranking) {
    out << id;
    for (int c : ranked) out << '\t' << c;
    out << '\n';
  }
}

void write_predictions(std::span<const PredictionRecord> preds, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << "image_id\tclass_id\trank\tx0\ty0\tx1\ty1\tscore\n";
  for (const PredictionRecord& p : preds) {
    for (size_t r = 0; r < p.ranked_classes.size(); ++r) {
      const int cls = p.ranked_classes[r];
      auto it = p.boxes.find(cls);
      if (it == p.boxes.end()) continue;
      const double score = r < p.scores.size() ? p.scores[r] : 0.0;
      for (const BBox& b : it->second)
        out << p.image_id << '\t' << cls << '\t' << r + 1 << '\t' << fmt(b.x0) << '\t' << fmt(b.y0) << '\t'
            << fmt(b.x1) << '\t' << fmt(b.y1) << '\t' << fmt(score) << '\n';
    }
  }
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

std::vector<PredictionRecord> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<PredictionRecord> out;
  std::unordered_map<std::string, size_t> where_is;
  std::vector<std::map<int, std::pair<int, double>>> ranks;  // class -> (rank, score)
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto cells = split_tabs(line);
    if (cells.size() != 8) fail(ErrorCode::kFormat, where + ": expected 8 tab-separated columns");
    if (cells[0] == "image_id") continue;
    auto [it, fresh] = where_is.emplace(cells[0], out.size());
    if (fresh) {
      out.push_back(PredictionRecord{cells[0], {}, {}, {}});
      ranks.emplace_back();
    }
    const int cls = parse_cell<int>(cells[1], where);
    const int rank = parse_cell<int>(cells[2], where);
    if (rank < 1) fail(ErrorCode::kFormat, where + ": rank must be >= 1");
    BBox b{parse_cell<double>(cells[3], where), parse_cell<double>(cells[4], where), parse_cell<double>(cells[5], where),
           parse_cell<double>(cells[6], where)};
    if (!b.valid()) fail(ErrorCode::kFormat, where + ": degenerate box");
    const double score = parse_cell<double>(cells[7], where);
    auto& rk = ranks[it->second];
    if (auto prev = rk.find(cls); prev != rk.end() && prev->second.first != rank)
      fail(ErrorCode::kFormat, where + ": class listed with two ranks");
    rk[cls] = {rank, score};
    out[it->second].boxes[cls].push_back(b);
  }
  for (size_t i = 0; i < out.size(); ++i) {
    std::vector<std::tuple<int, int, double>> order;  // rank, class, score
    std::set<int> seen_ranks;
    for (auto& [cls, rs] : ranks[i]) {
      if (!seen_ranks.insert(rs.first).second)
        fail(ErrorCode::kFormat, path + ": two classes share a rank for image " + out[i].image_id);
      order.emplace_back(rs.first, cls, rs.second);
    }
    std::sort(order.begin(), order.end());
    for (auto& [r, cls, score] : order) {
      out[i].ranked_classes.push_back(cls);
      out[i].scores.push_back(score);
    }
  }
  return out;
}

std::string report_to_key_values(const EvalReport& r) {
  std::ostringstream out;
  out << "images = " << r.images << '\n'
      << "threshold = " << fmt(r.threshold) << '\n'
      << "top1_loc_err = " << fmt(r.top1_loc_err) << '\n'
      << "top5_loc_err = " << fmt(r.top5_loc_err) << '\n'
      << "top5_star_loc_err = " << fmt(r.top5_star_loc_err) << '\n'
      << "gt_known_loc_err = " << fmt(r.gt_known_loc_err) << '\n'
      << "top1_cls_err = " << fmt(r.top1_cls_err) << '\n'
      << "top5_cls_err = " << fmt(r.top5_cls_err) << '\n';
  return out.str();
}

EvalReport report_from_key_values(const std::string& text) {
  EvalReport r;
  std::map<std::string, double*> fields = {
      {"threshold", &r.threshold},         {"top1_loc_err", &r.top1_loc_err},
      {"top5_loc_err", &r.top5_loc_err},   {"top5_star_loc_err", &r.top5_star_loc_err},
      {"gt_known_loc_err", &r.gt_known_loc_err}, {"top1_cls_err", &r.top1_cls_err},
      {"top5_cls_err", &r.top5_cls_err}};
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) fail(ErrorCode::kFormat, "report line lacks ' = ': " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    if (key == "images") {
      r.images = parse_cell<size_t>(value, "report");
    } else if (auto it = fields.find(key); it != fields.end()) {
      *it->second = parse_cell<double>(value, "report");
    } else {
      fail(ErrorCode::kFormat, "unknown report key '" + key + "'");
    }
    seen.insert(key);
  }
  if (seen.size() != fields.size() + 1) fail(ErrorCode::kFormat, "report is missing keys");
  return r;
}

std::string report_to_table(const EvalReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "images evaluated          %zu\n"
                "box threshold             %.2f\n"
                "                          top-1    top-5    top-5*  gt-known\n"
                "localization err (%%)    %7.2f  %7.2f  %7.2f  %7.2f\n"
                "classification err (%%)  %7.2f  %7.2f\n",
                r.images, r.threshold, r.top1_loc_err, r.top5_loc_err, r.top5_star_loc_err, r.gt_known_loc_err,
                r.top1_cls_err, r.top5_cls_err);
  return buf;
}

}  // namespace spg
