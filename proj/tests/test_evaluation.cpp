#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "eval_fixture.hpp"
#include "spg/evaluation.hpp"

using namespace spg;
namespace fs = std::filesystem;

namespace {

PredictionRecord record(const std::string& id, std::vector<int> ranked, std::map<int, std::vector<BBox>> boxes) {
  return PredictionRecord{id, std::move(ranked), {}, std::move(boxes)};
}

std::string temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spg_unit_eval";
  fs::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("is_correct: class and strict IoU") {
  const std::vector<BBox> gt{{0, 0, 10, 10}};
  CHECK(is_correct(1, {0, 0, 10, 10}, 1, gt));
  CHECK_FALSE(is_correct(2, {0, 0, 10, 10}, 1, gt));
  // 10x5 inside 10x10: IoU exactly 0.5.
  CHECK(iou({0, 0, 10, 5}, gt[0]) == 0.5);
  CHECK_FALSE(is_correct(1, {0, 0, 10, 5}, 1, gt));
  const std::vector<BBox> two{{50, 50, 60, 60}, {0, 0, 10, 10}};
  CHECK(is_correct(1, {0, 0, 10, 9}, 1, two));
}

TEST_CASE("perfect predictions give zero error in every mode") {
  std::vector<PredictionRecord> preds;
  std::vector<GroundTruth> gt;
  for (int i = 0; i < 5; ++i) {
    const BBox b{double(i), 0, double(i + 10), 10};
    gt.push_back({"i" + std::to_string(i), i % 3, {b}});
    std::vector<int> ranked{i % 3, (i + 1) % 3, (i + 2) % 3};
    preds.push_back(record(gt.back().image_id, ranked, {{0, {b}}, {1, {b}}, {2, {b}}}));
  }
  const auto r = evaluate_report(preds, gt);
  CHECK(r.top1_loc_err == 0.0);
  CHECK(r.top5_loc_err == 0.0);
  CHECK(r.top5_star_loc_err == 0.0);
  CHECK(r.gt_known_loc_err == 0.0);
  CHECK(r.top1_cls_err == 0.0);
  CHECK(r.images == 5);
}

TEST_CASE("three-image hand enumeration") {
  const BBox good{0, 0, 10, 10}, bad{20, 20, 30, 30};
  const std::vector<GroundTruth> gt{{"a", 0, {good}}, {"b", 1, {good}}, {"c", 2, {good}}};
  const std::vector<PredictionRecord> preds{
      record("a", {1, 0, 2}, {{0, {good}}, {1, {good}}, {2, {good}}}),  // class wrong
      record("b", {1, 0, 2}, {{0, {good}}, {1, {bad}}, {2, {good}}}),   // box wrong
      record("c", {2, 0, 1}, {{0, {bad}}, {1, {bad}}, {2, {good}}}),    // correct
  };
  CHECK(evaluate(preds, gt, EvalMode::kTop1).error == doctest::Approx(200.0 / 3));
  CHECK(evaluate(preds, gt, EvalMode::kGtKnown).error == doctest::Approx(100.0 / 3));
  CHECK(evaluate(preds, gt, EvalMode::kTop5).error == doctest::Approx(100.0 / 3));
}

TEST_CASE("star candidates use the second box of ranks 1-2") {
  const BBox good{0, 0, 10, 10}, bad{20, 20, 30, 30};
  const std::vector<GroundTruth> gt{{"a", 0, {good}}};
  const std::vector<PredictionRecord> preds{record("a", {0, 1, 2}, {{0, {bad, good}}, {1, {bad}}, {2, {bad}}})};
  CHECK(evaluate(preds, gt, EvalMode::kTop5).error == 100.0);
  CHECK(evaluate(preds, gt, EvalMode::kTop5Star).error == 0.0);
  // Rank 4 is outside the star set but inside top-5.
  const std::vector<GroundTruth> gt4{{"a", 3, {good}}};
  const std::vector<PredictionRecord> p4{
      record("a", {0, 1, 2, 3}, {{0, {bad}}, {1, {bad}}, {2, {bad}}, {3, {good}}})};
  CHECK(evaluate(p4, gt4, EvalMode::kTop5).error == 0.0);
  CHECK(evaluate(p4, gt4, EvalMode::kTop5Star).error == 100.0);
}

TEST_CASE("missing predictions are rejected") {
  const std::vector<GroundTruth> gt{{"a", 0, {{0, 0, 1, 1}}}};
  const std::vector<PredictionRecord> none;
  CHECK_THROWS_AS(evaluate(none, gt, EvalMode::kTop1), Error);
}

TEST_CASE("100-image fixture matches per-image enumeration") {
  for (unsigned seed : {1u, 2u, 3u}) {
    const auto f = testing::random_eval_fixture(100, 4, seed);
    for (EvalMode m : {EvalMode::kTop1, EvalMode::kTop5, EvalMode::kTop5Star, EvalMode::kGtKnown})
      CHECK(evaluate(f.preds, f.gt, m).error == testing::oracle_error(f.preds, f.gt, m));
  }
}

TEST_CASE("mode ordering when star candidates cover top-5") {
  // With three classes the star set is a superset of the top-5 set.
  const auto f = testing::random_eval_fixture(100, 3, 9);
  const auto r = evaluate_report(f.preds, f.gt);
  CHECK(r.top5_star_loc_err <= r.top5_loc_err);
  CHECK(r.top5_loc_err <= r.top1_loc_err);
  CHECK(r.gt_known_loc_err <= r.top1_loc_err);
}

TEST_CASE("metrics are invariant to image order") {
  auto f = testing::random_eval_fixture(60, 4, 4);
  const auto before = evaluate_report(f.preds, f.gt);
  std::mt19937 gen(1);
  std::shuffle(f.preds.begin(), f.preds.end(), gen);
  std::shuffle(f.gt.begin(), f.gt.end(), gen);
  const auto after = evaluate_report(f.preds, f.gt);
  CHECK(before.top1_loc_err == after.top1_loc_err);
  CHECK(before.top5_star_loc_err == after.top5_star_loc_err);
  CHECK(before.gt_known_loc_err == after.gt_known_loc_err);
}

TEST_CASE("external ranking: identity, oracle and degradation") {
  const auto f = testing::random_eval_fixture(100, 4, 21);
  ExternalRanking own, oracle;
  for (const auto& p : f.preds) own[p.image_id] = p.ranked_classes;
  for (const auto& g : f.gt) {
    std::vector<int> r{g.label};
    for (int c = 0; c < 4; ++c)
      if (c != g.label) r.push_back(c);
    oracle[g.image_id] = r;
  }
  const auto plain = evaluate_report(f.preds, f.gt);
  const auto same = evaluate_with_external_predictions(own, f.preds, f.gt);
  CHECK(same.top1_loc_err == plain.top1_loc_err);
  CHECK(same.top5_loc_err == plain.top5_loc_err);
  CHECK(same.top5_star_loc_err == plain.top5_star_loc_err);
  CHECK(same.gt_known_loc_err == plain.gt_known_loc_err);
  const auto best = evaluate_with_external_predictions(oracle, f.preds, f.gt);
  CHECK(best.top1_loc_err == best.gt_known_loc_err);
  CHECK(best.top1_cls_err == 0.0);

  // Demote the true class for a growing prefix of images.
  double previous = best.top1_loc_err;
  for (int wrong = 10; wrong <= 100; wrong += 10) {
    ExternalRanking degraded = oracle;
    int k = 0;
    for (auto& [id, r] : degraded)
      if (k++ < wrong) std::swap(r[0], r[1]);
    const double err = evaluate_with_external_predictions(degraded, f.preds, f.gt).top1_loc_err;
    CHECK(err >= previous);
    previous = err;
  }
  CHECK(previous == 100.0);

  ExternalRanking partial = oracle;
  partial.erase(partial.begin());
  CHECK_THROWS_AS(evaluate_with_external_predictions(partial, f.preds, f.gt), Error);
}

TEST_CASE("prediction and ranking files round trip") {
  const auto f = testing::random_eval_fixture(20, 4, 5);
  auto preds = f.preds;
  for (auto& p : preds)
    for (size_t i = 0; i < p.ranked_classes.size(); ++i) p.scores.push_back(1.0 / (i + 2));
  const std::string path = temp_file("preds.tsv");
  write_predictions(preds, path);
  const auto back = read_predictions(path);
  REQUIRE(back.size() == preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    CHECK(back[i].image_id == preds[i].image_id);
    CHECK(back[i].ranked_classes == preds[i].ranked_classes);
    CHECK(back[i].scores == preds[i].scores);
    CHECK(back[i].boxes == preds[i].boxes);
  }

  ExternalRanking ranking{{"x", {3, 1, 0}}, {"y", {2}}};
  const std::string rpath = temp_file("rank.tsv");
  write_external_ranking(ranking, rpath);
  CHECK(read_external_ranking(rpath) == ranking);
  std::ofstream(rpath) << "image_id\tclass_1\nx\t1\t1\n";
  CHECK_THROWS_AS(read_external_ranking(rpath), Error);
}

TEST_CASE("report key=value round trip") {
  EvalReport r;
  r.images = 500;
  r.threshold = 0.35;
  r.top1_loc_err = 12.4;
  r.top5_loc_err = 10.0;
  r.top5_star_loc_err = 9.2;
  r.gt_known_loc_err = 11.8;
  r.top1_cls_err = 1.2;
  r.top5_cls_err = 0.0;
  const auto back = report_from_key_values(report_to_key_values(r));
  CHECK(back.images == r.images);
  CHECK(back.threshold == r.threshold);
  CHECK(back.top1_loc_err == r.top1_loc_err);
  CHECK(back.top5_star_loc_err == r.top5_star_loc_err);
  CHECK(back.gt_known_loc_err == r.gt_known_loc_err);
  CHECK_THROWS_AS(report_from_key_values("images = 3\n"), Error);
}

}  // TEST_SUITE
