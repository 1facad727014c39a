#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "fs_util.hpp"
#include "spg/dataset.hpp"
#include "spg/evaluation.hpp"
#include "spg/map_dump.hpp"
#include "spgm_oracle.hpp"

using namespace spg;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status;
  std::string output;
};

// Runs the CLI with stdout and stderr captured to a file.
RunResult cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "spg_tests" / "cli_output.txt";
  fs::create_directories(log.parent_path());
  const std::string cmd = std::string("\"") + SPG_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  const auto bytes = testing::file_bytes(log);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, std::string(bytes.begin(), bytes.end())};
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

const char* kSmokeConfig = R"([model]
input_height = 32
input_width = 32
num_classes = 4
stem = 8/down
a1 = 8
a2 = 8/down
a3 = 8
b_adapter_filters = 4
b_shared_filters = 4
c_head_filters = 4

[train]
epochs = 1
batch_size = 8
base_lr = 0.01
added_lr = 0.01
lr_decay_factor = 1
)";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-data twice gives identical trees") {
  const fs::path root = testing::scratch_dir("cli_gen");
  const std::string common = " --set train_images=6 --set val_images=3 --set test_images=3 --set image_size=32";
  REQUIRE(cli("gen-data --seed 7 --out " + quoted(root / "a") + common).status == 0);
  REQUIRE(cli("gen-data --seed 7 --out " + quoted(root / "b") + common).status == 0);
  const auto a = testing::tree_bytes(root / "a");
  CHECK(a.size() == 6 + 3 + 3 + 6 + 1);
  CHECK(a == testing::tree_bytes(root / "b"));
  REQUIRE(cli("gen-data --seed 8 --out " + quoted(root / "c") + common).status == 0);
  CHECK(a != testing::tree_bytes(root / "c"));
}

TEST_CASE("usage errors exit nonzero with a message") {
  const auto none = cli("");
  CHECK(none.status != 0);
  const auto unknown = cli("frobnicate");
  CHECK(unknown.status != 0);
  CHECK(unknown.output.find("Usage") != std::string::npos);
  const auto flag = cli("gen-data --out /tmp/x --bogus 1");
  CHECK(flag.status != 0);
  CHECK(flag.output.find("bogus") != std::string::npos);
  CHECK(cli("train --config a.cfg").status != 0);  // missing --data and --out
  CHECK(cli("gen-data --out /tmp/x --set nonsense").status != 0);
  const auto missing = cli("eval --checkpoint /nonexistent/ck.spgc --data /nonexistent");
  CHECK(missing.status != 0);
  CHECK(missing.output.find("error (") != std::string::npos);
  const auto bad_key = cli("gen-data --out " + quoted(testing::scratch_dir("cli_badkey")) + " --set colour=1");
  CHECK(bad_key.status != 0);
  CHECK(bad_key.output.find("colour") != std::string::npos);
}

TEST_CASE("eval of perfect predictions reports zero error") {
  const fs::path root = testing::scratch_dir("cli_perfect");
  DatasetSpec spec;
  spec.train_images = 0;
  spec.val_images = 0;
  spec.test_images = 10;
  spec.image_size = 32;
  generate_dataset(spec, root.string());
  const auto records = load_dataset((root / "test").string());
  std::ostringstream tsv;
  tsv << "image_id\tclass_id\trank\tx0\ty0\tx1\ty1\tscore\n";
  for (const auto& r : records) {
    int rank = 1;
    const BBox& b = r.boxes.front();
    auto row = [&](int cls) {
      tsv << r.id << '\t' << cls << '\t' << rank++ << '\t' << b.x0 << '\t' << b.y0 << '\t' << b.x1 << '\t' << b.y1
          << "\t0.5\n";
    };
    row(r.label);
    for (int c = 0; c < 4; ++c)
      if (c != r.label) row(c);
  }
  testing::write_text(root / "perfect.tsv", tsv.str());
  const auto res = cli("eval --predictions " + quoted(root / "perfect.tsv") + " --data " + quoted(root / "test") +
                       " --report " + quoted(root / "report.txt"));
  INFO(res.output);
  REQUIRE(res.status == 0);
  const auto bytes = testing::file_bytes(root / "report.txt");
  const EvalReport rep = report_from_key_values(std::string(bytes.begin(), bytes.end()));
  CHECK(rep.images == 10);
  CHECK(rep.top1_loc_err == 0.0);
  CHECK(rep.top5_loc_err == 0.0);
  CHECK(rep.top5_star_loc_err == 0.0);
  CHECK(rep.gt_known_loc_err == 0.0);
  CHECK(rep.top1_cls_err == 0.0);
  CHECK(res.output.find("0.00") != std::string::npos);
}

TEST_CASE("end to end: gen-data, train, eval, export-maps, render") {
  const fs::path root = testing::scratch_dir("cli_e2e");
  const fs::path data = root / "data";
  REQUIRE(cli("gen-data --seed 5 --out " + quoted(data) +
              " --set train_images=24 --set val_images=8 --set test_images=8 --set image_size=32")
              .status == 0);
  testing::write_text(root / "smoke.cfg", kSmokeConfig);
  const fs::path ckpt = root / "model.spgc";
  const auto tr = cli("train --config " + quoted(root / "smoke.cfg") + " --data " + quoted(data) + " --out " +
                      quoted(ckpt) + " --log " + quoted(root / "train.log") + " --set train.seed=3");
  INFO(tr.output);
  REQUIRE(tr.status == 0);
  REQUIRE(fs::exists(ckpt));
  // One log line per step: 24 images / batch 8.
  const auto log = testing::file_bytes(root / "train.log");
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);

  const auto ev = cli("eval --checkpoint " + quoted(ckpt) + " --data " + quoted(data) + " --report " +
                      quoted(root / "report.txt") + " --predictions-out " + quoted(root / "preds.tsv"));
  INFO(ev.output);
  REQUIRE(ev.status == 0);
  const auto rb = testing::file_bytes(root / "report.txt");
  const EvalReport rep = report_from_key_values(std::string(rb.begin(), rb.end()));
  CHECK(rep.images == 8);
  CHECK(rep.threshold > 0.0);
  CHECK(rep.threshold < 1.0);
  for (double e : {rep.top1_loc_err, rep.top5_loc_err, rep.top5_star_loc_err, rep.gt_known_loc_err})
    CHECK((e >= 0.0 && e <= 100.0));
  CHECK(read_predictions((root / "preds.tsv").string()).size() == 8);

  // Scoring the written predictions reproduces the report.
  const auto again = cli("eval --predictions " + quoted(root / "preds.tsv") + " --data " + quoted(data / "test") +
                         " --report " + quoted(root / "report2.txt"));
  REQUIRE(again.status == 0);
  const auto rb2 = testing::file_bytes(root / "report2.txt");
  const EvalReport rep2 = report_from_key_values(std::string(rb2.begin(), rb2.end()));
  CHECK(rep2.top1_loc_err == rep.top1_loc_err);
  CHECK(rep2.gt_known_loc_err == rep.gt_known_loc_err);

  const fs::path maps = root / "maps";
  const auto ex = cli("export-maps --checkpoint " + quoted(ckpt) + " --data " + quoted(data) +
                      " --ids test_00000,test_00003 --out " + quoted(maps));
  INFO(ex.output);
  REQUIRE(ex.status == 0);
  for (const char* id : {"test_00000", "test_00003"})
    for (const char* kind : {"attention", "B1", "B2", "C", "fused_mask"}) {
      const fs::path p = maps / (std::string(id) + "_" + kind + ".spgm");
      INFO(p.string());
      REQUIRE(fs::exists(p));
      const auto raw = testing::parse_spgm(testing::file_bytes(p));
      REQUIRE(raw);
      CHECK(raw->id == id);
      CHECK(raw->kind == static_cast<uint32_t>(map_kind_from_name(kind)));
      CHECK(raw->values.size() == size_t(raw->height) * raw->width);
      const MapDump lib = read_map_dump(p.string());
      CHECK(lib.map.scores == raw->values);
      for (float v : raw->values) {
        if (std::string(kind) == "fused_mask") {
          CHECK((v == 0.0f || v == 1.0f || v == 255.0f));
        } else {
          CHECK(std::isfinite(v));
        }
      }
    }
  CHECK(std::distance(fs::directory_iterator(maps), fs::directory_iterator()) == 10);
  CHECK(cli("export-maps --checkpoint " + quoted(ckpt) + " --data " + quoted(data) + " --ids nope --out " +
            quoted(maps))
            .status != 0);

  // Dumps are reproducible.
  const fs::path maps2 = root / "maps2";
  REQUIRE(cli("export-maps --checkpoint " + quoted(ckpt) + " --data " + quoted(data) +
              " --ids test_00000,test_00003 --out " + quoted(maps2))
              .status == 0);
  CHECK(testing::tree_bytes(maps) == testing::tree_bytes(maps2));

  const fs::path overlays = root / "overlays";
  const auto rd = cli("render --checkpoint " + quoted(ckpt) + " --data " + quoted(data) +
                      " --ids test_00001 --truth --out " + quoted(overlays));
  INFO(rd.output);
  REQUIRE(rd.status == 0);
  const Image img = read_ppm((overlays / "test_00001_overlay.ppm").string());
  CHECK(img.width == 32);
  CHECK(img.height == 32);
}

}  // TEST_SUITE
