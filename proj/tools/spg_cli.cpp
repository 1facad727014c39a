// Command-line front end; talks to the library only through spg.h.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "spg/spg.h"

namespace {

struct Failure {
  int code;
};

void check(spg_status st) {
  if (st != SPG_OK) {
    std::cerr << "error (" << spg_status_name(st) << "): " << spg_last_error() << "\n";
    throw Failure{static_cast<int>(st) + 1};
  }
}

// "key=value" or "section.key=value".
struct Setting {
  std::string section, key, value;
};

Setting parse_setting(const std::string& s, bool sectioned) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--set", "expected key=value, got '" + s + "'");
  Setting out{"", s.substr(0, eq), s.substr(eq + 1)};
  if (sectioned) {
    const auto dot = out.key.find('.');
    if (dot == std::string::npos)
      throw CLI::ValidationError("--set", "expected section.key=value, got '" + s + "'");
    out.section = out.key.substr(0, dot);
    out.key = out.key.substr(dot + 1);
  }
  return out;
}

class Network {
 public:
  explicit Network(const std::string& path) { check(spg_network_load(path.c_str(), &net_)); }
  ~Network() { spg_network_free(net_); }
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  const spg_network* get() const { return net_; }

 private:
  spg_network* net_ = nullptr;
};

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

std::string report_table(const spg_eval_report& r) {
  size_t needed = 0;
  check(spg_report_table(&r, nullptr, 0, &needed));
  std::string buf(needed, '\0');
  check(spg_report_table(&r, buf.data(), buf.size(), &needed));
  buf.resize(needed - 1);
  return buf;
}

std::string split_dir(const std::string& data, const std::string& split) {
  std::ifstream probe(data + "/labels.csv");
  return probe ? data : data + "/" + split;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-produced guidance localization toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic shapes dataset");
  std::string gen_config, gen_out;
  std::vector<std::string> gen_sets;
  long long gen_seed = -1;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--config", gen_config, "Dataset config file ([dataset] section)");
  gen->add_option("--seed", gen_seed, "Generator seed (overrides the config)")->check(CLI::NonNegativeNumber);
  gen->add_option("--set", gen_sets, "Override a dataset key: key=value");

  // train
  auto* tr = app.add_subcommand("train", "Train a network from a config file");
  std::string tr_config, tr_data, tr_out, tr_log;
  std::vector<std::string> tr_sets;
  bool tr_resume = false;
  tr->add_option("--config", tr_config, "Run config file")->required();
  tr->add_option("--data", tr_data, "Dataset root or train split directory")->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--log", tr_log, "Per-step TSV log");
  tr->add_option("--set", tr_sets, "Override a run key: section.key=value");
  tr->add_flag("--resume", tr_resume, "Continue from an existing checkpoint at --out");

  // eval
  auto* ev = app.add_subcommand("eval", "Calibrate on val, evaluate on test, write a report");
  std::string ev_ckpt, ev_preds, ev_data, ev_external, ev_report, ev_preds_out;
  auto* ev_ckpt_opt = ev->add_option("--checkpoint", ev_ckpt, "Checkpoint to evaluate");
  auto* ev_preds_opt = ev->add_option("--predictions", ev_preds, "Score an existing prediction TSV instead");
  ev_ckpt_opt->excludes(ev_preds_opt);
  ev->add_option("--data", ev_data, "Dataset root (with --predictions: the split directory)")->required();
  ev->add_option("--external", ev_external, "External class ranking TSV");
  ev->add_option("--report", ev_report, "Write key=value report here");
  ev->add_option("--predictions-out", ev_preds_out, "Write prediction TSV here (checkpoint mode)");

  // export-maps
  auto* ex = app.add_subcommand("export-maps", "Dump attention, branch and fused-mask maps");
  std::string ex_ckpt, ex_data, ex_split = "test", ex_out;
  std::vector<std::string> ex_ids;
  double ex_low = 0.05, ex_high = 0.5;
  ex->add_option("--checkpoint", ex_ckpt)->required();
  ex->add_option("--data", ex_data, "Dataset root or split directory")->required();
  ex->add_option("--split", ex_split, "Split name under a dataset root")->capture_default_str();
  ex->add_option("--ids", ex_ids, "Image ids (default: whole split)")->delimiter(',');
  ex->add_option("--fuse-low", ex_low)->capture_default_str();
  ex->add_option("--fuse-high", ex_high)->capture_default_str();
  ex->add_option("--out", ex_out, "Output directory")->required();

  // render
  auto* rd = app.add_subcommand("render", "Overlay heat maps and boxes onto images (PPM)");
  std::string rd_ckpt, rd_data, rd_split = "test", rd_out;
  std::vector<std::string> rd_ids;
  double rd_threshold = 0.2;
  bool rd_truth = false;
  rd->add_option("--checkpoint", rd_ckpt)->required();
  rd->add_option("--data", rd_data, "Dataset root or split directory")->required();
  rd->add_option("--split", rd_split, "Split name under a dataset root")->capture_default_str();
  rd->add_option("--ids", rd_ids, "Image ids (default: whole split)")->delimiter(',');
  rd->add_option("--threshold", rd_threshold, "Box threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  rd->add_flag("--truth", rd_truth, "Also draw ground-truth boxes");
  rd->add_option("--out", rd_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*gen) {
      spg_dataset_spec* spec = nullptr;
      check(spg_dataset_spec_create(gen_config.empty() ? nullptr : gen_config.c_str(), &spec));
      std::unique_ptr<spg_dataset_spec, void (*)(spg_dataset_spec*)> guard(spec, spg_dataset_spec_free);
      for (const auto& s : gen_sets) {
        const Setting kv = parse_setting(s, false);
        check(spg_dataset_spec_set(spec, kv.key.c_str(), kv.value.c_str()));
      }
      if (gen_seed >= 0) check(spg_dataset_spec_set(spec, "seed", std::to_string(gen_seed).c_str()));
      check(spg_generate_dataset(spec, gen_out.c_str()));
      std::cout << "wrote dataset to " << gen_out << "\n";
    } else if (*tr) {
      spg_run_config* cfg = nullptr;
      check(spg_run_config_create(tr_config.c_str(), &cfg));
      std::unique_ptr<spg_run_config, void (*)(spg_run_config*)> guard(cfg, spg_run_config_free);
      for (const auto& s : tr_sets) {
        const Setting kv = parse_setting(s, true);
        check(spg_run_config_set(cfg, kv.section.c_str(), kv.key.c_str(), kv.value.c_str()));
      }
      check(spg_train(cfg, tr_data.c_str(), tr_out.c_str(), tr_log.empty() ? nullptr : tr_log.c_str(),
                      tr_resume ? 1 : 0));
      std::cout << "wrote checkpoint " << tr_out << "\n";
    } else if (*ev) {
      const char* external = ev_external.empty() ? nullptr : ev_external.c_str();
      spg_eval_report report{};
      if (!ev_preds.empty()) {
        check(spg_evaluate_predictions(ev_preds.c_str(), ev_data.c_str(), external, &report));
      } else if (!ev_ckpt.empty()) {
        Network net(ev_ckpt);
        check(spg_evaluate_checkpoint(net.get(), ev_data.c_str(), external,
                                      ev_preds_out.empty() ? nullptr : ev_preds_out.c_str(), &report));
      } else {
        std::cerr << "error: eval needs --checkpoint or --predictions\n\n" << ev->help();
        return 2;
      }
      if (!ev_report.empty()) check(spg_write_report(&report, ev_report.c_str()));
      std::cout << report_table(report);
    } else if (*ex) {
      Network net(ex_ckpt);
      const auto ids = c_strings(ex_ids);
      size_t written = 0;
      check(spg_export_maps(net.get(), split_dir(ex_data, ex_split).c_str(), ids.data(), ids.size(), ex_low,
                            ex_high, ex_out.c_str(), &written));
      std::cout << "wrote " << written << " map dumps to " << ex_out << "\n";
    } else if (*rd) {
      Network net(rd_ckpt);
      const auto ids = c_strings(rd_ids);
      size_t written = 0;
      check(spg_render(net.get(), split_dir(rd_data, rd_split).c_str(), ids.data(), ids.size(), rd_threshold,
                       rd_truth ? 1 : 0, rd_out.c_str(), &written));
      std::cout << "wrote " << written << " overlays to " << rd_out << "\n";
    }
  } catch (const Failure& f) {
    return f.code;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
