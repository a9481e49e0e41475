#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "adsbae/attacks.hpp"
#include "adsbae/dae.hpp"
#include "adsbae/dataset.hpp"
#include "adsbae/error.hpp"
#include "adsbae/eval/pipeline.hpp"
#include "adsbae/eval/synth.hpp"
#include "adsbae/ingest.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace adsbae;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string detectors;
  std::string score_variant;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--config", c.config, "pipeline configuration (JSON)");
  cmd->add_option("--seed", c.seed, "run seed; overrides the configuration");
  if (with_out) cmd->add_option("--out", c.out, "output path")->required();
  cmd->add_option("--detectors", c.detectors, "comma-separated subset of dae,lstm-ae,iforest");
  cmd->add_option("--score-variant", c.score_variant, "mse or eq1");
}

eval::PipelineConfig resolve_config(const Common& c) {
  eval::PipelineConfig cfg = c.config.empty() ? eval::parse_pipeline_config(json::object()) : eval::load_pipeline_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.detectors.empty()) cfg.detectors = eval::parse_detector_list(c.detectors);
  if (!c.score_variant.empty()) cfg.score_variant = dae::parse_score_variant(c.score_variant);
  return cfg;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path model_path(const fs::path& dir, eval::Detector d) { return dir / (eval::to_string(d) + ".json"); }

std::vector<dataset::FeatureWindow> read_records_arg(const std::string& path) {
  const fs::path p(path);
  if (fs::is_directory(p)) {
    std::vector<dataset::FeatureWindow> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto w = dataset::read_records(f);
      out.insert(out.end(), w.begin(), w.end());
    }
    return out;
  }
  return dataset::read_records(p);
}

eval::TrainedDetectors load_detectors(const fs::path& dir, const std::vector<eval::Detector>& wanted) {
  eval::TrainedDetectors t;
  for (auto d : wanted) {
    const auto path = model_path(dir, d);
    if (!fs::exists(path)) throw IoError("missing model file " + path.string());
    if (d == eval::Detector::IForest) {
      auto [forest, standardizer] = eval::iforest_from_json(read_json(path));
      t.iforest = std::move(forest);
      t.standardizer = std::move(standardizer);
    } else {
      auto model = dae::load_checkpoint(path);
      if (!model.thresholds) throw ContractError(path.string() + " is not calibrated; run the calibrate command");
      (d == eval::Detector::Dae ? t.dae : t.lstm_ae) = std::move(model);
    }
  }
  return t;
}

attacks::Suite read_suite(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  attacks::Suite suite;
  suite.seed = manifest.value("seed", std::uint64_t{0});
  for (const auto& d : manifest.at("datasets")) {
    const auto name = d.at("name").get<std::string>();
    const auto file = dir / (name + ".csv");
    if (!fs::exists(file) || fs::file_size(file) == 0) continue;
    auto ds = attacks::import_labeled(file, name);
    ds.source.clear();
    if (!d.at("kind").is_null()) ds.kind = attacks::parse_attack_kind(d["kind"].get<std::string>());
    suite.datasets.push_back(std::move(ds));
  }
  return suite;
}

int cmd_synth(const Common& c, const std::string& out) {
  auto cfg = resolve_config(c);
  if (!cfg.data.synthetic) throw ConfigError("the configuration has no synthetic data section");
  const auto flights = eval::load_flights(cfg);
  ingest::write_trajectories_csv(out, flights);
  std::cerr << "wrote " << flights.size() << " synthetic flights to " << out << '\n';
  return 0;
}

int cmd_ingest(const Common& c, const std::string& input, const std::string& format, const std::string& airports,
               std::size_t stride) {
  auto cfg = resolve_config(c);
  if (!input.empty()) {
    cfg.data.synthetic.reset();
    cfg.data.input = input;
    cfg.data.format = ingest::parse_format(format);
    cfg.data.airports = airports;
  }
  const fs::path out(c.out);
  fs::create_directories(out);
  const auto flights = eval::clean_flights(eval::load_flights(cfg), cfg);
  ingest::write_trajectories_csv(out / "clean.csv", flights);
  const auto windows = eval::build_windows(flights, cfg, stride == 0 ? cfg.train_stride : stride, "windows/training");
  dataset::write_records(windows, out / "windows.jsonl");
  std::cerr << flights.size() << " flights, " << windows.size() << " windows written to " << out.string() << '\n';
  return 0;
}

int cmd_attack(const Common& c, const std::string& input) {
  auto cfg = resolve_config(c);
  auto loaded = ingest::load_trajectories(input, ingest::InputFormat::Csv);
  auto sc = cfg.suite;
  sc.seed = eval::derive_seed(cfg.seed, "suite");
  const auto suite = attacks::build_eval_suite(loaded.trajectories, sc);
  attacks::write_suite(suite, c.out);
  for (const auto& ds : suite.datasets) std::cerr << ds.name << ": " << ds.flights.size() << " flights\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& records, const std::string& validation) {
  auto cfg = resolve_config(c);
  const auto training = read_records_arg(records);
  const auto val = validation.empty() ? std::vector<dataset::FeatureWindow>{} : read_records_arg(validation);
  auto detectors = eval::train_detectors(training, val, cfg, &std::cerr);
  const fs::path out(c.out);
  fs::create_directories(out);
  for (auto d : cfg.detectors) {
    if (d == eval::Detector::IForest) {
      write_json(model_path(out, d), eval::iforest_to_json(*detectors.iforest, detectors.standardizer));
    } else {
      auto& model = d == eval::Detector::Dae ? *detectors.dae : *detectors.lstm_ae;
      dae::save_checkpoint(model, model_path(out, d));
    }
    std::cerr << "saved " << model_path(out, d).string() << '\n';
  }
  return 0;
}

int cmd_calibrate(const Common& c, const std::string& models, const std::string& records) {
  auto cfg = resolve_config(c);
  const auto training = read_records_arg(records);
  for (auto d : cfg.detectors) {
    const auto path = model_path(models, d);
    if (d == eval::Detector::IForest) {
      auto [forest, standardizer] = eval::iforest_from_json(read_json(path));
      const auto standardized = dataset::apply_standardizer(standardizer, training);
      forest.threshold = dae::three_sigma_threshold(forest.scores(eval::flatten(standardized)));
      write_json(path, eval::iforest_to_json(forest, standardizer));
      std::cerr << eval::to_string(d) << ": threshold " << forest.threshold << '\n';
      continue;
    }
    auto model = dae::load_checkpoint(path);
    if (!model.standardizer) throw ContractError(path.string() + " has no standardizer");
    const auto standardized = dataset::apply_standardizer(*model.standardizer, training);
    const auto th = dae::calibrate_thresholds(model, standardized, cfg.score_variant);
    dae::save_checkpoint(model, path);
    std::cerr << eval::to_string(d) << ": thresholds";
    for (double v : th.values) std::cerr << ' ' << v;
    std::cerr << '\n';
  }
  return 0;
}

int cmd_detect(const Common& c, const std::string& models, const std::string& records) {
  auto cfg = resolve_config(c);
  const auto windows = read_records_arg(records);
  const auto detectors = load_detectors(models, cfg.detectors);
  std::ofstream out(c.out);
  if (!out) throw IoError("cannot write " + c.out);
  out << "detector,window,flight_id,start_timestamp,phase,label,score,threshold,flagged\n";
  for (auto d : cfg.detectors) {
    const auto verdicts = eval::run_detector(detectors, d, windows);
    for (const auto& v : verdicts) {
      char line[512];
      std::snprintf(line, sizeof line, "%s,%zu,%s,%.3f,%s,%d,%.10g,%.10g,%d\n", eval::to_string(d).c_str(),
                    v.window_index, v.flight_id.c_str(), v.start_timestamp, std::string(to_string(v.phase)).c_str(),
                    v.label, v.score, v.threshold, v.flagged ? 1 : 0);
      out << line;
    }
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& suite_dir, const std::string& models) {
  auto cfg = resolve_config(c);
  const auto suite = read_suite(suite_dir);
  const auto detectors = load_detectors(models, cfg.detectors);
  const fs::path out(c.out);
  fs::create_directories(out);
  std::optional<fs::path> traces;
  if (cfg.write_traces) traces = out / "traces";
  const auto report = eval::evaluate_suite(suite, detectors, cfg, traces);
  write_json(out / "report.json", eval::report_json(report));
  std::ofstream(out / "report.csv") << eval::report_csv(report);
  std::cout << eval::report_csv(report);
  return 0;
}

int cmd_pipeline(const Common& c, bool quiet) {
  const auto cfg = resolve_config(c);
  const auto result = eval::run_pipeline(cfg, c.out, quiet ? nullptr : &std::cerr);
  std::cout << eval::report_csv(result.report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ADS-B anomaly detection with a discriminatory auto-encoder"};
  app.require_subcommand(1);

  Common common;
  std::string input, format = "csv", airports, records, validation, models, suite_dir;
  std::size_t stride = 0;
  bool quiet = false;

  auto* synth = app.add_subcommand("synth", "generate synthetic raw flights (CSV)");
  add_common(synth, common);

  auto* ingest_cmd = app.add_subcommand("ingest", "clean flights and cut feature windows");
  add_common(ingest_cmd, common);
  ingest_cmd->add_option("--input", input, "raw messages; defaults to the configured data source");
  ingest_cmd->add_option("--format", format, "csv or jsonl");
  ingest_cmd->add_option("--airports", airports, "airports sidecar (icao,latitude,longitude)");
  ingest_cmd->add_option("--stride", stride, "window stride; defaults to the training stride");

  auto* attack = app.add_subcommand("attack", "build the labeled evaluation suite from clean flights");
  add_common(attack, common);
  attack->add_option("--input", input, "clean flights (CSV)")->required();

  auto* train = app.add_subcommand("train", "train detectors on feature windows");
  add_common(train, common);
  train->add_option("--records", records, "training windows (.jsonl file or shard directory)")->required();
  train->add_option("--validation", validation, "validation windows");

  auto* calibrate = app.add_subcommand("calibrate", "set 3-sigma thresholds from training windows");
  add_common(calibrate, common, false);
  calibrate->add_option("--models", models, "model directory written by train")->required();
  calibrate->add_option("--records", records, "training windows")->required();

  auto* detect = app.add_subcommand("detect", "score windows and write per-window verdicts (CSV)");
  add_common(detect, common);
  detect->add_option("--models", models, "model directory")->required();
  detect->add_option("--records", records, "windows to score")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate detectors on an attack suite");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--suite", suite_dir, "suite directory written by attack")->required();
  eval_cmd->add_option("--models", models, "model directory")->required();

  auto* pipeline = app.add_subcommand("pipeline", "run every stage and write the report");
  add_common(pipeline, common);
  pipeline->add_flag("--quiet", quiet, "no progress output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(common, common.out);
    if (ingest_cmd->parsed()) return cmd_ingest(common, input, format, airports, stride);
    if (attack->parsed()) return cmd_attack(common, input);
    if (train->parsed()) return cmd_train(common, records, validation);
    if (calibrate->parsed()) return cmd_calibrate(common, models, records);
    if (detect->parsed()) return cmd_detect(common, models, records);
    if (eval_cmd->parsed()) return cmd_eval(common, suite_dir, models);
    if (pipeline->parsed()) return cmd_pipeline(common, quiet);
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
