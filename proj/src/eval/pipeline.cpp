#include "adsbae/eval/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "adsbae/error.hpp"

namespace adsbae::eval {

namespace fs = std::filesystem;
using json = nlohmann::json;
using dataset::FeatureWindow;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename Fn>
auto stage(const std::string& name, std::ostream* log, Fn&& fn) -> decltype(fn()) {
  const auto t0 = std::chrono::steady_clock::now();
  if (log) *log << "[" << name << "] start\n" << std::flush;
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      if (log) {
        *log << "[" << name << "] done in "
             << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
      }
    } else {
      auto out = fn();
      if (log) {
        *log << "[" << name << "] done in "
             << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
      }
      return out;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration key '") + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string route_key(const Trajectory& t) { return t.departure.icao_code + ">" + t.arrival.icao_code; }

std::string file_safe(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.' || c == '@';
    if (!ok) c = '_';
  }
  return out;
}

std::string fixed(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string general(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json standardizer_json(const dataset::Standardizer& s) { return json{{"mean", s.mean}, {"stddev", s.stddev}}; }

dataset::Standardizer standardizer_from(const json& j) {
  dataset::Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) throw ContractError("standardizer: mean and stddev differ in length");
  return s;
}

std::vector<CalibrationSummary> summarize(std::span<const FeatureWindow> windows, std::span<const double> scores,
                                          const std::function<double(Phase)>& threshold_of) {
  std::vector<CalibrationSummary> out;
  for (Phase p : kAllPhases) out.push_back({std::string(to_string(p)), threshold_of(p), 0, 0});
  for (std::size_t i = 0; i < windows.size(); ++i) {
    auto& s = out[index_of(windows[i].phase)];
    ++s.windows;
    if (scores[i] > s.threshold) ++s.flagged;
  }
  return out;
}

void write_trace(const fs::path& path, std::span<const FeatureWindow> windows, const std::vector<Detector>& detectors,
                 const std::map<Detector, std::vector<dae::AnomalyVerdict>>& verdicts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "window,start_timestamp,phase,label";
  for (Detector d : detectors) {
    const auto n = to_string(d);
    out << ',' << n << "_score," << n << "_threshold," << n << "_flagged";
  }
  out << '\n';
  char ts[32];
  for (std::size_t i = 0; i < windows.size(); ++i) {
    std::snprintf(ts, sizeof ts, "%.3f", windows[i].start_timestamp);
    out << i << ',' << ts << ',' << to_string(windows[i].phase) << ',' << windows[i].label;
    for (Detector d : detectors) {
      const auto& v = verdicts.at(d)[i];
      out << ',' << general(v.score) << ',' << general(v.threshold) << ',' << (v.flagged ? 1 : 0);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string to_string(Detector d) {
  switch (d) {
    case Detector::Dae:
      return "dae";
    case Detector::LstmAe:
      return "lstm-ae";
    case Detector::IForest:
      return "iforest";
  }
  return "?";
}

Detector parse_detector(const std::string& text) {
  if (text == "dae") return Detector::Dae;
  if (text == "lstm-ae") return Detector::LstmAe;
  if (text == "iforest") return Detector::IForest;
  throw ConfigError("unknown detector '" + text + "' (expected dae, lstm-ae or iforest)");
}

std::vector<Detector> parse_detector_list(const std::string& text) {
  std::vector<Detector> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    const Detector d = parse_detector(item);
    if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
  }
  if (out.empty()) throw ConfigError("no detector selected");
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& component) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : component) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

// ---------------------------------------------------------------------------
// Configuration

PipelineConfig parse_pipeline_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  PipelineConfig c;
  read_if(j, "seed", c.seed);

  if (j.contains("data")) {
    const auto& d = j["data"];
    if (d.contains("synthetic")) {
      const auto& s = d["synthetic"];
      synth::SynthConfig sc;
      read_if(s, "flights", sc.flights);
      read_if(s, "routes", sc.routes);
      read_if(s, "min_route_km", sc.min_route_km);
      read_if(s, "max_route_km", sc.max_route_km);
      read_if(s, "cruise_altitude_min_ft", sc.cruise_altitude_min_ft);
      read_if(s, "cruise_altitude_max_ft", sc.cruise_altitude_max_ft);
      read_if(s, "cruise_speed_min_kt", sc.cruise_speed_min_kt);
      read_if(s, "cruise_speed_max_kt", sc.cruise_speed_max_kt);
      read_if(s, "max_wind_kt", sc.max_wind_kt);
      read_if(s, "waypoint_spread_km", sc.waypoint_spread_km);
      read_if(s, "turn_rate_deg_s", sc.turn_rate_deg_s);
      read_if(s, "drop_rate", sc.drop_rate);
      read_if(s, "outlier_rate", sc.outlier_rate);
      c.data.synthetic = sc;
    } else {
      std::string input, airports, format = "csv", delimiter = ",";
      read_if(d, "input", input);
      read_if(d, "airports", airports);
      read_if(d, "format", format);
      read_if(d, "delimiter", delimiter);
      if (input.empty()) throw ConfigError("data: either 'synthetic' or 'input' is required");
      if (delimiter.size() != 1) throw ConfigError("data.delimiter must be a single character");
      c.data.input = resolve(input, base_dir);
      c.data.airports = resolve(airports, base_dir);
      c.data.format = ingest::parse_format(format);
      c.data.delimiter = delimiter[0];
    }
  } else {
    c.data.synthetic = synth::SynthConfig{};
  }

  if (j.contains("ingest")) {
    const auto& g = j["ingest"];
    read_if(g, "period_s", c.resample.period);
    read_if(g, "max_gap_s", c.resample.max_gap);
    read_if(g, "max_jump_km", c.max_jump_km);
  }
  if (j.contains("phase")) {
    const auto& p = j["phase"];
    read_if(p, "altitude_low_ft", c.phase.altitude_low_ft);
    read_if(p, "altitude_high_ft", c.phase.altitude_high_ft);
    read_if(p, "level_band_fpm", c.phase.level_band_fpm);
    read_if(p, "cruise_speed_kt", c.phase.cruise_speed_kt);
    read_if(p, "speed_ramp_kt", c.phase.speed_ramp_kt);
    read_if(p, "smoothing_window", c.phase.smoothing_window);
    read_if(p, "cruise_override_km", c.phase.cruise_override_km);
  }
  if (j.contains("split")) {
    read_if(j["split"], "eval_fraction", c.eval_fraction);
    read_if(j["split"], "validation_fraction", c.validation_fraction);
  }
  if (j.contains("windows")) {
    const auto& w = j["windows"];
    read_if(w, "length", c.model.window_len);
    read_if(w, "train_stride", c.train_stride);
    read_if(w, "eval_stride", c.eval_stride);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    read_if(m, "encoder_hidden", c.model.encoder_hidden);
    read_if(m, "latent", c.model.latent);
    read_if(m, "decoder_expand", c.model.decoder_expand);
    read_if(m, "decoder_hidden", c.model.decoder_hidden);
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    read_if(t, "batch_size", c.training.batch_size);
    read_if(t, "max_epochs", c.training.max_epochs);
    read_if(t, "patience", c.training.patience);
    read_if(t, "learning_rate", c.training.adam.learning_rate);
    read_if(t, "beta1", c.training.adam.beta1);
    read_if(t, "beta2", c.training.adam.beta2);
    read_if(t, "epsilon", c.training.adam.epsilon);
  }
  if (j.contains("detectors")) {
    const auto& d = j["detectors"];
    if (d.is_string()) {
      c.detectors = parse_detector_list(d.get<std::string>());
    } else if (d.is_array()) {
      std::string joined;
      for (const auto& x : d) joined += x.get<std::string>() + ",";
      c.detectors = parse_detector_list(joined);
    } else {
      throw ConfigError("detectors must be a list or a comma-separated string");
    }
  }
  if (j.contains("score_variant")) c.score_variant = dae::parse_score_variant(j["score_variant"].get<std::string>());
  if (j.contains("iforest")) {
    read_if(j["iforest"], "trees", c.iforest.trees);
    read_if(j["iforest"], "subsample", c.iforest.subsample);
  }
  c.suite = j.contains("suite") ? attacks::parse_suite_config(j["suite"]) : attacks::default_suite_config(0);
  if (j.contains("suite") && !j["suite"].contains("datasets")) {
    const auto keep = c.suite;
    c.suite = attacks::default_suite_config(0);
    c.suite.include_world = keep.include_world;
    c.suite.cruise_margin_km = keep.cruise_margin_km;
  }
  read_if(j, "traces", c.write_traces);

  if (!(c.eval_fraction > 0.0 && c.eval_fraction < 1.0)) throw ConfigError("split.eval_fraction must lie in (0, 1)");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
    throw ConfigError("split.validation_fraction must lie in [0, 1)");
  }
  if (c.train_stride == 0 || c.eval_stride == 0) throw ConfigError("window strides must be >= 1");
  if (c.model.window_len == 0) throw ConfigError("windows.length must be >= 1");
  if (c.training.batch_size == 0 || c.training.max_epochs == 0) {
    throw ConfigError("training.batch_size and training.max_epochs must be >= 1");
  }
  if (c.iforest.trees == 0 || c.iforest.subsample == 0) throw ConfigError("iforest trees and subsample must be >= 1");
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read configuration " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("configuration " + path.string() + ": " + e.what());
  }
  return parse_pipeline_config(j, path.parent_path());
}

json to_json(const PipelineConfig& c) {
  json data;
  if (c.data.synthetic) {
    const auto& s = *c.data.synthetic;
    data["synthetic"] = {{"flights", s.flights},
                         {"routes", s.routes},
                         {"min_route_km", s.min_route_km},
                         {"max_route_km", s.max_route_km},
                         {"cruise_altitude_min_ft", s.cruise_altitude_min_ft},
                         {"cruise_altitude_max_ft", s.cruise_altitude_max_ft},
                         {"cruise_speed_min_kt", s.cruise_speed_min_kt},
                         {"cruise_speed_max_kt", s.cruise_speed_max_kt},
                         {"max_wind_kt", s.max_wind_kt},
                         {"waypoint_spread_km", s.waypoint_spread_km},
                         {"turn_rate_deg_s", s.turn_rate_deg_s},
                         {"drop_rate", s.drop_rate},
                         {"outlier_rate", s.outlier_rate}};
  } else {
    data = {{"input", c.data.input.string()},
            {"airports", c.data.airports.string()},
            {"format", c.data.format == ingest::InputFormat::Csv ? "csv" : "jsonl"},
            {"delimiter", std::string(1, c.data.delimiter)}};
  }
  std::vector<std::string> detectors;
  for (Detector d : c.detectors) detectors.push_back(to_string(d));
  json datasets = json::array();
  for (const auto& d : c.suite.datasets) {
    json x{{"name", d.name}, {"kind", attacks::to_string(d.kind)}, {"length", d.length}};
    if (d.kind == attacks::AttackKind::Drift) {
      x["target"] = attacks::to_string(d.target);
      x["step"] = d.step_magnitude;
    } else if (d.kind == attacks::AttackKind::Offset) {
      x["offset_deg"] = d.offset_deg;
    } else {
      x["crash"] = {{"vertical_rate_fpm", d.crash.vertical_rate_fpm},
                    {"groundspeed_decay_kt", d.crash.groundspeed_decay_kt},
                    {"ground_altitude_ft", d.crash.ground_altitude_ft},
                    {"min_groundspeed_kt", d.crash.min_groundspeed_kt}};
    }
    datasets.push_back(std::move(x));
  }
  return json{
      {"seed", c.seed},
      {"data", data},
      {"ingest", {{"period_s", c.resample.period}, {"max_gap_s", c.resample.max_gap}, {"max_jump_km", c.max_jump_km}}},
      {"phase",
       {{"altitude_low_ft", c.phase.altitude_low_ft},
        {"altitude_high_ft", c.phase.altitude_high_ft},
        {"level_band_fpm", c.phase.level_band_fpm},
        {"cruise_speed_kt", c.phase.cruise_speed_kt},
        {"speed_ramp_kt", c.phase.speed_ramp_kt},
        {"smoothing_window", c.phase.smoothing_window},
        {"cruise_override_km", c.phase.cruise_override_km}}},
      {"split", {{"eval_fraction", c.eval_fraction}, {"validation_fraction", c.validation_fraction}}},
      {"windows", {{"length", c.model.window_len}, {"train_stride", c.train_stride}, {"eval_stride", c.eval_stride}}},
      {"model",
       {{"encoder_hidden", c.model.encoder_hidden},
        {"latent", c.model.latent},
        {"decoder_expand", c.model.decoder_expand},
        {"decoder_hidden", c.model.decoder_hidden}}},
      {"training",
       {{"batch_size", c.training.batch_size},
        {"max_epochs", c.training.max_epochs},
        {"patience", c.training.patience},
        {"learning_rate", c.training.adam.learning_rate},
        {"beta1", c.training.adam.beta1},
        {"beta2", c.training.adam.beta2},
        {"epsilon", c.training.adam.epsilon}}},
      {"detectors", detectors},
      {"score_variant", dae::to_string(c.score_variant)},
      {"iforest", {{"trees", c.iforest.trees}, {"subsample", c.iforest.subsample}}},
      {"suite",
       {{"include_world", c.suite.include_world},
        {"cruise_margin_km", c.suite.cruise_margin_km},
        {"datasets", datasets}}},
      {"traces", c.write_traces},
  };
}

// ---------------------------------------------------------------------------
// Stages

std::vector<Trajectory> load_flights(const PipelineConfig& config) {
  if (config.data.synthetic) {
    auto sc = *config.data.synthetic;
    sc.seed = derive_seed(config.seed, "synth");
    return synth::generate(sc);
  }
  ingest::LoadOptions options;
  options.delimiter = config.data.delimiter;
  if (!config.data.airports.empty()) options.airports = ingest::load_airports(config.data.airports, config.data.delimiter);
  return ingest::load_trajectories(config.data.input, config.data.format, options).trajectories;
}

std::vector<Trajectory> clean_flights(const std::vector<Trajectory>& raw, const PipelineConfig& config) {
  std::vector<Trajectory> out;
  out.reserve(raw.size());
  for (const auto& t : raw) {
    if (t.empty()) continue;
    auto c = ingest::clean(t, config.resample, config.max_jump_km);
    if (c.size() >= config.model.window_len) out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Trajectory& a, const Trajectory& b) { return a.flight_id < b.flight_id; });
  if (out.empty()) throw EmptyInputError("no flight is long enough for one window after cleaning");
  return out;
}

FlightSplit split_flights(std::vector<Trajectory> flights, const PipelineConfig& config) {
  if (flights.size() < 2) throw EmptyInputError("need at least two flights to split training and evaluation");
  std::stable_sort(flights.begin(), flights.end(),
                   [](const Trajectory& a, const Trajectory& b) { return a.flight_id < b.flight_id; });
  std::mt19937_64 rng(derive_seed(config.seed, "split"));
  std::shuffle(flights.begin(), flights.end(), rng);
  const auto n = flights.size();
  auto n_eval = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.eval_fraction));
  n_eval = std::clamp<std::size_t>(n_eval, 1, n - 1);

  FlightSplit split;
  split.evaluation.assign(std::make_move_iterator(flights.begin()),
                          std::make_move_iterator(flights.begin() + static_cast<std::ptrdiff_t>(n_eval)));
  std::map<std::string, std::vector<Trajectory>> routes;
  for (std::size_t i = n_eval; i < n; ++i) routes[route_key(flights[i])].push_back(std::move(flights[i]));
  for (auto& [key, group] : routes) {
    std::stable_sort(group.begin(), group.end(),
                     [](const Trajectory& a, const Trajectory& b) { return a.flight_id < b.flight_id; });
    std::shuffle(group.begin(), group.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(group.size()) * config.validation_fraction));
    n_val = std::min(n_val, group.size() - 1);
    for (std::size_t i = 0; i < group.size(); ++i) {
      (i < n_val ? split.validation : split.training).push_back(std::move(group[i]));
    }
  }
  auto by_id = [](const Trajectory& a, const Trajectory& b) { return a.flight_id < b.flight_id; };
  std::stable_sort(split.training.begin(), split.training.end(), by_id);
  std::stable_sort(split.validation.begin(), split.validation.end(), by_id);
  std::stable_sort(split.evaluation.begin(), split.evaluation.end(), by_id);
  return split;
}

std::vector<FeatureWindow> flight_windows(const Trajectory& traj, const std::vector<std::uint8_t>& labels,
                                          const PipelineConfig& config, std::size_t stride, std::size_t offset) {
  const auto phases = phase::label_phases(traj, config.phase);
  auto rows = dataset::extract_features(traj, phases, labels);
  rows.erase(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(offset, rows.size())));
  return dataset::make_windows(rows, traj.flight_id, config.model.window_len, stride);
}

std::vector<FeatureWindow> build_windows(const std::vector<Trajectory>& flights, const PipelineConfig& config,
                                         std::size_t stride, const std::string& offset_component) {
  std::mt19937_64 rng(derive_seed(config.seed, offset_component));
  std::uniform_int_distribution<std::size_t> pick(0, stride - 1);
  std::vector<FeatureWindow> out;
  for (const auto& t : flights) {
    const std::size_t offset = offset_component.empty() ? 0 : pick(rng);
    auto w = flight_windows(t, {}, config, stride, offset);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

TrainedDetectors train_detectors(const std::vector<FeatureWindow>& training, const std::vector<FeatureWindow>& validation,
                                 const PipelineConfig& config, std::ostream* log) {
  if (training.empty()) throw EmptyInputError("no training windows");
  TrainedDetectors t;
  t.standardizer = dataset::fit_standardizer(training);
  const auto train_std = dataset::apply_standardizer(t.standardizer, training);
  const auto val_std = dataset::apply_standardizer(t.standardizer, validation);

  for (Detector d : config.detectors) {
    const std::string name = to_string(d);
    if (d == Detector::IForest) {
      IForestConfig ic = config.iforest;
      ic.seed = derive_seed(config.seed, name);
      IsolationForest forest;
      try {
        forest = train_iforest(train_std, ic);
      } catch (const CalibrationError& e) {
        throw StageError("calibrate", name + ": " + e.what());
      }
      const auto scores = forest.scores(flatten(train_std));
      t.calibration[d] = summarize(train_std, scores, [&](Phase) { return forest.threshold; });
      t.iforest = std::move(forest);
      continue;
    }

    dae::DaeConfig mc = config.model;
    mc.decoders = d == Detector::Dae ? kPhaseCount : 1;
    dae::DaeModel model(mc, derive_seed(config.seed, name));
    dae::TrainConfig tc = config.training;
    tc.shuffle_seed = derive_seed(config.seed, name + "/shuffle");
    if (log) {
      tc.on_epoch = [log, name](const dae::EpochStats& s) {
        *log << "  " << name << " epoch " << s.epoch << " train " << s.train_loss << " validation "
             << s.validation_loss << '\n'
             << std::flush;
      };
    }
    t.histories[d] = dae::train(model, train_std, val_std, tc);
    try {
      dae::calibrate_thresholds(model, train_std, config.score_variant);
    } catch (const CalibrationError& e) {
      throw StageError("calibrate", name + ": " + e.what());
    }
    model.standardizer = t.standardizer;
    const auto scores = dae::score_windows(model, train_std, config.score_variant);
    t.calibration[d] = summarize(train_std, scores,
                                 [&](Phase p) { return model.thresholds->values.at(model.decoder_for(p)); });
    (d == Detector::Dae ? t.dae : t.lstm_ae) = std::move(model);
  }
  return t;
}

std::vector<dae::AnomalyVerdict> run_detector(const TrainedDetectors& detectors, Detector which,
                                              std::span<const FeatureWindow> raw) {
  switch (which) {
    case Detector::Dae:
      if (!detectors.dae) throw ContractError("the DAE was not trained");
      return dae::detect(*detectors.dae, raw);
    case Detector::LstmAe:
      if (!detectors.lstm_ae) throw ContractError("the LSTM-AE was not trained");
      return dae::detect(*detectors.lstm_ae, raw);
    case Detector::IForest:
      if (!detectors.iforest) throw ContractError("the isolation forest was not trained");
      return iforest_detect(*detectors.iforest, dataset::apply_standardizer(detectors.standardizer, raw));
  }
  throw ContractError("unknown detector");
}

const ReportRow* EvalReport::find(const std::string& dataset, Detector detector) const {
  for (const auto& r : rows) {
    if (r.dataset == dataset && r.detector == detector) return &r;
  }
  return nullptr;
}

EvalReport evaluate_suite(const attacks::Suite& suite, const TrainedDetectors& detectors, const PipelineConfig& config,
                          const std::optional<fs::path>& traces_dir, const VerdictSink& sink) {
  EvalReport report;
  report.seed = config.seed;
  report.score_variant = config.score_variant;
  report.detectors = config.detectors;
  report.histories = detectors.histories;
  report.calibration = detectors.calibration;

  std::map<Detector, Contingency> totals;
  for (const auto& ds : suite.datasets) {
    std::optional<fs::path> dir;
    if (traces_dir) {
      dir = *traces_dir / file_safe(ds.name);
      fs::create_directories(*dir);
    }
    std::map<Detector, Contingency> counts;
    for (std::size_t f = 0; f < ds.flights.size(); ++f) {
      const auto& lt = ds.flights[f];
      const auto windows = flight_windows(lt.trajectory, lt.labels, config, config.eval_stride);
      std::map<Detector, std::vector<dae::AnomalyVerdict>> verdicts;
      for (Detector d : config.detectors) {
        verdicts[d] = run_detector(detectors, d, windows);
        counts[d] += tally(verdicts[d]);
      }
      if (dir && !windows.empty()) {
        write_trace(*dir / (file_safe(lt.trajectory.flight_id) + ".csv"), windows, config.detectors, verdicts);
      }
      if (sink) sink(ds, f, verdicts);
    }
    for (Detector d : config.detectors) {
      report.rows.push_back({ds.name, d, counts[d], compute_metrics(counts[d])});
      totals[d] += counts[d];
    }
  }
  for (Detector d : config.detectors) report.rows.push_back({"Total", d, totals[d], compute_metrics(totals[d])});
  return report;
}

json report_json(const EvalReport& r) {
  std::vector<std::string> detectors;
  for (Detector d : r.detectors) detectors.push_back(to_string(d));
  json training = json::object();
  for (const auto& [d, h] : r.histories) {
    json epochs = json::array();
    for (const auto& e : h.history) {
      epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_loss", e.validation_loss}});
    }
    training[to_string(d)] = {{"best_epoch", h.best_epoch}, {"history", epochs}};
  }
  json calibration = json::object();
  for (const auto& [d, groups] : r.calibration) {
    json g = json::object();
    for (const auto& s : groups) {
      g[s.group] = {{"threshold", s.threshold},
                    {"windows", s.windows},
                    {"flagged", s.flagged},
                    {"flag_rate", s.windows == 0 ? 0.0 : static_cast<double>(s.flagged) / static_cast<double>(s.windows)}};
    }
    calibration[to_string(d)] = g;
  }
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"dataset", row.dataset},
                    {"detector", to_string(row.detector)},
                    {"TP", row.counts.tp},
                    {"FP", row.counts.fp},
                    {"FN", row.counts.fn},
                    {"TN", row.counts.tn},
                    {"acc", row.metrics.accuracy},
                    {"recall", row.metrics.recall},
                    {"fpr", row.metrics.fpr},
                    {"f1", row.metrics.f1}});
  }
  return json{{"format", "adsbae.report"},
              {"version", 1},
              {"seed", r.seed},
              {"score_variant", dae::to_string(r.score_variant)},
              {"detectors", detectors},
              {"data", r.data_counts},
              {"training", training},
              {"calibration", calibration},
              {"results", rows}};
}

std::string report_csv(const EvalReport& r) {
  std::string out = "dataset,detector,TP,FP,FN,TN,acc,recall,fpr,f1\n";
  for (const auto& row : r.rows) {
    out += row.dataset + "," + to_string(row.detector) + "," + std::to_string(row.counts.tp) + "," +
           std::to_string(row.counts.fp) + "," + std::to_string(row.counts.fn) + "," + std::to_string(row.counts.tn) +
           "," + fixed(row.metrics.accuracy) + "," + fixed(row.metrics.recall) + "," + fixed(row.metrics.fpr) + "," +
           fixed(row.metrics.f1) + "\n";
  }
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& config, const fs::path& out_dir, std::ostream* log,
                            const VerdictSink& sink) {
  PipelineResult result;
  stage("output", log, [&] { fs::create_directories(out_dir); });

  const auto flights = stage("ingest", log, [&] { return clean_flights(load_flights(config), config); });
  const auto split = stage("dataset", log, [&] { return split_flights(flights, config); });
  const auto training = stage("dataset", log, [&] { return build_windows(split.training, config, config.train_stride, "windows/training"); });
  const auto validation =
      stage("dataset", log, [&] { return build_windows(split.validation, config, config.train_stride, "windows/validation"); });
  if (log) {
    *log << "  flights: " << split.training.size() << " training, " << split.validation.size() << " validation, "
         << split.evaluation.size() << " evaluation; windows: " << training.size() << " training, "
         << validation.size() << " validation\n";
  }

  result.detectors = stage("train", log, [&] { return train_detectors(training, validation, config, log); });

  result.suite = stage("attacks", log, [&] {
    auto sc = config.suite;
    sc.seed = derive_seed(config.seed, "suite");
    return attacks::build_eval_suite(split.evaluation, sc);
  });

  std::optional<fs::path> traces;
  if (config.write_traces) {
    traces = out_dir / "traces";
    fs::remove_all(*traces);
  }
  result.report = stage("detect", log, [&] { return evaluate_suite(result.suite, result.detectors, config, traces, sink); });
  result.report.data_counts = {{"training_flights", split.training.size()},
                               {"validation_flights", split.validation.size()},
                               {"evaluation_flights", split.evaluation.size()},
                               {"training_windows", training.size()},
                               {"validation_windows", validation.size()}};

  stage("report", log, [&] {
    write_text(out_dir / "report.json", report_json(result.report).dump(2) + "\n");
    write_text(out_dir / "report.csv", report_csv(result.report));
    auto ids = [](const std::vector<Trajectory>& v) {
      std::vector<std::string> out;
      for (const auto& t : v) out.push_back(t.flight_id);
      return out;
    };
    json manifest{{"format", "adsbae.run-manifest"},
                  {"version", 1},
                  {"config", to_json(config)},
                  {"flights",
                   {{"training", ids(split.training)},
                    {"validation", ids(split.validation)},
                    {"evaluation", ids(split.evaluation)}}},
                  {"suite", attacks::manifest_json(result.suite)}};
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  });
  return result;
}

// ---------------------------------------------------------------------------
// Isolation forest files

json iforest_to_json(const IsolationForest& forest, const dataset::Standardizer& standardizer) {
  json trees = json::array();
  for (const auto& tree : forest.trees()) {
    json nodes = json::array();
    for (const auto& n : tree) nodes.push_back({n.feature, n.split, n.left, n.right, n.size});
    trees.push_back(std::move(nodes));
  }
  return json{{"format", "adsbae.iforest"},
              {"version", 1},
              {"sample_size", forest.sample_size()},
              {"dims", forest.dims()},
              {"threshold", forest.threshold},
              {"standardizer", standardizer_json(standardizer)},
              {"trees", trees}};
}

std::pair<IsolationForest, dataset::Standardizer> iforest_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "adsbae.iforest") throw ContractError("not an isolation forest file");
    if (j.at("version").get<int>() != 1) throw ContractError("unsupported isolation forest version");
    std::vector<IsolationForest::Tree> trees;
    for (const auto& t : j.at("trees")) {
      IsolationForest::Tree tree;
      for (const auto& n : t) {
        tree.push_back({n.at(0).get<std::int32_t>(), n.at(1).get<double>(), n.at(2).get<std::int32_t>(),
                        n.at(3).get<std::int32_t>(), n.at(4).get<std::size_t>()});
      }
      trees.push_back(std::move(tree));
    }
    auto forest = IsolationForest::from_parts(std::move(trees), j.at("sample_size").get<std::size_t>(),
                                              j.at("dims").get<std::size_t>());
    forest.threshold = j.at("threshold").get<double>();
    return {std::move(forest), standardizer_from(j.at("standardizer"))};
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("isolation forest file: ") + e.what());
  }
}

}  // namespace adsbae::eval
