#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adsbae/attacks.hpp"
#include "adsbae/dae.hpp"
#include "adsbae/dataset.hpp"
#include "adsbae/eval/iforest.hpp"
#include "adsbae/eval/metrics.hpp"
#include "adsbae/eval/synth.hpp"
#include "adsbae/ingest.hpp"
#include "adsbae/phase.hpp"

namespace adsbae::eval {

enum class Detector { Dae, LstmAe, IForest };

inline constexpr std::array<Detector, 3> kAllDetectors = {Detector::Dae, Detector::LstmAe, Detector::IForest};

std::string to_string(Detector d);
Detector parse_detector(const std::string& text);
/// Comma-separated list such as "dae,lstm-ae,iforest"; duplicates removed,
/// order kept.
std::vector<Detector> parse_detector_list(const std::string& text);

struct DataConfig {
  std::optional<synth::SynthConfig> synthetic;  // generate flights instead of reading a file
  std::filesystem::path input;
  ingest::InputFormat format = ingest::InputFormat::Csv;
  std::filesystem::path airports;  // optional sidecar
  char delimiter = ',';
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  ingest::ResampleOptions resample;
  double max_jump_km = ingest::kDefaultMaxJumpKm;
  phase::PhaseConfig phase;
  double eval_fraction = 0.15;        // flights held out for the attack suite
  double validation_fraction = 0.1;   // per route, of the remaining flights
  std::size_t train_stride = 5;
  std::size_t eval_stride = 1;
  dae::DaeConfig model;
  dae::TrainConfig training;
  std::vector<Detector> detectors{kAllDetectors.begin(), kAllDetectors.end()};
  dae::ScoreVariant score_variant = dae::ScoreVariant::Mse;
  IForestConfig iforest;
  attacks::SuiteConfig suite;
  bool write_traces = true;
};

/// Reads the JSON configuration. Relative paths resolve against base_dir.
/// Missing keys keep their defaults; the suite defaults to WORLD, DRIFT,
/// OFFSET and CRASH. Throws ConfigError on invalid values.
PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& config);

/// Seed of a named component, derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& component);

// Stage: ingest
std::vector<Trajectory> load_flights(const PipelineConfig& config);
/// clean() on every flight; flights left with fewer points than one window are dropped.
std::vector<Trajectory> clean_flights(const std::vector<Trajectory>& raw, const PipelineConfig& config);

struct FlightSplit {
  std::vector<Trajectory> training;
  std::vector<Trajectory> validation;
  std::vector<Trajectory> evaluation;
};

/// Seeded split into evaluation flights, then a per-route validation split of
/// the rest. Every route keeps at least one training flight.
FlightSplit split_flights(std::vector<Trajectory> flights, const PipelineConfig& config);

// Stages: phase + dataset
/// Windows over the feature rows of one flight, skipping the first `offset` rows.
std::vector<dataset::FeatureWindow> flight_windows(const Trajectory& traj, const std::vector<std::uint8_t>& labels,
                                                   const PipelineConfig& config, std::size_t stride,
                                                   std::size_t offset = 0);
/// With a non-empty offset_component every flight starts at a random row in
/// [0, stride), drawn from the seed derived for that component, so strided
/// windows sample all window positions evenly.
std::vector<dataset::FeatureWindow> build_windows(const std::vector<Trajectory>& flights, const PipelineConfig& config,
                                                  std::size_t stride, const std::string& offset_component = {});

struct CalibrationSummary {
  std::string group;  // phase name
  double threshold = 0.0;
  std::size_t windows = 0;
  std::size_t flagged = 0;
};

struct TrainedDetectors {
  dataset::Standardizer standardizer;
  std::optional<dae::DaeModel> dae;
  std::optional<dae::DaeModel> lstm_ae;
  std::optional<IsolationForest> iforest;
  std::map<Detector, dae::TrainResult> histories;
  std::map<Detector, std::vector<CalibrationSummary>> calibration;
};

// Stages: train + calibrate
TrainedDetectors train_detectors(const std::vector<dataset::FeatureWindow>& training,
                                 const std::vector<dataset::FeatureWindow>& validation, const PipelineConfig& config,
                                 std::ostream* log = nullptr);

/// Verdicts of one detector on raw (unstandardized) windows.
std::vector<dae::AnomalyVerdict> run_detector(const TrainedDetectors& detectors, Detector which,
                                              std::span<const dataset::FeatureWindow> raw);

struct ReportRow {
  std::string dataset;
  Detector detector = Detector::Dae;
  Contingency counts;
  Metrics metrics;
};

struct EvalReport {
  std::uint64_t seed = 0;
  dae::ScoreVariant score_variant = dae::ScoreVariant::Mse;
  std::vector<Detector> detectors;
  std::map<std::string, std::size_t> data_counts;
  std::map<Detector, dae::TrainResult> histories;
  std::map<Detector, std::vector<CalibrationSummary>> calibration;
  std::vector<ReportRow> rows;  // per dataset and detector, then one "Total" row per detector

  const ReportRow* find(const std::string& dataset, Detector detector) const;
};

// Per flight verdicts of every selected detector, handed over during evaluation.
using VerdictSink = std::function<void(const attacks::SuiteDataset& dataset, std::size_t flight,
                                       const std::map<Detector, std::vector<dae::AnomalyVerdict>>& verdicts)>;

// Stages: detect + metrics
EvalReport evaluate_suite(const attacks::Suite& suite, const TrainedDetectors& detectors, const PipelineConfig& config,
                          const std::optional<std::filesystem::path>& traces_dir = std::nullopt,
                          const VerdictSink& sink = {});

nlohmann::json report_json(const EvalReport& report);
/// dataset,detector,TP,FP,FN,TN,acc,recall,fpr,f1
std::string report_csv(const EvalReport& report);

struct PipelineResult {
  EvalReport report;
  attacks::Suite suite;
  TrainedDetectors detectors;
};

/// ingest -> phase -> dataset -> train -> calibrate -> attacks -> detect ->
/// metrics -> report. Writes report.json, report.csv, manifest.json and the
/// score traces under out_dir. Failures surface as StageError naming the stage.
PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir,
                            std::ostream* log = nullptr, const VerdictSink& sink = {});

// Isolation forest persistence for the command line tools.
nlohmann::json iforest_to_json(const IsolationForest& forest, const dataset::Standardizer& standardizer);
std::pair<IsolationForest, dataset::Standardizer> iforest_from_json(const nlohmann::json& j);

}  // namespace adsbae::eval
