#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adsbae/dataset.hpp"
#include "adsbae/nn/adam.hpp"
#include "adsbae/nn/layers.hpp"

namespace adsbae::dae {

using dataset::FeatureWindow;

struct DaeConfig {
  std::size_t window_len = 30;
  std::size_t features = 5;
  std::size_t encoder_hidden = 32;  // per direction
  std::size_t latent = 10;
  std::size_t decoder_expand = 32;
  std::size_t decoder_hidden = 32;
  // 3: one decoder per phase. 1: the single-decoder LSTM auto-encoder.
  std::size_t decoders = kPhaseCount;

  bool operator==(const DaeConfig&) const = default;
};

enum class ScoreVariant {
  Mse,  // mean squared reconstruction error; higher is more anomalous
  Eq1,  // mean of 1 - (x - x_hat)^2, i.e. 1 - mse
};

ScoreVariant parse_score_variant(const std::string& text);
std::string to_string(ScoreVariant v);

struct Encoder {
  nn::BiLstm recurrent;
  nn::Dense to_latent;  // flattened (T * 2H) -> latent
};

struct Decoder {
  nn::Dense expand;       // latent -> expand, repeated over T steps
  nn::LstmParams recurrent;
  nn::Dense output;       // hidden -> features, per step
};

struct Thresholds {
  ScoreVariant variant = ScoreVariant::Mse;
  std::vector<double> values;  // one per decoder
};

// Shared Bi-LSTM encoder, one decoder per discriminant value.
class DaeModel {
 public:
  DaeModel() = default;
  DaeModel(const DaeConfig& config, std::uint64_t seed);

  const DaeConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  /// Decoder that processes windows of this phase.
  std::size_t decoder_for(Phase phase) const;

  /// Reconstructions (row-major T x M each) in input order. Windows must be
  /// standardized. The batch is split by decoder, each group is encoded and
  /// decoded, and the results are concatenated back into the input order.
  std::vector<std::vector<double>> forward(std::span<const FeatureWindow> batch) const;

  /// Mean squared reconstruction error of the batch, with parameter gradients
  /// accumulated (callers zero them first).
  double loss_and_gradients(std::span<const FeatureWindow> batch);

  nn::ParameterList parameters();
  nn::ParameterList encoder_parameters();
  nn::ParameterList decoder_parameters(std::size_t decoder);
  void zero_grad();

  Encoder encoder;
  std::vector<Decoder> decoders;
  std::optional<dataset::Standardizer> standardizer;
  std::optional<Thresholds> thresholds;
  nn::AdamState optimizer;

 private:
  struct GroupCache;
  nn::Matrix pack(std::span<const FeatureWindow> batch, std::span<const std::size_t> indices) const;
  nn::Matrix forward_group(std::size_t decoder, const nn::Matrix& inputs, std::size_t batch,
                           GroupCache* cache) const;
  void backward_group(std::size_t decoder, const GroupCache& cache, const nn::Matrix& d_output);
  std::vector<std::vector<std::size_t>> route(std::span<const FeatureWindow> batch) const;

  DaeConfig config_;
  std::uint64_t seed_ = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;  // NaN without validation data
};

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;  // epochs without improvement before stopping
  nn::AdamConfig adam;
  std::uint64_t shuffle_seed = 0;
  bool restore_best = true;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
};

/// Minimizes the mean reconstruction MSE with Adam over shuffled batches.
/// Windows must be standardized. Early stopping monitors the validation loss
/// (the training loss when `validation` is empty). Throws NumericError when the
/// loss becomes non-finite.
TrainResult train(DaeModel& model, std::span<const FeatureWindow> training,
                  std::span<const FeatureWindow> validation, const TrainConfig& config);

/// Per-window score of a reconstruction (same length as the window).
double anomaly_score(std::span<const double> window, std::span<const double> reconstruction,
                     ScoreVariant variant = ScoreVariant::Mse);

/// Scores of standardized windows, in input order.
std::vector<double> score_windows(const DaeModel& model, std::span<const FeatureWindow> standardized,
                                  ScoreVariant variant = ScoreVariant::Mse);

/// mean + 3 * population standard deviation.
double three_sigma_threshold(std::span<const double> scores);

inline constexpr std::size_t kMinCalibrationWindows = 30;

/// Per-decoder thresholds over the scores of the standardized training
/// windows routed to that decoder; stored in the model and returned. Throws
/// CalibrationError when a decoder receives fewer than 30 windows.
Thresholds calibrate_thresholds(DaeModel& model, std::span<const FeatureWindow> standardized_training,
                                ScoreVariant variant = ScoreVariant::Mse);

struct AnomalyVerdict {
  std::string flight_id;
  double start_timestamp = 0.0;
  std::size_t window_index = 0;
  Phase phase = Phase::Cruise;
  double score = 0.0;
  double threshold = 0.0;
  bool flagged = false;  // score > threshold
  int label = 0;
};

/// Standardizes raw windows with the model's statistics, reconstructs them,
/// scores them and compares against the threshold of each window's decoder.
std::vector<AnomalyVerdict> detect(const DaeModel& model, std::span<const FeatureWindow> raw_windows);

/// Versioned JSON checkpoint: config, seed, parameters, optimizer moments,
/// standardizer and thresholds.
void save_checkpoint(const DaeModel& model, const std::filesystem::path& path);
DaeModel load_checkpoint(const std::filesystem::path& path);

}  // namespace adsbae::dae
