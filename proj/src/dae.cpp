#include "adsbae/dae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "adsbae/error.hpp"

namespace adsbae::dae {

using nn::Matrix;
using json = nlohmann::json;

namespace {

constexpr std::size_t kScoringChunk = 512;
constexpr const char* kCheckpointFormat = "adsbae.dae-checkpoint";
constexpr int kCheckpointVersion = 1;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

ScoreVariant parse_score_variant(const std::string& text) {
  if (text == "mse") return ScoreVariant::Mse;
  if (text == "eq1") return ScoreVariant::Eq1;
  throw ContractError("unknown score variant '" + text + "' (expected mse or eq1)");
}

std::string to_string(ScoreVariant v) { return v == ScoreVariant::Mse ? "mse" : "eq1"; }

struct DaeModel::GroupCache {
  std::size_t batch = 0;
  nn::BiLstmCache encoder;
  Matrix flat;    // (T * 2H) x B
  Matrix latent;  // L x B
  nn::LstmCache decoder;
  Matrix hidden;  // Hd x (T * B)
};

DaeModel::DaeModel(const DaeConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  if (config.decoders != 1 && config.decoders != kPhaseCount) {
    throw ContractError("decoder count must be 1 or " + std::to_string(kPhaseCount));
  }
  if (config.window_len == 0 || config.features == 0 || config.encoder_hidden == 0 || config.latent == 0 ||
      config.decoder_hidden == 0 || config.decoder_expand == 0) {
    throw ContractError("model dimensions must be positive");
  }
  const auto t = idx(config.window_len);
  const auto m = idx(config.features);
  const auto h = idx(config.encoder_hidden);
  encoder.recurrent = nn::BiLstm("encoder.bilstm", m, h);
  encoder.to_latent = nn::Dense("encoder.latent", t * 2 * h, idx(config.latent));
  for (std::size_t d = 0; d < config.decoders; ++d) {
    const std::string name = "decoder" + std::to_string(d);
    Decoder dec;
    dec.expand = nn::Dense(name + ".expand", idx(config.latent), idx(config.decoder_expand));
    dec.recurrent = nn::LstmParams(name + ".lstm", idx(config.decoder_expand), idx(config.decoder_hidden));
    dec.output = nn::Dense(name + ".output", idx(config.decoder_hidden), m);
    decoders.push_back(std::move(dec));
  }
  nn::Rng rng(seed);
  encoder.recurrent.init(rng);
  encoder.to_latent.init(rng);
  for (auto& dec : decoders) {
    dec.expand.init(rng);
    dec.recurrent.init(rng);
    dec.output.init(rng);
  }
  optimizer = nn::AdamState::zeros(parameters());
}

std::size_t DaeModel::decoder_for(Phase phase) const {
  const std::size_t p = index_of(phase);
  if (p >= kPhaseCount) throw ContractError("unknown phase tag " + std::to_string(p));
  return config_.decoders == 1 ? 0 : p;
}

nn::ParameterList DaeModel::encoder_parameters() {
  nn::ParameterList out;
  encoder.recurrent.collect(out);
  encoder.to_latent.collect(out);
  return out;
}

nn::ParameterList DaeModel::decoder_parameters(std::size_t d) {
  nn::ParameterList out;
  auto& dec = decoders.at(d);
  dec.expand.collect(out);
  dec.recurrent.collect(out);
  dec.output.collect(out);
  return out;
}

nn::ParameterList DaeModel::parameters() {
  nn::ParameterList out = encoder_parameters();
  for (std::size_t d = 0; d < decoders.size(); ++d) {
    const auto dp = decoder_parameters(d);
    out.insert(out.end(), dp.begin(), dp.end());
  }
  return out;
}

void DaeModel::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

std::vector<std::vector<std::size_t>> DaeModel::route(std::span<const FeatureWindow> batch) const {
  const std::size_t expected = config_.window_len * config_.features;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].values.size() != expected) {
      throw ContractError("window " + std::to_string(i) + " has " + std::to_string(batch[i].values.size()) +
                          " values, model expects " + std::to_string(expected));
    }
  }
  const auto perm = dataset::sort_into_minibatches(batch);
  if (config_.decoders == kPhaseCount) {
    return {perm.indices.begin(), perm.indices.end()};
  }
  std::vector<std::size_t> all(batch.size());
  std::iota(all.begin(), all.end(), 0);
  return {std::move(all)};
}

Matrix DaeModel::pack(std::span<const FeatureWindow> batch, std::span<const std::size_t> indices) const {
  const auto m = idx(config_.features);
  const auto t_steps = idx(config_.window_len);
  const auto b = idx(indices.size());
  Matrix x(m, t_steps * b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const auto& v = batch[indices[static_cast<std::size_t>(k)]].values;
    for (Eigen::Index t = 0; t < t_steps; ++t) {
      for (Eigen::Index f = 0; f < m; ++f) x(f, t * b + k) = v[static_cast<std::size_t>(t * m + f)];
    }
  }
  return x;
}

Matrix DaeModel::forward_group(std::size_t d, const Matrix& inputs, std::size_t batch, GroupCache* cache) const {
  const auto t_steps = idx(config_.window_len);
  const auto b = idx(batch);
  const auto h2 = 2 * idx(config_.encoder_hidden);
  const nn::SequenceShape shape{t_steps, b};
  const Decoder& dec = decoders[d];

  const Matrix enc = encoder.recurrent.forward(inputs, shape, cache ? &cache->encoder : nullptr);
  Matrix flat(t_steps * h2, b);
  for (Eigen::Index t = 0; t < t_steps; ++t) flat.middleRows(t * h2, h2) = enc.middleCols(t * b, b);
  Matrix latent = encoder.to_latent.forward(flat);
  const Matrix expanded = dec.expand.forward(latent);
  const Matrix seeded = expanded.replicate(1, t_steps);
  Matrix hidden = nn::lstm_forward(dec.recurrent, seeded, shape, cache ? &cache->decoder : nullptr);
  Matrix out = dec.output.forward(hidden);
  nn::require_finite(out, "decoder output");
  if (cache) {
    cache->batch = batch;
    cache->flat = std::move(flat);
    cache->latent = std::move(latent);
    cache->hidden = std::move(hidden);
  }
  return out;
}

void DaeModel::backward_group(std::size_t d, const GroupCache& cache, const Matrix& d_output) {
  const auto t_steps = idx(config_.window_len);
  const auto b = idx(cache.batch);
  const auto h2 = 2 * idx(config_.encoder_hidden);
  Decoder& dec = decoders[d];

  const Matrix d_hidden = dec.output.backward(cache.hidden, d_output);
  const Matrix d_seeded = nn::lstm_backward(dec.recurrent, cache.decoder, d_hidden);
  Matrix d_expanded = Matrix::Zero(d_seeded.rows(), b);
  for (Eigen::Index t = 0; t < t_steps; ++t) d_expanded += d_seeded.middleCols(t * b, b);
  const Matrix d_latent = dec.expand.backward(cache.latent, d_expanded);
  const Matrix d_flat = encoder.to_latent.backward(cache.flat, d_latent);
  Matrix d_enc(h2, t_steps * b);
  for (Eigen::Index t = 0; t < t_steps; ++t) d_enc.middleCols(t * b, b) = d_flat.middleRows(t * h2, h2);
  encoder.recurrent.backward(cache.encoder, d_enc);
}

std::vector<std::vector<double>> DaeModel::forward(std::span<const FeatureWindow> batch) const {
  const auto groups = route(batch);
  const auto m = idx(config_.features);
  const auto t_steps = idx(config_.window_len);
  std::vector<std::vector<double>> out(batch.size());
  for (std::size_t d = 0; d < groups.size(); ++d) {
    const auto& indices = groups[d];
    for (std::size_t begin = 0; begin < indices.size(); begin += kScoringChunk) {
      const std::size_t n = std::min(kScoringChunk, indices.size() - begin);
      const std::span<const std::size_t> chunk(indices.data() + begin, n);
      const Matrix y = forward_group(d, pack(batch, chunk), n, nullptr);
      const auto b = idx(n);
      for (Eigen::Index k = 0; k < b; ++k) {
        auto& rec = out[chunk[static_cast<std::size_t>(k)]];
        rec.resize(static_cast<std::size_t>(t_steps * m));
        for (Eigen::Index t = 0; t < t_steps; ++t) {
          for (Eigen::Index f = 0; f < m; ++f) rec[static_cast<std::size_t>(t * m + f)] = y(f, t * b + k);
        }
      }
    }
  }
  return out;
}

double DaeModel::loss_and_gradients(std::span<const FeatureWindow> batch) {
  if (batch.empty()) throw ContractError("loss_and_gradients: empty batch");
  const auto groups = route(batch);
  const double total = static_cast<double>(batch.size() * config_.window_len * config_.features);
  double sum = 0.0;
  for (std::size_t d = 0; d < groups.size(); ++d) {
    if (groups[d].empty()) continue;
    GroupCache cache;
    const Matrix x = pack(batch, groups[d]);
    const Matrix y = forward_group(d, x, groups[d].size(), &cache);
    const Matrix diff = y - x;
    sum += diff.squaredNorm();
    backward_group(d, cache, (2.0 / total) * diff);
  }
  return sum / total;
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<Matrix> snapshot(const nn::ParameterList& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

double mean_loss(const DaeModel& model, std::span<const FeatureWindow> windows) {
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto rec = model.forward(windows);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (std::size_t k = 0; k < rec[i].size(); ++k) {
      const double d = rec[i][k] - windows[i].values[k];
      sum += d * d;
    }
    n += rec[i].size();
  }
  return sum / static_cast<double>(n);
}

}  // namespace

TrainResult train(DaeModel& model, std::span<const FeatureWindow> training,
                  std::span<const FeatureWindow> validation, const TrainConfig& config) {
  if (training.empty()) throw EmptyInputError("no training windows");
  if (config.batch_size == 0) throw ContractError("batch size must be >= 1");
  const auto params = model.parameters();
  if (model.optimizer.m.size() != params.size()) model.optimizer = nn::AdamState::zeros(params);

  TrainResult result;
  nn::Rng rng(config.shuffle_seed);
  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values = snapshot(params);
  nn::AdamState best_optimizer = model.optimizer;
  std::size_t since_best = 0;
  std::vector<FeatureWindow> batch;
  batch.reserve(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(training[order[i]]);
      model.zero_grad();
      const double loss = model.loss_and_gradients(batch);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "training loss became non-finite at epoch " << epoch << ", batch " << begin / config.batch_size
           << " (loss=" << loss << ")";
        throw NumericError(os.str());
      }
      weighted += loss * static_cast<double>(end - begin);
      nn::adam_update(params, model.optimizer, config.adam);
    }
    EpochStats stats{epoch, weighted / static_cast<double>(order.size()), mean_loss(model, validation)};
    result.history.push_back(stats);
    if (config.on_epoch) config.on_epoch(stats);

    const double monitored = validation.empty() ? stats.train_loss : stats.validation_loss;
    if (monitored < best) {
      best = monitored;
      result.best_epoch = epoch;
      since_best = 0;
      if (config.restore_best) {
        best_values = snapshot(params);
        best_optimizer = model.optimizer;
      }
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (config.restore_best && result.best_epoch != 0 && result.best_epoch != result.history.size()) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best_values[k];
    model.optimizer = best_optimizer;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Scoring and thresholds

double anomaly_score(std::span<const double> window, std::span<const double> reconstruction, ScoreVariant variant) {
  if (window.size() != reconstruction.size() || window.empty()) {
    throw ContractError("anomaly_score: window and reconstruction differ in size");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const double d = window[i] - reconstruction[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(window.size());
  return variant == ScoreVariant::Mse ? mse : 1.0 - mse;
}

std::vector<double> score_windows(const DaeModel& model, std::span<const FeatureWindow> standardized,
                                  ScoreVariant variant) {
  const auto rec = model.forward(standardized);
  std::vector<double> scores(standardized.size());
  for (std::size_t i = 0; i < standardized.size(); ++i) {
    scores[i] = anomaly_score(standardized[i].values, rec[i], variant);
  }
  return scores;
}

double three_sigma_threshold(std::span<const double> scores) {
  if (scores.empty()) throw CalibrationError("no scores to calibrate on");
  const double n = static_cast<double>(scores.size());
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double mean = std::clamp(std::accumulate(scores.begin(), scores.end(), 0.0) / n, *lo, *hi);
  double sq = 0.0;
  for (double s : scores) sq += (s - mean) * (s - mean);
  return mean + 3.0 * std::sqrt(sq / n);
}

Thresholds calibrate_thresholds(DaeModel& model, std::span<const FeatureWindow> standardized_training,
                                ScoreVariant variant) {
  const auto scores = score_windows(model, standardized_training, variant);
  std::vector<std::vector<double>> per_decoder(model.config().decoders);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    per_decoder[model.decoder_for(standardized_training[i].phase)].push_back(scores[i]);
  }
  Thresholds th{variant, {}};
  for (std::size_t d = 0; d < per_decoder.size(); ++d) {
    if (per_decoder[d].size() < kMinCalibrationWindows) {
      const std::string which =
          model.config().decoders == 1 ? std::string("the decoder") : std::string(to_string(kAllPhases[d]));
      throw CalibrationError("only " + std::to_string(per_decoder[d].size()) + " training windows for " + which +
                             " (need " + std::to_string(kMinCalibrationWindows) + ")");
    }
    th.values.push_back(three_sigma_threshold(per_decoder[d]));
  }
  model.thresholds = th;
  return th;
}

std::vector<AnomalyVerdict> detect(const DaeModel& model, std::span<const FeatureWindow> raw_windows) {
  if (!model.standardizer) throw ContractError("detect: model has no standardizer");
  if (!model.thresholds) throw ContractError("detect: model is not calibrated");
  const auto standardized = dataset::apply_standardizer(*model.standardizer, raw_windows);
  const auto scores = score_windows(model, standardized, model.thresholds->variant);
  std::vector<AnomalyVerdict> out(raw_windows.size());
  for (std::size_t i = 0; i < raw_windows.size(); ++i) {
    const auto& w = raw_windows[i];
    auto& v = out[i];
    v.flight_id = w.flight_id;
    v.start_timestamp = w.start_timestamp;
    v.window_index = i;
    v.phase = w.phase;
    v.score = scores[i];
    v.threshold = model.thresholds->values.at(model.decoder_for(w.phase));
    v.flagged = v.score > v.threshold;
    v.label = w.label;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json matrix_to_json(const Matrix& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ContractError("checkpoint matrix size mismatch");
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

json config_to_json(const DaeConfig& c) {
  return json{{"window_len", c.window_len},         {"features", c.features},
              {"encoder_hidden", c.encoder_hidden}, {"latent", c.latent},
              {"decoder_expand", c.decoder_expand}, {"decoder_hidden", c.decoder_hidden},
              {"decoders", c.decoders}};
}

DaeConfig config_from_json(const json& j) {
  DaeConfig c;
  c.window_len = j.at("window_len").get<std::size_t>();
  c.features = j.at("features").get<std::size_t>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::size_t>();
  c.latent = j.at("latent").get<std::size_t>();
  c.decoder_expand = j.at("decoder_expand").get<std::size_t>();
  c.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
  c.decoders = j.at("decoders").get<std::size_t>();
  return c;
}

}  // namespace

void save_checkpoint(const DaeModel& model, const std::filesystem::path& path) {
  // parameters() hands out mutable pointers; nothing is modified here.
  auto& mutable_model = const_cast<DaeModel&>(model);
  json params = json::array();
  for (const auto* p : mutable_model.parameters()) {
    json entry = matrix_to_json(p->value);
    entry["name"] = p->name;
    params.push_back(std::move(entry));
  }
  json m = json::array();
  json v = json::array();
  for (std::size_t k = 0; k < model.optimizer.m.size(); ++k) {
    m.push_back(matrix_to_json(model.optimizer.m[k]));
    v.push_back(matrix_to_json(model.optimizer.v[k]));
  }
  json doc{{"format", kCheckpointFormat},
           {"version", kCheckpointVersion},
           {"config", config_to_json(model.config())},
           {"seed", model.seed()},
           {"parameters", std::move(params)},
           {"optimizer", {{"step", model.optimizer.step}, {"m", std::move(m)}, {"v", std::move(v)}}}};
  if (model.standardizer) {
    doc["standardizer"] = {{"mean", model.standardizer->mean}, {"stddev", model.standardizer->stddev}};
  }
  if (model.thresholds) {
    doc["thresholds"] = {{"variant", to_string(model.thresholds->variant)}, {"values", model.thresholds->values}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw IoError("write failure on " + path.string());
}

DaeModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ParseError(0, "malformed checkpoint " + path.string());
  try {
    if (doc.at("format").get<std::string>() != kCheckpointFormat) throw ContractError("not a DAE checkpoint");
    if (doc.at("version").get<int>() != kCheckpointVersion) throw ContractError("unsupported checkpoint version");
    DaeModel model(config_from_json(doc.at("config")), doc.at("seed").get<std::uint64_t>());
    const auto params = model.parameters();
    const auto& stored = doc.at("parameters");
    if (stored.size() != params.size()) throw ContractError("checkpoint parameter count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (stored[k].at("name").get<std::string>() != params[k]->name) {
        throw ContractError("checkpoint parameter order mismatch at " + params[k]->name);
      }
      Matrix value = matrix_from_json(stored[k]);
      if (value.rows() != params[k]->value.rows() || value.cols() != params[k]->value.cols()) {
        throw ContractError("checkpoint shape mismatch for " + params[k]->name);
      }
      params[k]->value = std::move(value);
    }
    const auto& opt = doc.at("optimizer");
    model.optimizer.step = opt.at("step").get<std::int64_t>();
    for (std::size_t k = 0; k < params.size(); ++k) {
      model.optimizer.m[k] = matrix_from_json(opt.at("m").at(k));
      model.optimizer.v[k] = matrix_from_json(opt.at("v").at(k));
    }
    if (doc.contains("standardizer")) {
      dataset::Standardizer s;
      s.mean = doc["standardizer"].at("mean").get<std::vector<double>>();
      s.stddev = doc["standardizer"].at("stddev").get<std::vector<double>>();
      model.standardizer = std::move(s);
    }
    if (doc.contains("thresholds")) {
      Thresholds th;
      th.variant = parse_score_variant(doc["thresholds"].at("variant").get<std::string>());
      th.values = doc["thresholds"].at("values").get<std::vector<double>>();
      if (th.values.size() != model.config().decoders) throw ContractError("checkpoint threshold count mismatch");
      model.thresholds = std::move(th);
    }
    return model;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("checkpoint field error: ") + e.what());
  }
}

}  // namespace adsbae::dae
