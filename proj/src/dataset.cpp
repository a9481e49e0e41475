#include "adsbae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "adsbae/geo.hpp"

namespace adsbae::dataset {

using json = nlohmann::json;

std::vector<FeatureRow> extract_features(const Trajectory& traj, const std::vector<Phase>& phases,
                                         const std::vector<std::uint8_t>& labels) {
  const std::size_t n = traj.points.size();
  if (phases.size() != n) {
    throw ContractError("extract_features: " + std::to_string(phases.size()) + " phases for " +
                        std::to_string(n) + " points");
  }
  if (!labels.empty() && labels.size() != n) {
    throw ContractError("extract_features: label count does not match points");
  }
  const auto deltas = geo::consecutive_delta(traj);
  const auto arrival = geo::position(traj.arrival);
  std::vector<FeatureRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = traj.points[i];
    const auto here = geo::position(p);
    double tdelta = 0.0;
    if (here.latitude != arrival.latitude || here.longitude != arrival.longitude) {
      tdelta = geo::tracking_delta(p.track, geo::initial_bearing(here, arrival));
    }
    rows[i].features = {p.altitude, deltas[i], tdelta, p.vertical_rate, p.groundspeed};
    rows[i].phase = phases[i];
    rows[i].timestamp = p.timestamp;
    rows[i].altered = labels.empty() ? 0 : labels[i];
  }
  return rows;
}

std::size_t window_count(std::size_t rows, std::size_t window_len, std::size_t stride) {
  if (stride == 0) throw ContractError("window stride must be >= 1");
  if (rows < window_len || window_len == 0) return 0;
  return (rows - window_len) / stride + 1;
}

std::vector<FeatureWindow> make_windows(const std::vector<FeatureRow>& rows, const std::string& flight_id,
                                        std::size_t window_len, std::size_t stride) {
  const std::size_t count = window_count(rows.size(), window_len, stride);
  std::vector<FeatureWindow> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t begin = w * stride;
    FeatureWindow win;
    win.flight_id = flight_id;
    win.start_timestamp = rows[begin].timestamp;
    win.phase = rows[begin + window_len - 1].phase;
    win.values.reserve(window_len * kFeatureCount);
    for (std::size_t r = begin; r < begin + window_len; ++r) {
      const auto f = rows[r].features.to_array();
      win.values.insert(win.values.end(), f.begin(), f.end());
      if (rows[r].altered) win.label = 1;
    }
    out.push_back(std::move(win));
  }
  return out;
}

Standardizer fit_standardizer(std::span<const FeatureWindow> windows, std::size_t features,
                              std::span<const char* const> names) {
  if (windows.empty()) throw EmptyInputError("cannot fit a standardizer on zero windows");
  std::vector<double> sum(features, 0.0);
  std::size_t rows = 0;
  for (const auto& w : windows) {
    if (w.values.size() % features != 0) throw ContractError("window width is not a multiple of feature count");
    for (std::size_t i = 0; i < w.values.size(); ++i) sum[i % features] += w.values[i];
    rows += w.values.size() / features;
  }
  Standardizer s;
  s.mean.resize(features);
  for (std::size_t f = 0; f < features; ++f) s.mean[f] = sum[f] / static_cast<double>(rows);
  std::vector<double> sq(features, 0.0);
  for (const auto& w : windows) {
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      const double d = w.values[i] - s.mean[i % features];
      sq[i % features] += d * d;
    }
  }
  s.stddev.resize(features);
  for (std::size_t f = 0; f < features; ++f) {
    s.stddev[f] = std::sqrt(sq[f] / static_cast<double>(rows));
    if (!(s.stddev[f] > 1e-12 * std::max(1.0, std::abs(s.mean[f])))) {
      throw DegenerateFeatureError(f < names.size() ? names[f] : "feature " + std::to_string(f));
    }
  }
  return s;
}

void apply_standardizer_in_place(const Standardizer& s, std::vector<FeatureWindow>& windows) {
  const std::size_t m = s.features();
  for (auto& w : windows) {
    if (w.values.size() % m != 0) throw ContractError("window width is not a multiple of feature count");
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      w.values[i] = (w.values[i] - s.mean[i % m]) / s.stddev[i % m];
    }
  }
}

std::vector<FeatureWindow> apply_standardizer(const Standardizer& s, std::span<const FeatureWindow> windows) {
  std::vector<FeatureWindow> out(windows.begin(), windows.end());
  apply_standardizer_in_place(s, out);
  return out;
}

PhasePermutation sort_into_minibatches(std::span<const Phase> phases) {
  PhasePermutation perm;
  perm.total = phases.size();
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto p = index_of(phases[i]);
    if (p >= kPhaseCount) throw ContractError("unknown phase tag at index " + std::to_string(i));
    perm.indices[p].push_back(i);
  }
  return perm;
}

PhasePermutation sort_into_minibatches(std::span<const FeatureWindow> batch) {
  std::vector<Phase> phases;
  phases.reserve(batch.size());
  for (const auto& w : batch) phases.push_back(w.phase);
  return sort_into_minibatches(phases);
}

namespace {

json to_json(const FeatureWindow& w, std::size_t features) {
  if (w.values.size() % features != 0) throw ContractError("window width is not a multiple of feature count");
  json rows = json::array();
  for (std::size_t r = 0; r < w.values.size() / features; ++r) {
    rows.push_back(std::vector<double>(w.values.begin() + r * features, w.values.begin() + (r + 1) * features));
  }
  return json{{"flight_id", w.flight_id},
              {"start_timestamp", w.start_timestamp},
              {"phase", to_string(w.phase)},
              {"label", w.label},
              {"values", std::move(rows)}};
}

FeatureWindow from_json(const json& j, std::size_t index) {
  try {
    FeatureWindow w;
    w.flight_id = j.at("flight_id").get<std::string>();
    w.start_timestamp = j.at("start_timestamp").get<double>();
    w.phase = parse_phase(j.at("phase").get<std::string>());
    w.label = j.at("label").get<int>();
    if (w.label != 0 && w.label != 1) throw ParseError(index, "label must be 0 or 1");
    const auto& rows = j.at("values");
    if (!rows.is_array() || rows.empty()) throw ParseError(index, "values must be a non-empty array");
    const std::size_t width = rows.front().size();
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != width || width == 0) throw ParseError(index, "ragged values matrix");
      for (const auto& v : row) w.values.push_back(v.get<double>());
    }
    return w;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(index, e.what());
  }
}

void read_into(const std::filesystem::path& path, std::vector<FeatureWindow>& out) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(index, "malformed JSON in " + path.string());
    out.push_back(from_json(j, index));
    ++index;
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
}

}  // namespace

void write_records(std::span<const FeatureWindow> windows, const std::filesystem::path& path,
                   std::size_t features) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& w : windows) out << to_json(w, features).dump() << '\n';
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<FeatureWindow> read_records(const std::filesystem::path& path) {
  std::vector<FeatureWindow> out;
  read_into(path, out);
  return out;
}

std::vector<std::filesystem::path> write_sharded(std::span<const FeatureWindow> windows,
                                                 const std::filesystem::path& dir, const std::string& name,
                                                 std::size_t shards, std::size_t features) {
  if (shards == 0) throw ContractError("shard count must be >= 1");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  const std::size_t n = windows.size();
  for (std::size_t k = 0; k < shards; ++k) {
    const std::size_t begin = n * k / shards;
    const std::size_t end = n * (k + 1) / shards;
    auto path = dir / (name + "-" + std::to_string(k) + "-of-" + std::to_string(shards) + ".jsonl");
    write_records(windows.subspan(begin, end - begin), path, features);
    paths.push_back(std::move(path));
  }
  return paths;
}

std::vector<FeatureWindow> read_sharded(const std::filesystem::path& dir, const std::string& name) {
  const std::string prefix = name + "-";
  std::size_t shards = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto file = entry.path().filename().string();
    if (!file.starts_with(prefix) || !file.ends_with(".jsonl")) continue;
    const auto of = file.find("-of-", prefix.size());
    if (of == std::string::npos) continue;
    try {
      shards = std::stoul(file.substr(of + 4, file.size() - 6 - (of + 4)));
    } catch (const std::exception&) {
      continue;
    }
    break;
  }
  if (shards == 0) throw IoError("no shards named '" + name + "' in " + dir.string());
  std::vector<FeatureWindow> out;
  for (std::size_t k = 0; k < shards; ++k) {
    read_into(dir / (name + "-" + std::to_string(k) + "-of-" + std::to_string(shards) + ".jsonl"), out);
  }
  return out;
}

}  // namespace adsbae::dataset
