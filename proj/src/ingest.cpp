#include "adsbae/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "adsbae/error.hpp"
#include "adsbae/geo.hpp"

namespace adsbae::ingest {

namespace {

using json = nlohmann::json;

constexpr const char* kMandatory[] = {"timestamp", "icao24",        "callsign",      "latitude",
                                      "longitude", "altitude",      "groundspeed",   "vertical_rate",
                                      "track",     "departure_icao", "arrival_icao"};
constexpr const char* kAirportCoords[] = {"departure_lat", "departure_lon", "arrival_lat", "arrival_lon"};

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delimiter) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::optional<double> to_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Field access shared by the CSV and JSON-lines readers.
struct RowView {
  std::function<std::optional<std::string>(const char*)> text;
  std::function<std::optional<double>(const char*)> number;
};

struct ParsedRow {
  std::string flight_id;
  TrajectoryPoint point;
  Airport departure;
  Airport arrival;
  std::uint8_t label = 0;
};

std::optional<Airport> resolve_airport(const RowView& row, const char* icao_key, const char* lat_key,
                                       const char* lon_key, const LoadOptions& options) {
  const auto icao = row.text(icao_key);
  if (!icao || icao->empty()) return std::nullopt;
  const auto lat = row.number(lat_key);
  const auto lon = row.number(lon_key);
  if (lat && lon) {
    if (!valid_coordinates(*lat, *lon)) return std::nullopt;
    return Airport{*icao, *lat, *lon};
  }
  const auto it = options.airports.find(*icao);
  if (it == options.airports.end()) return std::nullopt;
  return it->second;
}

std::optional<ParsedRow> parse_row(const RowView& row, const LoadOptions& options) {
  ParsedRow out;
  auto& p = out.point;
  const auto ts = row.number("timestamp");
  const auto lat = row.number("latitude");
  const auto lon = row.number("longitude");
  const auto alt = row.number("altitude");
  const auto gs = row.number("groundspeed");
  const auto vr = row.number("vertical_rate");
  const auto trk = row.number("track");
  const auto icao = row.text("icao24");
  const auto callsign = row.text("callsign");
  if (!ts || !lat || !lon || !alt || !gs || !vr || !trk || !icao || !callsign) return std::nullopt;
  if (icao->empty() || callsign->empty() || !valid_coordinates(*lat, *lon)) return std::nullopt;
  p.timestamp = *ts;
  p.latitude = *lat;
  p.longitude = *lon;
  p.altitude = *alt;
  p.groundspeed = *gs;
  p.vertical_rate = *vr;
  p.track = geo::normalize_degrees(*trk);
  p.icao24 = *icao;
  p.callsign = *callsign;
  auto dep = resolve_airport(row, "departure_icao", "departure_lat", "departure_lon", options);
  auto arr = resolve_airport(row, "arrival_icao", "arrival_lat", "arrival_lon", options);
  if (!dep || !arr) return std::nullopt;
  out.departure = std::move(*dep);
  out.arrival = std::move(*arr);
  const auto fid = row.text("flight_id");
  out.flight_id = (fid && !fid->empty()) ? *fid : p.icao24 + "_" + p.callsign;
  if (const auto label = row.number("label")) out.label = *label != 0.0 ? 1 : 0;
  return out;
}

struct Accumulator {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<Trajectory> trajectories;
  std::vector<std::vector<std::uint8_t>> labels;
  bool has_labels = false;
  std::size_t dropped = 0;

  void add(ParsedRow row) {
    auto [it, inserted] = index.try_emplace(row.flight_id, trajectories.size());
    if (inserted) {
      Trajectory t;
      t.flight_id = row.flight_id;
      t.departure = row.departure;
      t.arrival = row.arrival;
      trajectories.push_back(std::move(t));
      labels.emplace_back();
    }
    trajectories[it->second].points.push_back(std::move(row.point));
    labels[it->second].push_back(row.label);
  }

  LoadResult finish() {
    LoadResult result;
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
      auto& pts = trajectories[k].points;
      auto& lab = labels[k];
      std::vector<std::size_t> perm(pts.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::stable_sort(perm.begin(), perm.end(),
                       [&](std::size_t a, std::size_t b) { return pts[a].timestamp < pts[b].timestamp; });
      std::vector<TrajectoryPoint> sorted;
      std::vector<std::uint8_t> sorted_labels;
      sorted.reserve(pts.size());
      for (std::size_t i : perm) {
        if (!sorted.empty() && pts[i].timestamp == sorted.back().timestamp) {
          ++dropped;  // duplicate timestamp: first occurrence wins
          continue;
        }
        sorted.push_back(std::move(pts[i]));
        sorted_labels.push_back(lab[i]);
      }
      pts = std::move(sorted);
      lab = has_labels ? std::move(sorted_labels) : std::vector<std::uint8_t>{};
    }
    result.trajectories = std::move(trajectories);
    result.labels = std::move(labels);
    result.dropped_rows = dropped;
    return result;
  }
};

void read_csv(std::istream& in, const LoadOptions& options, Accumulator& acc) {
  std::string line;
  if (!std::getline(in, line)) return;
  const auto header = split_line(line, options.delimiter);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const char* name : kMandatory) {
    if (!column.contains(name)) throw ParseError(0, std::string("missing mandatory column '") + name + "'");
  }
  const bool inline_airports = std::all_of(std::begin(kAirportCoords), std::end(kAirportCoords),
                                           [&](const char* c) { return column.contains(c); });
  if (!inline_airports && options.airports.empty()) {
    throw ParseError(0, "airport coordinate columns absent and no airports sidecar given");
  }
  acc.has_labels = column.contains("label");

  std::vector<std::string> cells;
  RowView view;
  view.text = [&](const char* key) -> std::optional<std::string> {
    const auto it = column.find(key);
    if (it == column.end() || it->second >= cells.size()) return std::nullopt;
    return cells[it->second];
  };
  view.number = [&](const char* key) -> std::optional<double> {
    const auto t = view.text(key);
    return t ? to_number(*t) : std::nullopt;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    cells = split_line(line, options.delimiter);
    if (auto row = parse_row(view, options)) {
      acc.add(std::move(*row));
    } else {
      ++acc.dropped;
    }
  }
}

void read_jsonl(std::istream& in, const LoadOptions& options, Accumulator& acc) {
  std::string line;
  json obj;
  RowView view;
  view.text = [&](const char* key) -> std::optional<std::string> {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number()) return it->dump();
    return std::nullopt;
  };
  view.number = [&](const char* key) -> std::optional<double> {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) return std::nullopt;
    const double v = it->get<double>();
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      ++acc.dropped;
      continue;
    }
    if (obj.contains("label")) acc.has_labels = true;
    if (auto row = parse_row(view, options)) {
      acc.add(std::move(*row));
    } else {
      ++acc.dropped;
    }
  }
}

}  // namespace

InputFormat parse_format(const std::string& tag) {
  if (tag == "csv" || tag == "tsv" || tag == "dsv") return InputFormat::Csv;
  if (tag == "jsonl" || tag == "json-lines" || tag == "ndjson") return InputFormat::JsonLines;
  throw ContractError("unknown input format '" + tag + "' (expected csv or jsonl)");
}

LoadResult load_trajectories(const std::filesystem::path& path, InputFormat format,
                             const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Accumulator acc;
  if (format == InputFormat::Csv) {
    read_csv(in, options, acc);
  } else {
    read_jsonl(in, options, acc);
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  if (acc.trajectories.empty()) {
    throw EmptyInputError("no valid rows in " + path.string() + " (" + std::to_string(acc.dropped) +
                          " dropped)");
  }
  return acc.finish();
}

std::map<std::string, Airport> load_airports(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, Airport> out;
  std::string line;
  std::getline(in, line);  // header
  std::size_t index = 0;
  while (std::getline(in, line)) {
    ++index;
    if (line.empty()) continue;
    const auto cells = split_line(line, delimiter);
    if (cells.size() < 3) throw ParseError(index, "expected icao,latitude,longitude");
    const auto lat = to_number(cells[1]);
    const auto lon = to_number(cells[2]);
    if (!lat || !lon || !valid_coordinates(*lat, *lon)) throw ParseError(index, "invalid airport coordinates");
    out[cells[0]] = Airport{cells[0], *lat, *lon};
  }
  return out;
}

void write_trajectories_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories,
                            const std::vector<std::vector<std::uint8_t>>& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const bool with_labels = !labels.empty();
  out << "flight_id,timestamp,icao24,callsign,latitude,longitude,altitude,groundspeed,vertical_rate,track,"
         "departure_icao,arrival_icao,departure_lat,departure_lon,arrival_lat,arrival_lon";
  if (with_labels) out << ",label";
  out << '\n';
  char buf[64];
  const auto num = [&](double v) -> const char* {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto& t = trajectories[k];
    if (with_labels && labels[k].size() != t.points.size()) {
      throw ContractError("label count does not match points for " + t.flight_id);
    }
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      const auto& p = t.points[i];
      out << t.flight_id << ',' << num(p.timestamp) << ',' << p.icao24 << ',' << p.callsign << ',';
      out << num(p.latitude) << ',';
      out << num(p.longitude) << ',';
      out << num(p.altitude) << ',';
      out << num(p.groundspeed) << ',';
      out << num(p.vertical_rate) << ',';
      out << num(p.track) << ',';
      out << t.departure.icao_code << ',' << t.arrival.icao_code << ',';
      out << num(t.departure.latitude) << ',';
      out << num(t.departure.longitude) << ',';
      out << num(t.arrival.latitude) << ',';
      out << num(t.arrival.longitude);
      if (with_labels) out << ',' << static_cast<int>(labels[k][i]);
      out << '\n';
    }
  }
  if (!out) throw IoError("write failure on " + path.string());
}

Trajectory resample(const Trajectory& traj, const ResampleOptions& options) {
  if (traj.points.empty()) throw EmptyInputError("cannot resample empty trajectory " + traj.flight_id);
  if (!(options.period > 0.0)) throw ContractError("resampling period must be positive");
  const auto& pts = traj.points;

  // Segment boundaries [begin, end) split on gaps longer than max_gap.
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= pts.size(); ++i) {
    if (i == pts.size() || pts[i].timestamp - pts[i - 1].timestamp > options.max_gap) {
      segments.emplace_back(begin, i);
      begin = i;
    }
  }

  constexpr double kEps = 1e-9;
  Trajectory best;
  for (const auto& [b, e] : segments) {
    Trajectory seg{traj.flight_id, traj.departure, traj.arrival, {}};
    const double t0 = pts[b].timestamp;
    const double t_last = pts[e - 1].timestamp;
    const auto steps = static_cast<std::size_t>(std::floor((t_last - t0) / options.period + kEps));
    seg.points.reserve(steps + 1);
    std::size_t cursor = b;
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = t0 + static_cast<double>(k) * options.period;
      while (cursor + 1 < e && pts[cursor + 1].timestamp <= t + kEps) ++cursor;
      TrajectoryPoint p = pts[cursor];
      p.timestamp = t;
      seg.points.push_back(std::move(p));
    }
    if (seg.points.size() > best.points.size()) best = std::move(seg);
  }
  if (best.points.empty()) throw EmptyInputError("resampling produced no points for " + traj.flight_id);
  return best;
}

Trajectory filter_outliers(const Trajectory& traj, double max_jump_km) {
  Trajectory out{traj.flight_id, traj.departure, traj.arrival, {}};
  const auto& pts = traj.points;
  if (pts.empty()) return out;
  const auto dist = [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
    return geo::vincenty_distance(geo::position(a), geo::position(b));
  };
  std::size_t start = 0;
  if (pts.size() >= 3 && dist(pts[0], pts[1]) > max_jump_km && dist(pts[1], pts[2]) <= max_jump_km) {
    start = 1;
  }
  out.points.reserve(pts.size() - start);
  out.points.push_back(pts[start]);
  for (std::size_t i = start + 1; i < pts.size(); ++i) {
    if (dist(out.points.back(), pts[i]) <= max_jump_km) out.points.push_back(pts[i]);
  }
  return out;
}

Trajectory clean(const Trajectory& traj, const ResampleOptions& resample_options, double max_jump_km) {
  return resample(filter_outliers(resample(traj, resample_options), max_jump_km), resample_options);
}

}  // namespace adsbae::ingest
