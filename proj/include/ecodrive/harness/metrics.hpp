#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ecodrive {

inline constexpr double kMetersPerMile = 1609.344;
inline constexpr double kLitersPerGallon = 3.78541;
inline constexpr double kDieselDensity = 0.85;  // kg/L

inline double grams_to_gallons(double grams) { return grams / 1000.0 / kDieselDensity / kLitersPerGallon; }

/// Fuel economy in miles per gallon. Zero distance gives 0; positive
/// distance on zero fuel gives +infinity.
inline double compute_mpg(double distance_m, double fuel_g) {
  if (fuel_g < 0.0) throw std::invalid_argument("compute_mpg: negative fuel");
  double miles = distance_m / kMetersPerMile;
  if (miles <= 0.0) return 0.0;
  if (fuel_g == 0.0) return std::numeric_limits<double>::infinity();
  return miles / grams_to_gallons(fuel_g);
}

/// RMS of (desired_t - realized_{t+1}) over the episode.
inline double compute_accel_rmse(std::span<const std::pair<double, double>> trace) {
  if (trace.empty()) throw std::invalid_argument("compute_accel_rmse: empty trace");
  double sum = 0.0;
  for (auto [desired, realized] : trace) sum += (desired - realized) * (desired - realized);
  return std::sqrt(sum / static_cast<double>(trace.size()));
}

struct EpisodeMetrics {
  int episode = 0;
  int steps = 0;
  double distance_mi = 0.0;
  double fuel_gal = 0.0;
  double mpg = 0.0;
  double accel_rmse = 0.0;
  int shifts = 0;
  int rejected_shifts = 0;
  double total_reward = 0.0;
  double mean_reward = 0.0;
  // Mean per-step penalties.
  double tracking = 0.0;
  double torque = 0.0;
  double fuel = 0.0;
  double shift = 0.0;
  double reserve = 0.0;
  bool crashed = false;

  static const char* csv_header() {
    return "episode,steps,distance_mi,fuel_gal,mpg,accel_rmse,shifts,rejected_shifts,total_reward,mean_reward,"
           "pen_tracking,pen_torque,pen_fuel,pen_shift,pen_reserve,crashed";
  }

  void write_csv_row(std::ostream& out) const {
    auto num = [&out](double v) {
      char buf[32];
      auto r = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, r.ptr - buf);
    };
    out << episode << ',' << steps << ',';
    for (double v : {distance_mi, fuel_gal, mpg, accel_rmse}) {
      num(v);
      out << ',';
    }
    out << shifts << ',' << rejected_shifts << ',';
    for (double v : {total_reward, mean_reward, tracking, torque, fuel, shift, reserve}) {
      num(v);
      out << ',';
    }
    out << (crashed ? 1 : 0) << '\n';
  }

  static EpisodeMetrics parse_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 16) throw std::runtime_error("metrics row: expected 16 columns, got " + std::to_string(cells.size()));
    auto d = [](const std::string& s) {
      double v = 0.0;
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        if (s == "inf") return std::numeric_limits<double>::infinity();
        throw std::runtime_error("metrics row: bad number '" + s + "'");
      }
      return v;
    };
    EpisodeMetrics m;
    m.episode = static_cast<int>(d(cells[0]));
    m.steps = static_cast<int>(d(cells[1]));
    m.distance_mi = d(cells[2]);
    m.fuel_gal = d(cells[3]);
    m.mpg = d(cells[4]);
    m.accel_rmse = d(cells[5]);
    m.shifts = static_cast<int>(d(cells[6]));
    m.rejected_shifts = static_cast<int>(d(cells[7]));
    m.total_reward = d(cells[8]);
    m.mean_reward = d(cells[9]);
    m.tracking = d(cells[10]);
    m.torque = d(cells[11]);
    m.fuel = d(cells[12]);
    m.shift = d(cells[13]);
    m.reserve = d(cells[14]);
    m.crashed = d(cells[15]) != 0.0;
    return m;
  }
};

inline std::vector<EpisodeMetrics> read_metrics_csv(std::istream& in) {
  std::vector<EpisodeMetrics> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    rows.push_back(EpisodeMetrics::parse_csv_row(line));
  }
  return rows;
}

}  // namespace ecodrive
