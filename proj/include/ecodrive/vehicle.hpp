#pragma once

// Physical description of the simulated heavy commercial vehicle: chassis
// constants, the 10-speed gearbox, the engine envelope and the fuel map.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ecodrive {

inline constexpr double kRpmToRadPerSec = std::numbers::pi / 30.0;

/// Piecewise-linear function of one variable, held constant beyond its end points.
class Curve1d {
 public:
  Curve1d() = default;
  Curve1d(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.empty() || x_.size() != y_.size())
      throw std::invalid_argument("Curve1d: breakpoint and value counts differ or are empty");
    for (std::size_t i = 1; i < x_.size(); ++i)
      if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("Curve1d: breakpoints must be strictly increasing");
  }

  double operator()(double x) const {
    if (x_.empty()) return 0.0;
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    auto hi = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
    std::size_t lo = hi - 1;
    double f = (x - x_[lo]) / (x_[hi] - x_[lo]);
    return y_[lo] + f * (y_[hi] - y_[lo]);
  }

  bool empty() const { return x_.empty(); }
  const std::vector<double>& breakpoints() const { return x_; }
  const std::vector<double>& values() const { return y_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

/// Rectangular lookup table with bilinear interpolation. Queries outside the
/// grid are clamped to the nearest edge. Values are stored row-major with one
/// row per row-axis breakpoint.
class Table2d {
 public:
  Table2d() = default;
  Table2d(std::vector<double> rows, std::vector<double> cols, std::vector<double> values)
      : rows_(std::move(rows)), cols_(std::move(cols)), values_(std::move(values)) {
    if (rows_.size() < 2 || cols_.size() < 2)
      throw std::invalid_argument("Table2d: need at least a 2x2 grid");
    if (values_.size() != rows_.size() * cols_.size())
      throw std::invalid_argument("Table2d: value count does not match grid size");
    auto increasing = [](const std::vector<double>& v) {
      return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
    };
    if (!increasing(rows_) || !increasing(cols_))
      throw std::invalid_argument("Table2d: grid axes must be strictly increasing");
  }

  double operator()(double r, double c) const {
    auto [i, fr] = locate(rows_, r);
    auto [j, fc] = locate(cols_, c);
    double v00 = at(i, j), v01 = at(i, j + 1), v10 = at(i + 1, j), v11 = at(i + 1, j + 1);
    return (1 - fr) * ((1 - fc) * v00 + fc * v01) + fr * ((1 - fc) * v10 + fc * v11);
  }

  double at(std::size_t i, std::size_t j) const { return values_[i * cols_.size() + j]; }
  double max_value() const { return *std::max_element(values_.begin(), values_.end()); }
  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
  const std::vector<double>& rows() const { return rows_; }
  const std::vector<double>& cols() const { return cols_; }
  const std::vector<double>& values() const { return values_; }
  bool empty() const { return values_.empty(); }

 private:
  static std::pair<std::size_t, double> locate(const std::vector<double>& axis, double x) {
    if (x <= axis.front()) return {0, 0.0};
    if (x >= axis.back()) return {axis.size() - 2, 1.0};
    auto hi = static_cast<std::size_t>(std::upper_bound(axis.begin(), axis.end(), x) - axis.begin());
    std::size_t lo = hi - 1;
    return {lo, (x - axis[lo]) / (axis[hi] - axis[lo])};
  }

  std::vector<double> rows_;
  std::vector<double> cols_;
  std::vector<double> values_;
};

struct VehicleConfig {
  double mass = 9070.0;               // kg, effective
  double frontal_area = 7.71;         // m^2
  double drag_coefficient = 0.8;
  double rolling_coefficient = 0.015;
  double wheel_radius = 0.498;        // m
  double air_density = 1.2;           // kg/m^3
  double gravity = 9.81;              // m/s^2

  std::vector<double> gear_ratios{12.0, 9.0, 6.75, 5.06, 3.80, 2.85, 2.14, 1.60, 1.20, 0.90};
  double final_drive = 4.0;

  double idle_speed = 700.0 * kRpmToRadPerSec;   // rad/s
  double max_speed = 2200.0 * kRpmToRadPerSec;   // rad/s
  Curve1d max_torque_curve;                      // N·m over rad/s, zero above max_speed
  double engine_brake_peak = 150.0;              // |T_e,brake| at max_speed, N·m
  double service_brake_limit = 50000.0;          // N·m at the wheels

  double idle_fuel_rate = 0.2;                   // g/s
  Table2d fuel_map;                              // g/s over (rad/s, N·m)

  Curve1d grade;                                 // rad over position (m); empty means flat

  int gear_count() const { return static_cast<int>(gear_ratios.size()); }
  bool valid_gear(int gear) const { return gear >= 1 && gear <= gear_count(); }

  double total_ratio(int gear) const {
    if (!valid_gear(gear)) throw std::out_of_range("gear index out of range: " + std::to_string(gear));
    return gear_ratios[static_cast<std::size_t>(gear - 1)] * final_drive;
  }

  /// Engine speed the wheels would impose in `gear`, without the idle clamp.
  double coupled_engine_speed(double velocity, int gear) const {
    return velocity / wheel_radius * total_ratio(gear);
  }

  /// Full-load torque; the governor cuts fuel above max_speed.
  double max_engine_torque(double engine_speed) const {
    if (engine_speed > max_speed * (1.0 + 1e-12)) return 0.0;
    return max_torque_curve(engine_speed);
  }

  double engine_brake_torque(double engine_speed) const {
    return -engine_brake_peak * std::clamp(engine_speed / max_speed, 0.0, 1.0);
  }

  double peak_engine_torque() const {
    double peak = 0.0;
    for (double t : max_torque_curve.values()) peak = std::max(peak, t);
    return peak;
  }

  /// Normalizer for torque commands: peak engine torque through first gear.
  double max_wheel_torque() const { return peak_engine_torque() * total_ratio(1); }

  double road_grade(double position) const { return grade.empty() ? 0.0 : grade(position); }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("vehicle: ") + what + " must be positive");
    };
    positive(mass, "mass");
    positive(frontal_area, "frontal_area");
    positive(wheel_radius, "wheel_radius");
    positive(air_density, "air_density");
    positive(gravity, "gravity");
    positive(final_drive, "final_drive");
    positive(idle_speed, "idle_speed");
    positive(service_brake_limit, "service_brake_limit");
    if (drag_coefficient < 0 || rolling_coefficient < 0) throw std::invalid_argument("vehicle: negative resistance coefficient");
    if (engine_brake_peak < 0) throw std::invalid_argument("vehicle: engine_brake_peak must be >= 0");
    if (!(max_speed > idle_speed)) throw std::invalid_argument("vehicle: max_speed must exceed idle_speed");
    if (gear_ratios.empty()) throw std::invalid_argument("vehicle: no gears");
    for (std::size_t i = 0; i < gear_ratios.size(); ++i) {
      positive(gear_ratios[i], "gear ratio");
      if (i > 0 && !(gear_ratios[i] < gear_ratios[i - 1]))
        throw std::invalid_argument("vehicle: gear ratios must strictly decrease with gear index");
    }
    if (max_torque_curve.empty()) throw std::invalid_argument("vehicle: missing max torque curve");
    for (int k = 0; k <= 100; ++k) {
      double w = idle_speed + (max_speed - idle_speed) * k / 100.0;
      if (!(max_torque_curve(w) > 0.0)) throw std::invalid_argument("vehicle: max torque must be positive between idle and max speed");
    }
    if (fuel_map.empty()) throw std::invalid_argument("vehicle: missing fuel map");
    if (fuel_map.min_value() < 0.0) throw std::invalid_argument("vehicle: fuel map has negative entries");
  }
};

/// Flat-topped heavy-duty diesel full-load curve, ~1100 N·m mid-range.
inline Curve1d default_max_torque_curve() {
  std::vector<double> rpm{700, 900, 1100, 1300, 1500, 1700, 1900, 2100, 2200};
  std::vector<double> nm{700, 950, 1100, 1100, 1100, 1050, 950, 820, 750};
  for (double& r : rpm) r *= kRpmToRadPerSec;
  return {std::move(rpm), std::move(nm)};
}

struct FuelMapShape {
  double bsfc_min = 195.0;        // g/kWh at the sweet spot
  double sweet_speed_frac = 0.6;  // of max engine speed
  double sweet_torque_frac = 0.8; // of peak torque
  double speed_curvature = 1.5;
  double torque_curvature = 0.6;
};

/// Willans-line friction fuel plus a BSFC bowl. Friction fuel scales with
/// engine speed and equals the idle rate at idle; the bowl makes low-speed,
/// high-torque operation the most efficient way to deliver a given power.
inline Table2d synthetic_fuel_map(double idle_speed, double max_speed, double peak_torque, double idle_rate,
                                  const FuelMapShape& shape = {}) {
  std::vector<double> speeds;
  for (int rpm = 600; rpm <= 2400; rpm += 100) speeds.push_back(rpm * kRpmToRadPerSec);
  std::vector<double> torques;
  for (int nm = 0; nm <= 1200; nm += 100) torques.push_back(nm);

  double sweet_w = shape.sweet_speed_frac * max_speed;
  double sweet_t = shape.sweet_torque_frac * peak_torque;
  std::vector<double> values;
  values.reserve(speeds.size() * torques.size());
  for (double w : speeds) {
    for (double t : torques) {
      double dw = (w - sweet_w) / max_speed;
      double dt = (t - sweet_t) / peak_torque;
      double bsfc = shape.bsfc_min * (1.0 + shape.speed_curvature * dw * dw + shape.torque_curvature * dt * dt);
      double friction = idle_rate * w / idle_speed;
      values.push_back(friction + t * w * bsfc / 3.6e6);
    }
  }
  return {std::move(speeds), std::move(torques), std::move(values)};
}

inline VehicleConfig default_vehicle() {
  VehicleConfig cfg;
  cfg.max_torque_curve = default_max_torque_curve();
  cfg.fuel_map = synthetic_fuel_map(cfg.idle_speed, cfg.max_speed, cfg.peak_engine_torque(), cfg.idle_fuel_rate);
  return cfg;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return cells;
}

inline double parse_number(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw std::runtime_error(where + ": not a number: '" + text + "'");
  return v;
}

}  // namespace detail

/// Fuel map CSV: header row `<label>,T_1,...,T_m` (N·m), then one row per
/// engine speed `w_i,f_i1,...,f_im` (rad/s, g/s).
inline Table2d load_fuel_map_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fuel map: " + path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> torques, speeds, values;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv_line(line);
    std::string where = path + ":" + std::to_string(lineno);
    if (torques.empty()) {
      for (std::size_t j = 1; j < cells.size(); ++j) torques.push_back(detail::parse_number(cells[j], where));
      if (torques.size() < 2) throw std::runtime_error(where + ": header needs at least two torque columns");
      continue;
    }
    if (cells.size() != torques.size() + 1) throw std::runtime_error(where + ": expected " + std::to_string(torques.size() + 1) + " columns");
    speeds.push_back(detail::parse_number(cells[0], where));
    for (std::size_t j = 1; j < cells.size(); ++j) values.push_back(detail::parse_number(cells[j], where));
  }
  return {std::move(speeds), std::move(torques), std::move(values)};
}

/// Two-column curve CSV with a header row: `speed,torque` (rad/s, N·m).
inline Curve1d load_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open curve: " + path);
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  std::vector<double> x, y;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (header) {
      header = false;
      continue;
    }
    auto cells = detail::split_csv_line(line);
    std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != 2) throw std::runtime_error(where + ": expected 2 columns");
    x.push_back(detail::parse_number(cells[0], where));
    y.push_back(detail::parse_number(cells[1], where));
  }
  return {std::move(x), std::move(y)};
}

}  // namespace ecodrive
