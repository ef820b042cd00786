#pragma once

// Car-following driver (Intelligent Driver Model) and the drive-cycle led
// vehicle it follows.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecodrive/vehicle.hpp"

namespace ecodrive {

struct IdmParams {
  double max_accel = 2.0;      // m/s^2
  double comfort_decel = 3.0;  // m/s^2
  double exponent = 4.0;
  double time_headway = 3.0;   // s
  double standstill_gap = 2.0; // m
  double desired_speed = 15.0; // m/s; normally derived from the cycle
  double max_brake = 6.0;      // m/s^2, output floor

  void validate() const {
    if (!(max_accel > 0 && comfort_decel > 0 && time_headway > 0 && standstill_gap > 0 && desired_speed > 0 && max_brake > 0))
      throw std::invalid_argument("IDM parameters must be positive");
    if (!(exponent >= 1.0)) throw std::invalid_argument("IDM exponent must be >= 1");
  }
};

struct TrafficState {
  double lead_speed = 0.0;     // m/s
  double lead_position = 0.0;  // m
  double gap = 0.0;            // m
  double closing_speed = 0.0;  // m/s, ego minus lead
};

/// Dynamic desired gap s*(v, dv), never below the standstill gap.
inline double idm_desired_gap(double velocity, double closing_speed, const IdmParams& p) {
  double dynamic = velocity * p.time_headway + velocity * closing_speed / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
  return p.standstill_gap + std::max(0.0, dynamic);
}

inline double idm_accel(double velocity, const TrafficState& traffic, const IdmParams& p) {
  if (!(traffic.gap > 0.0)) throw std::invalid_argument("idm_accel: gap must be positive");
  double free_road = std::pow(std::max(0.0, velocity) / p.desired_speed, p.exponent);
  double interaction = idm_desired_gap(velocity, traffic.closing_speed, p) / traffic.gap;
  double a = p.max_accel * (1.0 - free_road - interaction * interaction);
  return std::clamp(a, -p.max_brake, p.max_accel);
}

struct DriveCycle {
  std::string name;
  std::vector<double> time;   // s, uniform 1 s spacing
  std::vector<double> speed;  // m/s

  std::size_t size() const { return time.size(); }
  bool empty() const { return time.empty(); }
  double duration() const { return empty() ? 0.0 : time.back() - time.front(); }

  /// Linear interpolation; holds the end values outside the sampled range.
  double speed_at(double t) const {
    if (empty()) return 0.0;
    if (t <= time.front()) return speed.front();
    if (t >= time.back()) return speed.back();
    double rel = t - time.front();
    auto i = static_cast<std::size_t>(std::floor(rel));
    double f = rel - static_cast<double>(i);
    if (i + 1 >= speed.size()) return speed.back();
    return speed[i] + f * (speed[i + 1] - speed[i]);
  }

  /// Speed at the given quantile of the samples (nearest-rank).
  double speed_quantile(double q) const {
    if (empty()) return 0.0;
    std::vector<double> sorted = speed;
    std::sort(sorted.begin(), sorted.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
  }

  void validate() const {
    if (time.size() != speed.size()) throw std::invalid_argument("cycle '" + name + "': size mismatch");
    for (std::size_t i = 0; i < time.size(); ++i) {
      if (!std::isfinite(time[i]) || !std::isfinite(speed[i])) throw std::invalid_argument("cycle '" + name + "': non-finite sample");
      if (speed[i] < 0.0) throw std::invalid_argument("cycle '" + name + "': negative speed");
      if (i > 0 && std::abs(time[i] - time[i - 1] - 1.0) > 1e-9)
        throw std::invalid_argument("cycle '" + name + "': samples are not 1 s apart");
    }
  }
};

enum class SpeedUnits { mps, mph };

inline constexpr double kMphToMps = 0.44704;

inline SpeedUnits parse_units(const std::string& text) {
  if (text == "mps") return SpeedUnits::mps;
  if (text == "mph") return SpeedUnits::mph;
  throw std::invalid_argument("unknown speed units '" + text + "' (expected mps or mph)");
}

class CycleParseError : public std::runtime_error {
 public:
  CycleParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Resamples strictly increasing (t, v) points onto a 1 Hz grid starting at t_0.
inline DriveCycle resample_1hz(std::string name, const std::vector<double>& t, const std::vector<double>& v) {
  DriveCycle c;
  c.name = std::move(name);
  if (t.empty()) return c;
  auto n = static_cast<std::size_t>(std::floor(t.back() - t.front() + 1e-9)) + 1;
  c.time.reserve(n);
  c.speed.reserve(n);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double tk = t.front() + static_cast<double>(k);
    while (j + 1 < t.size() && t[j + 1] <= tk) ++j;
    double vk = v[j];
    if (j + 1 < t.size() && tk > t[j]) vk = v[j] + (tk - t[j]) / (t[j + 1] - t[j]) * (v[j + 1] - v[j]);
    c.time.push_back(tk);
    c.speed.push_back(vk);
  }
  return c;
}

/// Two-column CSV with header `t,v`.
inline DriveCycle parse_cycle(std::istream& in, const std::string& name, SpeedUnits units = SpeedUnits::mps) {
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::vector<double> t, v;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      if (cells.size() != 2 || cells[0] != "t" || cells[1] != "v")
        throw CycleParseError(name, lineno, "expected header 't,v'");
      continue;
    }
    if (cells.size() != 2) throw CycleParseError(name, lineno, "expected 2 columns, got " + std::to_string(cells.size()));
    double tv = 0.0, vv = 0.0;
    try {
      tv = detail::parse_number(cells[0], "t");
      vv = detail::parse_number(cells[1], "v");
    } catch (const std::runtime_error& e) {
      throw CycleParseError(name, lineno, e.what());
    }
    if (vv < 0.0) throw CycleParseError(name, lineno, "negative speed");
    if (!t.empty() && !(tv > t.back())) throw CycleParseError(name, lineno, "time is not strictly increasing");
    t.push_back(tv);
    v.push_back(units == SpeedUnits::mph ? vv * kMphToMps : vv);
  }
  if (!header_seen) throw CycleParseError(name, lineno, "empty file");
  DriveCycle c = resample_1hz(name, t, v);
  c.validate();
  return c;
}

inline DriveCycle load_cycle(const std::string& path, SpeedUnits units = SpeedUnits::mps) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open drive cycle: " + path);
  return parse_cycle(in, path, units);
}

inline void write_cycle(std::ostream& out, const DriveCycle& c) {
  out << "t,v\n";
  char buf[64];
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto r1 = std::to_chars(buf, buf + sizeof buf, c.time[i]);
    *r1.ptr++ = ',';
    auto r2 = std::to_chars(r1.ptr, buf + sizeof buf, c.speed[i]);
    out.write(buf, r2.ptr - buf);
    out << '\n';
  }
}

inline void save_cycle(const std::string& path, const DriveCycle& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write drive cycle: " + path);
  write_cycle(out, c);
}

/// Appends `b` one second after the end of `a`.
inline DriveCycle concat_cycles(const DriveCycle& a, const DriveCycle& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  DriveCycle c = a;
  c.name = a.name + "+" + b.name;
  double shift = a.time.back() + 1.0 - b.time.front();
  for (std::size_t i = 0; i < b.size(); ++i) {
    c.time.push_back(b.time[i] + shift);
    c.speed.push_back(b.speed[i]);
  }
  return c;
}

/// Lead-vehicle speed trace. With randomization on, the cycle speed is
/// scaled by a factor drawn from U[low, high] and redrawn every `period`
/// seconds; stops stay stops.
class LeadProfile {
 public:
  struct Randomization {
    bool enabled = false;
    double period = 60.0;
    double low = 0.85;
    double high = 1.15;
  };

  LeadProfile(const DriveCycle& cycle, Randomization rnd, std::uint64_t seed) : cycle_(&cycle), rnd_(rnd) {
    if (!rnd_.enabled) return;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> draw(rnd_.low, rnd_.high);
    auto blocks = static_cast<std::size_t>(std::floor(cycle.duration() / rnd_.period)) + 1;
    factors_.reserve(blocks);
    for (std::size_t i = 0; i < blocks; ++i) factors_.push_back(draw(rng));
  }

  explicit LeadProfile(const DriveCycle& cycle) : LeadProfile(cycle, {}, 0) {}

  double factor_at(double t) const {
    if (factors_.empty()) return 1.0;
    double rel = std::max(0.0, t - cycle_->time.front());
    auto i = std::min(static_cast<std::size_t>(std::floor(rel / rnd_.period)), factors_.size() - 1);
    return factors_[i];
  }

  double speed(double t) const {
    if (t < 0.0) throw std::invalid_argument("lead speed queried at negative time");
    return std::max(0.0, cycle_->speed_at(t) * factor_at(t));
  }

  const std::vector<double>& factors() const { return factors_; }

 private:
  const DriveCycle* cycle_;
  Randomization rnd_;
  std::vector<double> factors_;
};

/// Lead speed at time t (free-function form of LeadProfile::speed).
inline double lead_velocity(double t, const DriveCycle& cycle, bool randomize, std::uint64_t seed) {
  LeadProfile::Randomization rnd;
  rnd.enabled = randomize;
  return LeadProfile(cycle, rnd, seed).speed(t);
}

}  // namespace ecodrive
