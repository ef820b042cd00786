#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "ecodrive/driver.hpp"

using namespace ecodrive;

namespace {

constexpr double kFar = 1e12;

// Root of the IDM acceleration in the gap by bisection.
double equilibrium_gap_by_root(double v, const IdmParams& p) {
  double lo = 1e-3, hi = 1e5;
  for (int i = 0; i < 300; ++i) {
    double mid = 0.5 * (lo + hi);
    (idm_accel(v, {v, 0.0, mid, 0.0}, p) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

DriveCycle cycle_from(const std::string& text, SpeedUnits units = SpeedUnits::mps) {
  std::istringstream in(text);
  return parse_cycle(in, "inline", units);
}

}  // namespace

TEST(Idm, FreeRoadStart) {
  IdmParams p;
  EXPECT_NEAR(idm_accel(0.0, {0.0, 0.0, kFar, 0.0}, p), 2.0, 1e-12);
}

TEST(Idm, FreeRoadEquilibrium) {
  IdmParams p;
  EXPECT_NEAR(idm_accel(p.desired_speed, {p.desired_speed, 0.0, kFar, 0.0}, p), 0.0, 1e-12);
}

TEST(Idm, EquilibriumGapMatchesClosedForm) {
  IdmParams p;
  double s_star = p.standstill_gap + 12.0 * p.time_headway;
  double closed = s_star / std::sqrt(1.0 - std::pow(12.0 / p.desired_speed, p.exponent));
  EXPECT_NEAR(equilibrium_gap_by_root(12.0, p), closed, 1e-9 * closed);
}

TEST(Idm, DesiredGapFlooredAtStandstill) {
  IdmParams p;
  EXPECT_DOUBLE_EQ(idm_desired_gap(5.0, -50.0, p), p.standstill_gap);
  EXPECT_DOUBLE_EQ(idm_desired_gap(0.0, 0.0, p), p.standstill_gap);
}

TEST(Idm, OutputBoundsAndErrors) {
  IdmParams p;
  EXPECT_DOUBLE_EQ(idm_accel(20.0, {0.0, 0.0, 0.1, 20.0}, p), -p.max_brake);
  EXPECT_THROW(idm_accel(5.0, {0.0, 0.0, 0.0, 0.0}, p), std::invalid_argument);
  EXPECT_THROW(idm_accel(5.0, {0.0, 0.0, -1.0, 0.0}, p), std::invalid_argument);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uv(0.0, 30.0), ug(0.01, 300.0), ur(-15.0, 15.0);
  for (int k = 0; k < 10000; ++k) {
    double a = idm_accel(uv(rng), {0.0, 0.0, ug(rng), ur(rng)}, p);
    ASSERT_LE(a, p.max_accel);
    ASSERT_GE(a, -p.max_brake);
  }
}

TEST(Idm, ParamValidation) {
  IdmParams p;
  p.exponent = 0.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = IdmParams{};
  p.time_headway = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Idm, ClosedLoopConvergesToEquilibrium) {
  IdmParams p;
  double h = 0.1, v = 8.0, gap = 25.0, lead = 12.0;
  for (int k = 0; k < 3000; ++k) {
    double a = std::max(idm_accel(v, {lead, 0.0, gap, v - lead}, p), -v / h);
    double v1 = v + a * h;
    gap += (lead - 0.5 * (v + v1)) * h;
    v = v1;
  }
  double s_eq = equilibrium_gap_by_root(12.0, p);
  EXPECT_LT(std::abs(v - lead), 0.1);
  EXPECT_LT(std::abs(gap - s_eq), 0.01 * s_eq);
}

TEST(DriveCycle, MinimalFile) {
  DriveCycle c = cycle_from("t,v\n0,0\n1,1.5\n2,3\n");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(c.speed[2], 3.0);
}

TEST(DriveCycle, MphConversion) {
  DriveCycle c = cycle_from("t,v\n0,10\n1,20\n", SpeedUnits::mph);
  EXPECT_DOUBLE_EQ(c.speed[0], 10 * 0.44704);
  EXPECT_DOUBLE_EQ(c.speed[1], 20 * 0.44704);
  EXPECT_EQ(parse_units("mph"), SpeedUnits::mph);
  EXPECT_THROW(parse_units("kph"), std::invalid_argument);
}

TEST(DriveCycle, ResamplesToOneHertz) {
  DriveCycle c = cycle_from("t,v\n0,0\n0.5,1\n2,4\n");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(c.time[1], 1.0);
  EXPECT_NEAR(c.speed[1], 1.0 + (0.5 / 1.5) * 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(c.speed[2], 4.0);
}

TEST(DriveCycle, ParseErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    try {
      cycle_from(text);
    } catch (const CycleParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("t,v\n0,1\n1,-2\n"), 3u);
  EXPECT_EQ(line_of("t,v\n0,1\n0,2\n"), 3u);
  EXPECT_EQ(line_of("t,v\n0,1\n1,abc\n"), 3u);
  EXPECT_EQ(line_of("t,v\n0,1,2\n"), 2u);
  EXPECT_EQ(line_of("time,speed\n0,1\n"), 1u);
}

TEST(DriveCycle, InterpolationAndHold) {
  DriveCycle c = cycle_from("t,v\n0,2\n1,4\n2,8\n");
  EXPECT_DOUBLE_EQ(c.speed_at(1.0), 4.0);
  EXPECT_DOUBLE_EQ(c.speed_at(1.25), 5.0);
  EXPECT_DOUBLE_EQ(c.speed_at(50.0), 8.0);
}

TEST(DriveCycle, SerializeRoundTripIsIdempotent) {
  DriveCycle c = load_cycle(std::string(ECODRIVE_DATA_DIR) + "/cycles/stopgo_600.csv");
  std::ostringstream out;
  write_cycle(out, c);
  DriveCycle again = cycle_from(out.str());
  EXPECT_EQ(again.time, c.time);
  EXPECT_EQ(again.speed, c.speed);
}

TEST(DriveCycle, ConcatenationOfBundledFiles) {
  std::string dir = std::string(ECODRIVE_DATA_DIR) + "/cycles/";
  DriveCycle a = load_cycle(dir + "stopgo_300.csv");
  DriveCycle b = load_cycle(dir + "stopgo_600.csv");
  DriveCycle c = concat_cycles(a, b);
  ASSERT_EQ(c.size(), a.size() + b.size());
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.time[a.size()], a.time.back() + 1.0);
  EXPECT_DOUBLE_EQ(c.speed[a.size()], b.speed[0]);
  DriveCycle empty;
  EXPECT_EQ(concat_cycles(empty, a).speed, a.speed);
}

TEST(DriveCycle, BundledCyclesHaveExpectedLength) {
  std::string dir = std::string(ECODRIVE_DATA_DIR) + "/cycles/";
  EXPECT_EQ(load_cycle(dir + "stopgo_300.csv").size(), 300u);
  EXPECT_EQ(load_cycle(dir + "stopgo_600.csv").size(), 600u);
}

TEST(LeadProfile, OffMatchesSamples) {
  DriveCycle c = cycle_from("t,v\n0,0\n1,3\n2,5\n");
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_DOUBLE_EQ(lead_velocity(c.time[i], c, false, 9), c.speed[i]);
  EXPECT_THROW(lead_velocity(-1.0, c, false, 9), std::invalid_argument);
}

TEST(LeadProfile, SeededFactorsAreReproducibleAndBounded) {
  DriveCycle c = load_cycle(std::string(ECODRIVE_DATA_DIR) + "/cycles/stopgo_600.csv");
  LeadProfile::Randomization r;
  r.enabled = true;
  LeadProfile a(c, r, 42), b(c, r, 42), other(c, r, 43);
  EXPECT_EQ(a.factors(), b.factors());
  EXPECT_NE(a.factors(), other.factors());
  EXPECT_EQ(a.factors().size(), 10u);
  for (double t = 0.0; t <= 600.0; t += 0.5) {
    ASSERT_GE(a.speed(t), 0.0);
    if (c.speed_at(t) == 0.0) ASSERT_EQ(a.speed(t), 0.0);
  }
  // Factor is constant inside each 60 s block.
  EXPECT_EQ(a.factor_at(61.0), a.factor_at(119.9));
}

TEST(LeadProfile, FactorsAreUniformChiSquare) {
  DriveCycle c = load_cycle(std::string(ECODRIVE_DATA_DIR) + "/cycles/stopgo_600.csv");
  LeadProfile::Randomization r;
  r.enabled = true;
  constexpr int kBins = 10;
  std::array<int, kBins> counts{};
  int n = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    LeadProfile lead(c, r, seed);
    for (double f : lead.factors()) {
      ASSERT_GE(f, 0.85);
      ASSERT_LE(f, 1.15);
      ++counts[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>((f - 0.85) / 0.03)))];
      ++n;
    }
  }
  double expected = static_cast<double>(n) / kBins, chi2 = 0.0;
  for (int k : counts) chi2 += (k - expected) * (k - expected) / expected;
  // 99.9th percentile of chi-square with 9 degrees of freedom.
  EXPECT_LT(chi2, 27.88);
}

TEST(LeadProfile, UnitFactorMatchesOff) {
  DriveCycle c = cycle_from("t,v\n0,0\n1,3\n2,5\n");
  LeadProfile::Randomization r;
  r.enabled = true;
  r.low = r.high = 1.0;
  LeadProfile p(c, r, 5);
  for (double t = 0.0; t <= 2.0; t += 0.25) EXPECT_DOUBLE_EQ(p.speed(t), lead_velocity(t, c, false, 0));
}

TEST(DriveCycle, SpeedQuantile) {
  DriveCycle c = cycle_from("t,v\n0,0\n1,1\n2,2\n3,3\n4,4\n5,5\n6,6\n7,7\n8,8\n9,9\n");
  EXPECT_DOUBLE_EQ(c.speed_quantile(0.9), 8.0);
  EXPECT_DOUBLE_EQ(c.speed_quantile(1.0), 9.0);
}
