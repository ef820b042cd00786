#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ecodrive/powertrain_env.hpp"

using namespace ecodrive;

namespace {

const VehicleConfig& vehicle() {
  static const VehicleConfig v = default_vehicle();
  return v;
}

RewardWeights resolved_a() { return RewardWeights::set_a().resolved(vehicle()); }

// Independent fine-step integration of the same model for one control period.
struct FineResult {
  double velocity, distance, wheel_work, resistance_work;
};

FineResult fine_integrate(double v, int gear, double request, double dt, double h) {
  const auto& cfg = vehicle();
  FineResult r{v, 0.0, 0.0, 0.0};
  int n = static_cast<int>(std::lround(dt / h));
  for (int k = 0; k < n; ++k) {
    TorqueSplit s = apply_torque(request, r.velocity, gear, cfg);
    double traction = s.wheel / cfg.wheel_radius;
    double resist = cfg.mass * cfg.gravity * cfg.rolling_coefficient +
                    0.5 * cfg.air_density * cfg.drag_coefficient * cfg.frontal_area * r.velocity * r.velocity;
    double a = (traction - resist) / cfg.mass;
    double v1 = std::max(0.0, r.velocity + a * h);
    double ds = 0.5 * (r.velocity + v1) * h;
    r.wheel_work += traction * ds;
    r.resistance_work += resist * ds;
    r.distance += ds;
    r.velocity = v1;
  }
  return r;
}

}  // namespace

TEST(LongitudinalAccel, RestStaysAtRest) { EXPECT_DOUBLE_EQ(longitudinal_accel(0.0, 0.0, 0.0, vehicle()), 0.0); }

TEST(LongitudinalAccel, CoastDownClosedForm) {
  const auto& c = vehicle();
  double expected = -(c.gravity * c.rolling_coefficient + 0.5 * 1.2 * c.drag_coefficient * c.frontal_area * 400.0 / c.mass);
  EXPECT_NEAR(longitudinal_accel(20.0, 0.0, 0.0, c), expected, 1e-12);
  EXPECT_LT(expected, 0.0);
}

TEST(LongitudinalAccel, SteadyStateTorqueByBisection) {
  const auto& c = vehicle();
  double lo = 0.0, hi = 20000.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (longitudinal_accel(15.0, mid, 0.0, c) < 0.0 ? lo : hi) = mid;
  }
  double t_star = 0.5 * (lo + hi);
  double resist = c.mass * c.gravity * c.rolling_coefficient + 0.5 * c.air_density * c.drag_coefficient * c.frontal_area * 225.0;
  EXPECT_NEAR(t_star / c.wheel_radius, resist, 1e-6);
}

TEST(LongitudinalAccel, StaticFrictionHoldsWeakTorque) {
  const auto& c = vehicle();
  double roll_torque = rolling_resistance(0.0, c) * c.wheel_radius;
  EXPECT_DOUBLE_EQ(longitudinal_accel(0.0, 0.9 * roll_torque, 0.0, c), 0.0);
  EXPECT_DOUBLE_EQ(longitudinal_accel(0.0, -5000.0, 0.0, c), 0.0);
  EXPECT_GT(longitudinal_accel(0.0, 2.0 * roll_torque, 0.0, c), 0.0);
}

TEST(LongitudinalAccel, RejectsBadInput) {
  EXPECT_THROW(longitudinal_accel(-1.0, 0.0, 0.0, vehicle()), std::invalid_argument);
  EXPECT_THROW(longitudinal_accel(NAN, 0.0, 0.0, vehicle()), std::invalid_argument);
  EXPECT_THROW(longitudinal_accel(1.0, INFINITY, 0.0, vehicle()), std::invalid_argument);
}

TEST(LongitudinalAccel, GradeOpposesClimbing) {
  const auto& c = vehicle();
  double flat = longitudinal_accel(10.0, 3000.0, 0.0, c);
  double uphill = longitudinal_accel(10.0, 3000.0, 0.02, c);
  EXPECT_NEAR(flat - uphill,
              (c.mass * c.gravity * std::sin(0.02) - c.mass * c.gravity * c.rolling_coefficient * (1.0 - std::cos(0.02))) / c.mass,
              1e-12);
}

TEST(EngineSpeed, IdleClampAndArithmetic) {
  VehicleConfig c = vehicle();
  for (int g = 1; g <= 10; ++g) EXPECT_DOUBLE_EQ(engine_speed(0.0, g, c), c.idle_speed);
  c.gear_ratios = {1.0};
  c.final_drive = 4.0;
  c.idle_speed = 1.0;
  EXPECT_NEAR(engine_speed(10.0, 1, c), 10.0 / 0.498 * 4.0, 1e-12);
  EXPECT_NEAR(engine_speed(10.0, 1, c), 80.32, 5e-3);
}

TEST(EngineSpeed, NonIncreasingInGear) {
  for (double v : {1.0, 5.0, 12.0, 25.0})
    for (int g = 2; g <= 10; ++g) EXPECT_LE(engine_speed(v, g, vehicle()), engine_speed(v, g - 1, vehicle()));
}

TEST(FuelRate, NodeCenterAndCut) {
  const auto& c = vehicle();
  const Table2d& m = c.fuel_map;
  EXPECT_DOUBLE_EQ(fuel_rate(m.rows()[4], m.cols()[3], c), m.at(4, 3));
  double wc = 0.5 * (m.rows()[4] + m.rows()[5]), tc = 0.5 * (m.cols()[3] + m.cols()[4]);
  EXPECT_NEAR(fuel_rate(wc, tc, c), 0.25 * (m.at(4, 3) + m.at(4, 4) + m.at(5, 3) + m.at(5, 4)), 1e-12);
  for (double w : {c.idle_speed, 150.0, c.max_speed}) EXPECT_DOUBLE_EQ(fuel_rate(w, -50.0, c), 0.0);
  EXPECT_NEAR(fuel_rate(c.idle_speed, 0.0, c), c.idle_fuel_rate, 1e-9);
}

TEST(GearFeasibility, BoundaryGears) {
  const auto& c = vehicle();
  EnvState s;
  s.gear = 1;
  s.velocity = 0.5;
  auto f = feasible_gear_commands(s, c);
  EXPECT_FALSE(f[0]);
  EXPECT_TRUE(f[1]);
  EXPECT_EQ(f[2], c.coupled_engine_speed(s.velocity, 2) >= c.idle_speed);
  s.velocity = 3.0;
  EXPECT_TRUE(feasible_gear_commands(s, c)[2]);
  s.gear = 10;
  for (double v : {0.0, 10.0, 30.0}) {
    s.velocity = v;
    EXPECT_FALSE(feasible_gear_commands(s, c)[2]);
  }
}

TEST(GearFeasibility, AgreesWithBruteForce) {
  const auto& c = vehicle();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uv(0.0, 35.0);
  std::uniform_int_distribution<int> ug(1, 10);
  for (int k = 0; k < 1000; ++k) {
    EnvState s;
    s.velocity = uv(rng);
    s.gear = ug(rng);
    auto mask = feasible_gear_commands(s, c);
    for (int u : {-1, 0, 1}) {
      bool expected = true;
      if (u != 0) {
        int target = s.gear + u;
        double rpm = s.velocity / 0.498 * c.gear_ratios[static_cast<std::size_t>(std::clamp(target, 1, 10) - 1)] * 4.0 * 30.0 / std::numbers::pi;
        expected = target >= 1 && target <= 10 && rpm <= 2200.0 && (u < 0 || rpm >= 700.0);
      }
      EXPECT_EQ(mask[static_cast<std::size_t>(u + 1)], expected) << s.velocity << " " << s.gear << " " << u;
    }
  }
}

TEST(ApplyTorque, ZeroRequest) {
  TorqueSplit s = apply_torque(0.0, 10.0, 4, vehicle());
  EXPECT_EQ(s.wheel, 0.0);
  EXPECT_EQ(s.engine, 0.0);
  EXPECT_EQ(s.service, 0.0);
}

TEST(ApplyTorque, FullRequestIsEngineLimited) {
  const auto& c = vehicle();
  for (int g : {1, 3, 6, 10}) {
    TorqueSplit s = apply_torque(1.0, 2.0, g, c);
    double w = engine_speed(2.0, g, c);
    EXPECT_NEAR(s.wheel, c.max_engine_torque(w) * c.total_ratio(g), 1e-9);
    if (g > 1) EXPECT_LT(s.wheel, c.max_wheel_torque());
  }
}

TEST(ApplyTorque, FullBrakeAllocation) {
  const auto& c = vehicle();
  double v = 12.0;
  int g = 6;
  TorqueSplit s = apply_torque(-1.0, v, g, c);
  double w = engine_speed(v, g, c);
  double engine_wheel = c.engine_brake_torque(w) * c.total_ratio(g);
  EXPECT_NEAR(s.engine, c.engine_brake_torque(w), 1e-12);
  EXPECT_NEAR(s.service, std::max(-c.max_wheel_torque() - engine_wheel, -c.service_brake_limit), 1e-9);
  EXPECT_NEAR(s.wheel, std::max(-c.max_wheel_torque(), engine_wheel - c.service_brake_limit), 1e-9);
}

TEST(ApplyTorque, LightBrakeUsesEngineOnly) {
  const auto& c = vehicle();
  double v = 12.0;
  int g = 6;
  double w = engine_speed(v, g, c);
  double cap = c.engine_brake_torque(w) * c.total_ratio(g);
  double request = 0.5 * cap / c.max_wheel_torque();
  TorqueSplit s = apply_torque(request, v, g, c);
  EXPECT_DOUBLE_EQ(s.service, 0.0);
  EXPECT_NEAR(s.wheel, 0.5 * cap, 1e-9);
}

TEST(ApplyTorque, DecoupledDrivelineHasNoEngineBrake) {
  const auto& c = vehicle();
  TorqueSplit s = apply_torque(-0.1, 0.5, 8, c);
  EXPECT_EQ(s.engine, 0.0);
  EXPECT_NEAR(s.service, -0.1 * c.max_wheel_torque(), 1e-9);
}

TEST(PowerReserve, FullAndEmpty) {
  const auto& c = vehicle();
  double v = 10.0;
  int g = 5;
  double w = engine_speed(v, g, c);
  EXPECT_NEAR(power_reserve(v, g, c.max_engine_torque(w), c).reserve, 0.0, 1e-9);
  EXPECT_NEAR(power_reserve(v, g, 0.0, c).reserve, c.max_engine_torque(w) * w, 1e-9);
}

TEST(PowerReserve, CeilingIsMaxOverGears) {
  const auto& c = vehicle();
  double best = 0.0;
  for (int g = 1; g <= 10; ++g) {
    double w = std::max(c.idle_speed, 15.0 / c.wheel_radius * c.gear_ratios[static_cast<std::size_t>(g - 1)] * c.final_drive);
    double t = w > c.max_speed ? 0.0 : c.max_torque_curve(w);
    best = std::max(best, t * w);
  }
  EXPECT_NEAR(power_reserve(15.0, 7, 300.0, c).ceiling, best, 1e-9);
}

TEST(Reward, ExampleSubstitution) {
  RewardWeights w = resolved_a();
  EnvState cur, next;
  PowerReserve full{100.0, 100.0};
  RewardBreakdown p = reward_terms(cur, next, 0.0, 0.2 * w.max_fuel_rate, full, w);
  EXPECT_NEAR(p.total(), -0.03, 1e-15);
  RewardBreakdown zero = reward_terms(cur, next, 0.0, 0.0, full, w);
  EXPECT_EQ(zero.total(), 0.0);
}

TEST(Reward, MatchesSpreadsheetEvaluation) {
  RewardWeights w = resolved_a();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    EnvState cur, next;
    cur.desired_accel = 3.0 * u(rng);
    next.acceleration = 3.0 * u(rng);
    cur.gear = 5;
    next.gear = 5 + (k % 3) - 1;
    double tt = 40000.0 * u(rng);
    double fuel = 10.0 * (1.0 + u(rng));
    PowerReserve pr{50e3 * (1.0 + u(rng)), 150e3};
    double expected = -0.65 * std::abs(cur.desired_accel - next.acceleration) / 4.0 - 0.095 * std::abs(tt) / 52800.0 -
                      0.15 * fuel / w.max_fuel_rate - 0.1 * std::abs(next.gear - cur.gear) -
                      0.005 * (pr.ceiling - pr.reserve) / pr.ceiling;
    EXPECT_NEAR(reward_terms(cur, next, tt, fuel, pr, w).total(), expected, 1e-12);
  }
}

TEST(Reward, RejectsUnresolvedNormalizers) {
  EnvState s;
  EXPECT_THROW(reward_terms(s, s, 0.0, 0.0, {}, RewardWeights::set_a()), std::invalid_argument);
}

TEST(Reward, WeightSets) {
  RewardWeights a = RewardWeights::set_a(), b = RewardWeights::set_b();
  EXPECT_DOUBLE_EQ(a.tracking, 0.65);
  EXPECT_DOUBLE_EQ(a.torque, 0.095);
  EXPECT_DOUBLE_EQ(a.fuel, 0.15);
  EXPECT_DOUBLE_EQ(a.shift, 0.1);
  EXPECT_DOUBLE_EQ(a.reserve, 0.005);
  EXPECT_DOUBLE_EQ(b.torque, 0.055);
  EXPECT_DOUBLE_EQ(b.shift, 0.14);
  EXPECT_DOUBLE_EQ(b.tracking, 0.65);
}

TEST(EnvStep, ZeroActionFromRest) {
  const auto& c = vehicle();
  RewardWeights w = resolved_a();
  EnvState s;
  s.desired_accel = 1.0;
  StepOutcome o = env_step(s, {0.0, 0}, 1.0, 1.0, c, w);
  EXPECT_EQ(o.next_state.velocity, 0.0);
  EXPECT_EQ(o.distance, 0.0);
  EXPECT_NEAR(o.fuel_mass, c.idle_fuel_rate, 1e-9);
  double expected = -0.65 * 1.0 / 4.0 - 0.15 * c.idle_fuel_rate / w.max_fuel_rate;
  EXPECT_NEAR(o.reward, expected, 1e-12);
  EXPECT_DOUBLE_EQ(o.next_state.desired_accel, 1.0);
}

TEST(EnvStep, InfeasibleUpshiftIsOverriddenWithoutPenalty) {
  EnvState s;
  s.velocity = 20.0;
  s.gear = 10;
  StepOutcome o = env_step(s, {0.0, 1}, 0.0, 1.0, vehicle(), resolved_a());
  EXPECT_EQ(o.next_state.gear, 10);
  EXPECT_TRUE(o.shift_rejected);
  EXPECT_FALSE(o.shift_applied);
  EXPECT_EQ(o.penalties.shift, 0.0);
}

TEST(EnvStep, AppliedShiftIsPenalized) {
  EnvState s;
  s.velocity = 5.0;
  s.gear = 4;
  StepOutcome o = env_step(s, {0.1, 1}, 0.0, 1.0, vehicle(), resolved_a());
  EXPECT_EQ(o.next_state.gear, 5);
  EXPECT_TRUE(o.shift_applied);
  EXPECT_DOUBLE_EQ(o.penalties.shift, 0.1);
}

TEST(EnvStep, RejectsBadActions) {
  EnvState s;
  EXPECT_THROW(env_step(s, {NAN, 0}, 0.0, 1.0, vehicle(), resolved_a()), std::invalid_argument);
  EXPECT_THROW(env_step(s, {0.0, 2}, 0.0, 1.0, vehicle(), resolved_a()), std::invalid_argument);
  EXPECT_THROW(env_step(s, {0.0, 0}, 0.0, 0.0, vehicle(), resolved_a()), std::invalid_argument);
}

TEST(EnvStep, MatchesFineStepOracleAndBalancesEnergy) {
  const auto& c = vehicle();
  struct Case {
    double v;
    int gear;
    double request;
  };
  for (Case k : {Case{10.0, 7, 0.08}, Case{20.0, 10, 0.05}, Case{15.0, 9, -0.03}, Case{5.0, 5, 0.15}}) {
    EnvState s;
    s.velocity = k.v;
    s.gear = k.gear;
    StepOutcome o = env_step(s, {k.request, 0}, 0.0, 1.0, c, resolved_a());
    FineResult f = fine_integrate(k.v, k.gear, k.request, 1.0, 0.001);
    EXPECT_NEAR(o.next_state.velocity, f.velocity, 0.01 * f.velocity);
    EXPECT_NEAR(o.distance, f.distance, 0.01 * f.distance);
    double dke = 0.5 * c.mass * (f.velocity * f.velocity - k.v * k.v);
    EXPECT_NEAR(f.resistance_work + dke, f.wheel_work, 0.01 * std::abs(f.wheel_work) + 1e-6);
    // The same balance from the coarse step's own outputs.
    double v_mean = 0.5 * (k.v + o.next_state.velocity);
    double resist = c.mass * c.gravity * c.rolling_coefficient + 0.5 * c.air_density * c.drag_coefficient * c.frontal_area * v_mean * v_mean;
    double coarse_dke = 0.5 * c.mass * (o.next_state.velocity * o.next_state.velocity - k.v * k.v);
    double coarse_work = o.wheel_torque / c.wheel_radius * o.distance;
    EXPECT_NEAR(resist * o.distance + coarse_dke, coarse_work, 0.01 * std::abs(coarse_work));
  }
}

TEST(EnvStep, FuelEqualsRateTimesDtAtConstantOperatingPoint) {
  // At idle in a decoupled gear with zero torque the operating point is fixed.
  EnvState s;
  StepOutcome o = env_step(s, {0.0, 0}, 0.0, 2.0, vehicle(), resolved_a());
  EXPECT_NEAR(o.fuel_mass, fuel_rate(vehicle().idle_speed, 0.0, vehicle()) * 2.0, 1e-9);
}

TEST(EnvStep, RandomRolloutInvariants) {
  const auto& c = vehicle();
  RewardWeights w = resolved_a();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ut(-1.0, 1.0);
  std::uniform_int_distribution<int> ug(-1, 1);
  EnvState s;
  s.velocity = 8.0;
  s.gear = 3;
  for (int k = 0; k < 5000; ++k) {
    StepOutcome o = env_step(s, {ut(rng), ug(rng)}, ut(rng) * 2.0, 1.0, c, w);
    ASSERT_GE(o.next_state.velocity, 0.0);
    ASSERT_TRUE(c.valid_gear(o.next_state.gear));
    ASSERT_LE(std::abs(o.next_state.gear - s.gear), 1);
    ASSERT_LE(o.reward, 0.0);
    ASSERT_GE(o.fuel_mass, 0.0);
    ASSERT_GE(o.distance, 0.0);
    s = o.next_state;
  }
}

TEST(EnvStep, CoastDownIsStrictlyDecreasing) {
  EnvState s;
  s.velocity = 25.0;
  s.gear = 10;
  for (int k = 0; k < 60 && s.velocity > 0.0; ++k) {
    StepOutcome o = env_step(s, {0.0, 0}, 0.0, 1.0, vehicle(), resolved_a());
    if (o.next_state.velocity > 0.0) EXPECT_LT(o.next_state.velocity, s.velocity);
    s = o.next_state;
  }
}

TEST(EnvStep, HigherGearNeedsMoreEngineTorqueForSameWheelTorque) {
  const auto& c = vehicle();
  // At 10 m/s gears 6 to 9 keep the engine between idle and the limiter.
  double wheel = 3000.0;
  double prev_speed = INFINITY, prev_torque = 0.0;
  for (int g = 6; g <= 9; ++g) {
    TorqueSplit s = apply_torque(wheel / c.max_wheel_torque(), 10.0, g, c);
    double w = engine_speed(10.0, g, c);
    EXPECT_NEAR(s.wheel, wheel, 1e-9);
    EXPECT_LT(w, prev_speed);
    EXPECT_GT(s.engine, prev_torque);
    prev_speed = w;
    prev_torque = s.engine;
  }
}

TEST(EnvStep, DriverCallbackSeesStepOutcome) {
  EnvState s;
  s.velocity = 10.0;
  s.gear = 5;
  double seen_v = -1.0, seen_d = -1.0;
  StepOutcome o = env_step(
      s, {0.05, 0},
      [&](double v, double d) {
        seen_v = v;
        seen_d = d;
        return 0.25;
      },
      1.0, vehicle(), resolved_a());
  EXPECT_DOUBLE_EQ(seen_v, o.next_state.velocity);
  EXPECT_DOUBLE_EQ(seen_d, o.distance);
  EXPECT_DOUBLE_EQ(o.next_state.desired_accel, 0.25);
}
