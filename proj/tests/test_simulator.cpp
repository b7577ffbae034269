#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pitransfer/simulator.hpp"

using namespace pitransfer;

namespace {

const VehicleSpec kLarge{"large", 0.475, 71.12, 71.12};
const VehicleSpec kSmall{"small", 0.345, 37.77, 28.84};

// Closed-form arc written out independently of analytic_arc_oracle.
FinalPose arc(double l, double v, double a, double delta) {
  const double s = v * v / (2.0 * -a);
  if (delta == 0.0) return {s, 0.0, 0.0};
  const double r = l / std::tan(delta);
  return {r * std::sin(s / r), r - r * std::cos(s / r), s / r};
}

}  // namespace

TEST_CASE("straight-line stop") {
  const FinalPose p = simulate_kinematic(kLarge, {1.0, -0.5, 0.0});
  CHECK(p.X == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.Y == 0.0);
  CHECK(p.theta == 0.0);
}

TEST_CASE("curved stop matches the closed-form arc") {
  const ManeuverInput m{2.0, -4.905, 0.7854};
  const FinalPose ref = arc(0.475, 2.0, -4.905, 0.7854);
  CHECK(ref.X == doctest::Approx(0.359483).epsilon(1e-5));
  CHECK(ref.Y == doctest::Approx(0.164523).epsilon(1e-5));
  CHECK(ref.theta == doctest::Approx(0.8584).epsilon(2e-4));
  const FinalPose sim = simulate_kinematic(kLarge, m);
  CHECK(std::abs(sim.X - ref.X) <= 1e-6);
  CHECK(std::abs(sim.Y - ref.Y) <= 1e-6);
  CHECK(std::abs(sim.theta - ref.theta) <= 1e-6);
  const FinalPose oracle = analytic_arc_oracle(kLarge, m);
  CHECK(oracle.X == doctest::Approx(ref.X).epsilon(1e-14));
  CHECK(oracle.Y == doctest::Approx(ref.Y).epsilon(1e-14));
}

TEST_CASE("analytic oracle examples") {
  const FinalPose straight = analytic_arc_oracle(kLarge, {1.0, -0.5, 0.0});
  CHECK(straight == FinalPose{1.0, 0.0, 0.0});
  // choose v_i so that the path length is exactly one circumference
  const double delta = 0.5;
  const double r = kSmall.wheelbase_l / std::tan(delta);
  const double v = std::sqrt(2.0 * 1.0 * 2.0 * std::numbers::pi * r);
  const FinalPose circle = analytic_arc_oracle(kSmall, {v, -1.0, delta});
  CHECK(circle.X == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  CHECK(circle.Y == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  CHECK(circle.theta == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-14));

  const FinalPose probe = analytic_arc_oracle(kSmall, {5.0, -0.981, 0.0785});
  const FinalPose ref = arc(0.345, 5.0, -0.981, 0.0785);
  CHECK(probe.X == doctest::Approx(ref.X).epsilon(1e-14));
  CHECK(probe.theta == doctest::Approx(ref.theta).epsilon(1e-14));
}

TEST_CASE("mirror symmetry in steering") {
  const FinalPose left = simulate_kinematic(kSmall, {3.0, -2.0, 0.4});
  const FinalPose right = simulate_kinematic(kSmall, {3.0, -2.0, -0.4});
  CHECK(left.X == right.X);
  CHECK(left.Y == -right.Y);
  CHECK(left.theta == -right.theta);
}

TEST_CASE("stop lands on the zero crossing") {
  for (double v : {0.1, 1.3, 4.9}) {
    for (double a : {-0.981, -3.3, -9.81}) {
      const auto r = integrate_kinematic(kLarge, {v, a, 0.3});
      CHECK(r.final_speed <= 0.0);
      CHECK(r.final_speed >= -1e-9);
      CHECK(r.stop_time == doctest::Approx(v / -a).epsilon(1e-9));
    }
  }
}

TEST_CASE("pi similarity across wheelbases") {
  // equal a l / v_i^2 and delta on two wheelbases
  const double delta = 0.6;
  const double pi4 = -0.8;
  const double v1 = 2.0, v2 = 3.1;
  const FinalPose p1 = simulate_kinematic(kSmall, {v1, pi4 * v1 * v1 / kSmall.wheelbase_l, delta});
  const FinalPose p2 = simulate_kinematic(kLarge, {v2, pi4 * v2 * v2 / kLarge.wheelbase_l, delta});
  CHECK(std::abs(p1.X / kSmall.wheelbase_l - p2.X / kLarge.wheelbase_l) <= 1e-8);
  CHECK(std::abs(p1.Y / kSmall.wheelbase_l - p2.Y / kLarge.wheelbase_l) <= 1e-8);
  CHECK(std::abs(p1.theta - p2.theta) <= 1e-8);
}

TEST_CASE("invalid maneuvers are rejected") {
  CHECK_THROWS_AS(simulate_kinematic(kLarge, {1.0, 0.0, 0.0}), ManeuverError);
  CHECK_THROWS_AS(simulate_kinematic(kLarge, {1.0, 0.5, 0.0}), ManeuverError);
  CHECK_THROWS_AS(simulate_kinematic(kLarge, {0.0, -1.0, 0.0}), ManeuverError);
  CHECK_THROWS_AS(simulate_kinematic(kLarge, {1.0, -1.0, 1.6}), ManeuverError);
  CHECK_THROWS_AS(simulate_kinematic({"bad", -1.0, 1.0, 1.0}, {1.0, -1.0, 0.0}), ManeuverError);
  CHECK_THROWS_AS(simulate_kinematic(kLarge, {1.0, -1.0, 0.0}, 0.0), ManeuverError);
}

TEST_CASE("calibrated step meets the probe tolerance") {
  const double h = calibrated_step();
  CHECK(h <= kDefaultStep);
  const ManeuverInput probe{5.0, -0.981, 0.7854, 0.0, kStandardGravity};
  const VehicleSpec v{"probe", 0.345, 1.0, 1.0};
  const FinalPose sim = simulate_kinematic(v, probe, h);
  const FinalPose ref = arc(0.345, 5.0, -0.981, 0.7854);
  CHECK(std::abs(sim.X - ref.X) <= 1e-6);
  CHECK(std::abs(sim.Y - ref.Y) <= 1e-6);
}

TEST_CASE("surrogate: gentle maneuver equals the kinematic model") {
  SurrogateOptions quiet;
  quiet.noise = false;
  // mu g Nr/(Nf+Nr) = 0.9 * 9.81 / 2 > |a|; v_i^2 tan(delta) < mu g l
  const ManeuverInput m{1.0, -1.0, 0.3927, 0.9, 9.81};
  CHECK(simulate_dynamic_surrogate(kLarge, m, 1, quiet) == simulate_kinematic(kLarge, m));

  const FinalPose noisy = simulate_dynamic_surrogate(kLarge, m, 1);
  const FinalPose clean = simulate_kinematic(kLarge, m);
  CHECK(std::abs(noisy.X - clean.X) < 0.05);
  CHECK(std::abs(noisy.theta - clean.theta) < 0.1);
  CHECK(noisy == simulate_dynamic_surrogate(kLarge, m, 1));
  CHECK(!(noisy == simulate_dynamic_surrogate(kLarge, m, 2)));
}

TEST_CASE("surrogate: longitudinal saturation uses the friction limit") {
  SurrogateOptions quiet;
  quiet.noise = false;
  const ManeuverInput m{3.0, -9.81, 0.0, 0.2, 9.81};
  const double limit = 0.2 * 9.81 * kSmall.rear_normal_Nr / (kSmall.front_normal_Nf + kSmall.rear_normal_Nr);
  CHECK(longitudinal_limit(kSmall, m) == doctest::Approx(limit).epsilon(1e-15));
  const FinalPose p = simulate_dynamic_surrogate(kSmall, m, 3, quiet);
  CHECK(p.X == doctest::Approx(9.0 / (2.0 * limit)).epsilon(1e-9));
  CHECK(p.Y == 0.0);
}

TEST_CASE("surrogate: lateral saturation widens the turn") {
  SurrogateOptions quiet;
  quiet.noise = false;
  const ManeuverInput m{3.5, -0.5, 0.7854, 0.2, 9.81};  // |a| below the friction limit
  const FinalPose kin = simulate_kinematic(kSmall, m);
  const FinalPose sur = simulate_dynamic_surrogate(kSmall, m, 0, quiet);
  CHECK(std::abs(sur.theta) < std::abs(kin.theta));
  // realized radius v_i^2 / (mu g) over the full stopping distance
  const double s = 3.5 * 3.5 / (2.0 * 0.5);
  CHECK(sur.theta == doctest::Approx(s * 0.2 * 9.81 / (3.5 * 3.5)).epsilon(1e-9));
}

TEST_CASE("surrogate rejects bad friction") {
  CHECK_THROWS_AS(simulate_dynamic_surrogate(kSmall, {1.0, -1.0, 0.0, 0.0, 9.81}, 0), ManeuverError);
  CHECK_THROWS_AS(simulate_dynamic_surrogate(kSmall, {1.0, -1.0, 0.0, 1.6, 9.81}, 0), ManeuverError);
}
