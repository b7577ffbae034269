#include "pitransfer/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace pitransfer {

void VehicleSpec::validate() const {
  if (!(wheelbase_l > 0.0) || !std::isfinite(wheelbase_l))
    throw ManeuverError("vehicle '" + name + "': wheelbase must be positive");
  if (!(front_normal_Nf > 0.0) || !(rear_normal_Nr > 0.0) || !std::isfinite(front_normal_Nf) ||
      !std::isfinite(rear_normal_Nr))
    throw ManeuverError("vehicle '" + name + "': normal forces must be positive");
}

void ManeuverInput::validate() const {
  if (!(v_i > 0.0) || !std::isfinite(v_i)) throw ManeuverError("initial speed must be positive");
  if (!std::isfinite(a)) throw ManeuverError("acceleration must be finite");
  if (!(std::abs(delta) < std::numbers::pi / 2)) throw ManeuverError("|delta| must be below pi/2");
  if (!(g > 0.0) || !std::isfinite(g)) throw ManeuverError("gravity must be positive");
}

namespace {

struct State {
  double x, y, theta, v;
};

// One RK4 stage set for [x' y' theta' v'] = [v cos(theta), v sin(theta), yaw(v), a].
template <typename YawRate>
State rk4_step(const State& s, double h, double a, const YawRate& yaw) {
  auto f = [&](const State& q) {
    return State{q.v * std::cos(q.theta), q.v * std::sin(q.theta), yaw(q.v), a};
  };
  const State k1 = f(s);
  const State k2 = f({s.x + 0.5 * h * k1.x, s.y + 0.5 * h * k1.y, s.theta + 0.5 * h * k1.theta,
                      s.v + 0.5 * h * k1.v});
  const State k3 = f({s.x + 0.5 * h * k2.x, s.y + 0.5 * h * k2.y, s.theta + 0.5 * h * k2.theta,
                      s.v + 0.5 * h * k2.v});
  const State k4 = f({s.x + h * k3.x, s.y + h * k3.y, s.theta + h * k3.theta, s.v + h * k3.v});
  return {s.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
          s.y + h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
          s.theta + h / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
          s.v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v)};
}

template <typename YawRate>
IntegrationResult integrate_until_stop(double v_i, double a, double step, const YawRate& yaw) {
  if (!(a < 0.0)) throw ManeuverError("maneuver never stops: acceleration must be negative");
  if (!(step > 0.0)) throw ManeuverError("integration step must be positive");
  IntegrationResult out;
  State s{0.0, 0.0, 0.0, v_i};
  double t = 0.0;
  while (true) {
    const double v_next = s.v + a * step;
    if (v_next > 0.0) {
      s = rk4_step(s, step, a, yaw);
      t += step;
      ++out.steps;
      continue;
    }
    // v is linear in time, so interpolating v between the step ends gives the
    // exact crossing. Nudge up until the landed speed is not positive.
    double h = step * s.v / (s.v - v_next);
    State last = rk4_step(s, h, a, yaw);
    while (last.v > 0.0) {
      h = std::nextafter(h, INFINITY);
      last = rk4_step(s, h, a, yaw);
    }
    s = last;
    t += h;
    ++out.steps;
    break;
  }
  out.pose = {s.x, s.y, s.theta};
  out.stop_time = t;
  out.final_speed = s.v;
  return out;
}

}  // namespace

IntegrationResult integrate_kinematic(const VehicleSpec& v, const ManeuverInput& m, double step) {
  v.validate();
  m.validate();
  const double tan_delta = std::tan(m.delta);
  const double l = v.wheelbase_l;
  return integrate_until_stop(m.v_i, m.a, step, [=](double speed) { return speed * tan_delta / l; });
}

FinalPose simulate_kinematic(const VehicleSpec& v, const ManeuverInput& m, double step) {
  return integrate_kinematic(v, m, step).pose;
}

FinalPose analytic_arc_oracle(const VehicleSpec& v, const ManeuverInput& m) {
  v.validate();
  m.validate();
  if (!(m.a < 0.0)) throw ManeuverError("maneuver never stops: acceleration must be negative");
  const double s = m.v_i * m.v_i / (2.0 * std::abs(m.a));
  if (m.delta == 0.0) return {s, 0.0, 0.0};
  const double radius = v.wheelbase_l / std::tan(m.delta);
  const double theta = s / radius;
  return {radius * std::sin(theta), radius * (1.0 - std::cos(theta)), theta};
}

double calibrated_step(double initial, double tolerance) {
  const VehicleSpec probe_vehicle{"probe", 0.345, 1.0, 1.0};
  const ManeuverInput probe{5.0, -0.981, 0.7854, 0.0, kStandardGravity};
  const FinalPose ref = analytic_arc_oracle(probe_vehicle, probe);
  double step = initial;
  for (int i = 0; i < 30; ++i) {
    const FinalPose got = simulate_kinematic(probe_vehicle, probe, step);
    const double err = std::max({std::abs(got.X - ref.X), std::abs(got.Y - ref.Y),
                                 std::abs(got.theta - ref.theta)});
    if (err <= tolerance) return step;
    step *= 0.5;
  }
  throw std::runtime_error("integration step calibration did not converge");
}

double longitudinal_limit(const VehicleSpec& v, const ManeuverInput& m) {
  return m.mu * m.g * v.rear_normal_Nr / (v.front_normal_Nf + v.rear_normal_Nr);
}

FinalPose simulate_dynamic_surrogate(const VehicleSpec& v, const ManeuverInput& m,
                                     std::uint64_t noise_seed, const SurrogateOptions& opts) {
  v.validate();
  m.validate();
  if (!(m.mu > 0.0) || m.mu > 1.5) throw ManeuverError("friction coefficient must lie in (0, 1.5]");
  if (!(m.a < 0.0)) throw ManeuverError("maneuver never stops: acceleration must be negative");

  const double a_eff = -std::min(std::abs(m.a), longitudinal_limit(v, m));
  const double tan_delta = std::tan(m.delta);
  const double l = v.wheelbase_l;
  const double grip = m.mu * m.g;
  // Saturated when v_i^2 > mu g R with R = l / |tan(delta)|; the realized
  // radius is then R * v_i^2 / (mu g R) = v_i^2 / (mu g) for the whole stop.
  const bool slipping = tan_delta != 0.0 && m.v_i * m.v_i * std::abs(tan_delta) > grip * l;
  const double slip_curvature = (tan_delta < 0.0 ? -grip : grip) / (m.v_i * m.v_i);
  auto yaw = [=](double speed) { return slipping ? speed * slip_curvature : speed * tan_delta / l; };
  FinalPose pose = integrate_until_stop(m.v_i, a_eff, opts.step, yaw).pose;

  if (opts.noise) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    pose.X += opts.sigma_xy * unit(rng);
    pose.Y += opts.sigma_xy * unit(rng);
    pose.theta += opts.sigma_theta * unit(rng);
  }
  return pose;
}

}  // namespace pitransfer
