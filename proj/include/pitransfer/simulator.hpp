#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pitransfer {

inline constexpr double kStandardGravity = 9.81;

struct VehicleSpec {
  std::string name;
  double wheelbase_l = 0.0;     // m
  double front_normal_Nf = 0.0; // N
  double rear_normal_Nr = 0.0;  // N

  void validate() const;
  friend bool operator==(const VehicleSpec&, const VehicleSpec&) = default;
};

/// Constant inputs of one braking maneuver. `a` is signed; braking is a < 0.
struct ManeuverInput {
  double v_i = 0.0;    // m/s
  double a = 0.0;      // m/s^2
  double delta = 0.0;  // rad
  double mu = 0.0;     // used by the surrogate only
  double g = kStandardGravity;

  void validate() const;
  friend bool operator==(const ManeuverInput&, const ManeuverInput&) = default;
};

struct FinalPose {
  double X = 0.0;
  double Y = 0.0;
  double theta = 0.0;
  friend bool operator==(const FinalPose&, const FinalPose&) = default;
};

/// Thrown for inputs outside the model's domain (non-braking, bad geometry).
class ManeuverError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct IntegrationResult {
  FinalPose pose;
  double stop_time = 0.0;
  double final_speed = 0.0;
  std::size_t steps = 0;
};

inline constexpr double kDefaultStep = 1e-3;

/// RK4 integration of the kinematic bicycle model from rest pose (0,0,0)
/// until the speed reaches zero. The last step is shortened to land on the
/// zero crossing of v.
IntegrationResult integrate_kinematic(const VehicleSpec& v, const ManeuverInput& m,
                                      double step = kDefaultStep);
FinalPose simulate_kinematic(const VehicleSpec& v, const ManeuverInput& m,
                             double step = kDefaultStep);

/// Closed-form constant-curvature stop.
FinalPose analytic_arc_oracle(const VehicleSpec& v, const ManeuverInput& m);

/// Halves `initial` until integrate_kinematic agrees with the arc oracle to
/// `tolerance` on a sharp-turn probe maneuver.
double calibrated_step(double initial = kDefaultStep, double tolerance = 1e-6);

struct SurrogateOptions {
  bool noise = true;
  double sigma_xy = 0.005;    // m
  double sigma_theta = 0.01;  // rad
  double step = kDefaultStep;
};

/// Longitudinal adhesion limit mu * g * Nr / (Nf + Nr), rear-wheel braking.
double longitudinal_limit(const VehicleSpec& v, const ManeuverInput& m);

/// Synthetic friction-limited stand-in for physical braking tests. Braking is
/// clipped to the rear-axle adhesion limit and the turn radius widens to
/// v^2 / (mu g) whenever the kinematic radius would need more lateral grip than
/// mu g. Gaussian pose noise is drawn from `noise_seed`.
FinalPose simulate_dynamic_surrogate(const VehicleSpec& v, const ManeuverInput& m,
                                     std::uint64_t noise_seed, const SurrogateOptions& opts = {});

}  // namespace pitransfer
