#pragma once

#include <array>
#include <stdexcept>

#include "evasion/models.hpp"
#include "evasion/torque_vectoring.hpp"

namespace evasion::plant {

struct Surface {
  double mu = 1.0;  // 0 < mu <= 1.2
  void validate() const {
    if (mu <= 0 || mu > 1.2) throw std::invalid_argument("Surface: mu out of range");
  }
};

struct PlantParams {
  model::VehicleParams veh;
  double wheel_inertia = 1.2;  // [kg m^2]
  double width = 1.8;          // footprint width [m]
  double overhang_front = 0.9; // beyond the front axle [m]
  double overhang_rear = 0.9;
  double tire_B = 10.0;  // simplified magic-formula shape factors
  double tire_C = 1.9;
  double v_eps = 0.5;  // slip denominators saturate below this speed [m/s]
};

struct PlantState {
  double x = 0, y = 0;    // inertial position [m]
  double psi = 0;         // heading [rad]
  double v_x = 0, v_y = 0;  // body-frame velocities [m/s]
  double r = 0;           // yaw rate [rad/s]
  std::array<double, 4> omega{};  // wheel speeds [rad/s], FL FR RL RR
};

struct Measurement {
  model::KinematicState kin;
  tv::TireForceState tires;  // wheel-frame forces
  tv::CgForceTarget cg;      // actual body-frame CG forces and yaw moment
  double yaw_rate = 0;
  double v_y = 0;
};

struct Divergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Double-track rigid body with nonlinear (friction-circle-clamped) tires,
/// four torque inputs and front steering, RK4 sub-stepped.
class Plant {
 public:
  Plant(PlantParams params, Surface surface);

  /// Place the vehicle rolling at speed v along heading psi.
  void set_kinematic(double x, double y, double psi, double v);
  void set_state(const PlantState& s) { state_ = s; }
  const PlantState& state() const { return state_; }
  const PlantParams& params() const { return params_; }

  /// Advance by dt_total using RK4 sub-steps of at most dt_sub.
  /// Throws Divergence when the state leaves the finite/plausible range.
  void step(double steering, const std::array<double, 4>& torques, double dt_total,
            double dt_sub = 1e-3);

  Measurement measure() const;

  /// Static vertical load per wheel.
  std::array<double, 4> wheel_loads() const;

 private:
  PlantParams params_;
  Surface surface_;
  PlantState state_;
  double last_steering_ = 0;

  struct Forces {
    std::array<double, 4> fx_wheel{}, fy_wheel{};  // wheel frame
    double Fx_body = 0, Fy_body = 0, Mz = 0;       // body-frame sums
  };
  Forces tire_forces(const PlantState& s, double steering) const;
  PlantState derivative(const PlantState& s, double steering,
                        const std::array<double, 4>& torques) const;
};

}  // namespace evasion::plant
