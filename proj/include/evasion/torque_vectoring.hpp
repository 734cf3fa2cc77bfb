#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

#include "evasion/models.hpp"

namespace evasion::tv {

// Wheel order everywhere: front-left, front-right, rear-left, rear-right.

struct CgForceTarget {
  double F_x = 0;  // [N]
  double F_y = 0;  // [N]
  double G_z = 0;  // [N m]
  Eigen::Vector3d vec() const { return {F_x, F_y, G_z}; }
};

struct TireForceState {
  std::array<double, 4> f_x{};  // wheel-frame longitudinal [N]
  std::array<double, 4> f_y{};  // wheel-frame lateral [N]
  Eigen::Matrix<double, 8, 1> vec() const {
    Eigen::Matrix<double, 8, 1> v;
    v << f_x[0], f_x[1], f_x[2], f_x[3], f_y[0], f_y[1], f_y[2], f_y[3];
    return v;
  }
};

struct TorqueCommand {
  std::array<double, 4> T{};        // total per-wheel torque [N m]
  std::array<double, 4> delta_T{};  // corrective share [N m]
  double T_ff_total = 0;            // feedforward total [N m]
};

struct TvConfig {
  double K_p = 4000.0;  // speed-loop gain [N m per m/s]
  double K_r = 1.0;     // yaw-rate loop gain [-]
  double mu = 1.0;      // used for the yaw-rate clamp
  Eigen::Vector3d w_e_diag{1.0, 1.0, 10.0};
  double w_f = 1e-4;
  double w_df = 1e-3;
  double torque_limit = 1500.0;  // per-wheel [N m]
};

struct PlantSummary {
  double v_x = 0;
  double yaw_rate = 0;
  CgForceTarget F_meas;  // actual CG forces/moment
};

struct Allocation {
  Eigen::Matrix<double, 8, 1> theta_f;  // corrective tire-force components
  TorqueCommand command;
  double net_yaw_moment = 0;  // moment produced by the torque corrections
  bool singular = false;      // system not solvable, correction zeroed
};

/// Proportional speed-tracking torque, equally distributed.
std::array<double, 4> feedforward_torque(double v_star, double v_meas, double K_p);

/// Simplified command-interpreter stage: desired CG forces from the planner's
/// steering/speed commands. Yaw-rate target v_x delta / L clamped to mu g / v_x.
CgForceTarget desired_cg_forces(double delta_star, double v_star, const PlantSummary& plant,
                                const model::VehicleParams& params, const TvConfig& cfg);

/// Jacobian of CG forces w.r.t. the 8 wheel-frame tire-force components, with
/// the front-axle steering rotation.
Eigen::Matrix<double, 3, 8> cg_force_jacobian(double delta_f, const model::VehicleParams& params);

/// Weighted least-squares correction
///   theta = [W_df + W_f + J' W_E J]^-1 (J' W_E E - W_f f),  E = F_des - F.
/// Only the longitudinal components actuate torque: delta_T = R_eff theta_x.
Allocation allocate(const TireForceState& f, const CgForceTarget& F_des,
                    const CgForceTarget& F_meas, double delta_f,
                    const std::array<double, 4>& T_ff, const model::VehicleParams& params,
                    const TvConfig& cfg);

/// Time-normalised integral of |net yaw moment| over [t_in, t_fin].
double yaw_moment_metric(const std::vector<double>& t, const std::vector<double>& net_moment,
                         double t_in, double t_fin);

}  // namespace evasion::tv
