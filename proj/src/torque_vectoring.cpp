#include "evasion/torque_vectoring.hpp"

#include <algorithm>
#include <cmath>

namespace evasion::tv {

namespace {
constexpr double kGravity = 9.81;
}

std::array<double, 4> feedforward_torque(double v_star, double v_meas, double K_p) {
  if (K_p <= 0) throw std::invalid_argument("feedforward_torque: K_p must be positive");
  const double total = K_p * (v_star - v_meas);
  const double each = total / 4.0;
  return {each, each, each, each};
}

CgForceTarget desired_cg_forces(double delta_star, double v_star, const PlantSummary& plant,
                                const model::VehicleParams& params, const TvConfig& cfg) {
  CgForceTarget des;
  const double K_p_force = cfg.K_p / params.wheel_radius_eff;
  des.F_x = K_p_force * (v_star - plant.v_x);

  double r_des = 0;
  if (plant.v_x > 0.5) {
    r_des = plant.v_x * delta_star / params.wheelbase();
    const double r_max = cfg.mu * kGravity / plant.v_x;
    r_des = std::clamp(r_des, -r_max, r_max);
  }
  des.F_y = params.mass * plant.v_x * r_des;
  des.G_z = cfg.K_r * (r_des - plant.yaw_rate) * params.I_z / params.t_s;
  return des;
}

Eigen::Matrix<double, 3, 8> cg_force_jacobian(double delta_f, const model::VehicleParams& params) {
  const double c = std::cos(delta_f), s = std::sin(delta_f);
  const double hw = params.track_width / 2.0;
  const double xs[4] = {params.l_f, params.l_f, -params.l_r, -params.l_r};
  const double ys[4] = {hw, -hw, hw, -hw};
  Eigen::Matrix<double, 3, 8> J = Eigen::Matrix<double, 3, 8>::Zero();
  for (int i = 0; i < 4; ++i) {
    const bool front = i < 2;
    const double ci = front ? c : 1.0, si = front ? s : 0.0;
    // d(F_x, F_y, G_z)/d f_x
    J(0, i) = ci;
    J(1, i) = si;
    J(2, i) = xs[i] * si - ys[i] * ci;
    // d(F_x, F_y, G_z)/d f_y
    J(0, 4 + i) = -si;
    J(1, 4 + i) = ci;
    J(2, 4 + i) = xs[i] * ci + ys[i] * si;
  }
  return J;
}

Allocation allocate(const TireForceState& f, const CgForceTarget& F_des,
                    const CgForceTarget& F_meas, double delta_f,
                    const std::array<double, 4>& T_ff, const model::VehicleParams& params,
                    const TvConfig& cfg) {
  Allocation out;
  const Eigen::Matrix<double, 3, 8> J = cg_force_jacobian(delta_f, params);
  const Eigen::Vector3d E = F_des.vec() - F_meas.vec();
  Eigen::Matrix<double, 8, 8> M =
      (cfg.w_df + cfg.w_f) * Eigen::Matrix<double, 8, 8>::Identity() +
      J.transpose() * cfg.w_e_diag.asDiagonal() * J;
  const Eigen::Matrix<double, 8, 1> rhs =
      J.transpose() * (cfg.w_e_diag.asDiagonal() * E) - cfg.w_f * f.vec();
  const Eigen::LDLT<Eigen::Matrix<double, 8, 8>> ldlt(M);
  out.theta_f = ldlt.solve(rhs);
  if (!out.theta_f.allFinite() || ldlt.info() != Eigen::Success) {
    out.theta_f.setZero();
    out.singular = true;
  }

  out.command.T_ff_total = T_ff[0] + T_ff[1] + T_ff[2] + T_ff[3];
  for (int i = 0; i < 4; ++i) {
    out.command.delta_T[i] = params.wheel_radius_eff * out.theta_f(i);
    const double total = T_ff[i] + out.command.delta_T[i];
    out.command.T[i] = std::clamp(total, -cfg.torque_limit, cfg.torque_limit);
  }
  // Yaw moment produced by the longitudinal corrections alone.
  Eigen::Matrix<double, 8, 1> theta_x = out.theta_f;
  theta_x.tail<4>().setZero();
  out.net_yaw_moment = (J * theta_x)(2);
  return out;
}

double yaw_moment_metric(const std::vector<double>& t, const std::vector<double>& net_moment,
                         double t_in, double t_fin) {
  if (t.size() != net_moment.size() || t.size() < 2 || t_fin <= t_in)
    throw std::invalid_argument("yaw_moment_metric: bad window or series");
  double integral = 0;
  for (size_t i = 0; i + 1 < t.size(); ++i) {
    const double a = std::max(t[i], t_in), b = std::min(t[i + 1], t_fin);
    if (b <= a) continue;
    // Linear interpolation of |M| endpoints over the clipped interval.
    const double span = t[i + 1] - t[i];
    const double fa = std::abs(net_moment[i] + (net_moment[i + 1] - net_moment[i]) * (a - t[i]) / span);
    const double fb = std::abs(net_moment[i] + (net_moment[i + 1] - net_moment[i]) * (b - t[i]) / span);
    integral += 0.5 * (fa + fb) * (b - a);
  }
  return integral / (t_fin - t_in);
}

}  // namespace evasion::tv
