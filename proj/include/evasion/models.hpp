#pragma once

#include <Eigen/Dense>

#include <vector>

#include "evasion/geometry.hpp"

namespace evasion::model {

// State ordering of the 4-state kinematic model [x, y, v_x, psi].
inline constexpr int kIdxX = 0;
inline constexpr int kIdxY = 1;
inline constexpr int kIdxVx = 2;
inline constexpr int kIdxPsi = 3;

// State ordering of the 6-state path-error model [x, v_x, y, psi, e_y, e_psi].
inline constexpr int kEtaX = 0;
inline constexpr int kEtaVx = 1;
inline constexpr int kEtaY = 2;
inline constexpr int kEtaPsi = 3;
inline constexpr int kEtaEy = 4;
inline constexpr int kEtaEpsi = 5;

struct VehicleParams {
  double l_f = 1.43;   // CG to front axle [m]
  double l_r = 1.21;   // CG to rear axle [m]
  double mass = 1360;  // [kg]
  double I_z = 2050;   // yaw inertia [kg m^2]
  double lane_width = 5.0;
  double t_s = 0.1;               // controller sampling time [s]
  double wheel_radius_eff = 0.3;  // effective rolling radius [m]
  double track_width = 1.5;       // [m]

  double wheelbase() const { return l_f + l_r; }
  void validate() const;  // all fields strictly positive
};

struct KinematicState {
  double x = 0, y = 0;  // inertial position [m]
  double v_x = 0;       // longitudinal speed [m/s]
  double psi = 0;       // heading [rad]

  Eigen::Vector4d vec() const { return {x, y, v_x, psi}; }
  static KinematicState from_vec(const Eigen::Vector4d& v) { return {v(0), v(1), v(2), v(3)}; }
  Eigen::Vector2d pos() const { return {x, y}; }
};

struct ControlInput {
  double delta_f = 0;  // front steering [rad]
  double a_x = 0;      // longitudinal acceleration [m/s^2]

  Eigen::Vector2d vec() const { return {delta_f, a_x}; }
};

struct AugmentedState {
  Eigen::Matrix<double, 6, 1> eta;  // [x, v_x, y, psi, e_y, e_psi]
  double d = 0;                     // curvature disturbance [1/m]
};

struct ContinuousLti {
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;
  double v_nom = 0;
};

struct LtiModel {
  Eigen::Matrix4d A_d;
  Eigen::Matrix<double, 4, 2> B_d;
  double t_s = 0;
  double v_nom = 0;
};

/// Path-error model with the curvature disturbance held constant step to
/// step: eta+ = A eta + B u + B_dist * d, d+ = d.
struct AugmentedModel {
  Eigen::Matrix<double, 6, 6> A;
  Eigen::Matrix<double, 6, 2> B;
  Eigen::Matrix<double, 6, 1> B_dist;
  Eigen::Matrix<double, 6, 6> C;  // output map (identity here)
  double C_dist = 1.0;
  double t_s = 0;
  double v_nom = 0;
};

struct LpvVertexSet {
  std::vector<LtiModel> vertices;  // built at v_min and v_max
  Eigen::Matrix4d A_bar;           // vertex averages
  Eigen::Matrix<double, 4, 2> B_bar;
  double v_min = 0, v_max = 0;
  double t_s = 0;
};

/// Continuous kinematic single-track model linearised at v_nom. The A matrix
/// has exactly two nonzero entries and is nilpotent (A^2 = 0).
ContinuousLti build_kinematic_lti(const VehicleParams& params, double v_nom);

/// Exact zero-order hold. Because A^2 = 0 the series truncates:
/// A_d = I + A t_s, B_d = B t_s + A B t_s^2 / 2.
LtiModel discretize(const ContinuousLti& model, double t_s);

/// Disturbance-augmented path-error model. Error rows follow
///   e_y+   = e_y - t_s v_nom e_psi
///   e_psi+ = e_psi + t_s (v_nom d - psi_dot)
/// with e_psi = psi_ref - psi and e_y positive toward path-left. (The first
/// row carries a minus where a plus would pair with the opposite e_psi sign
/// convention; this pairing is the one consistent with the measured errors.)
AugmentedModel build_augmented(const LtiModel& model);

/// Two-vertex LPV family at the speed extremes; velocity enters the model
/// affinely so the endpoints generate the whole convex hull.
LpvVertexSet build_lpv_vertices(const VehicleParams& params, double v_min, double v_max,
                                double t_s);

/// Axis-aligned outer box of {(A_d(v)-A_bar) xi + (B_d(v)-B_bar) u} over the
/// vertex models and the corners of X x U. Always contains the origin.
geom::Polytope compute_disturbance_set(const LpvVertexSet& lpv, const geom::Polytope& X,
                                       const geom::Polytope& U);

}  // namespace evasion::model
