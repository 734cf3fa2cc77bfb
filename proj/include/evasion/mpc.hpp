#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "evasion/constraints.hpp"
#include "evasion/geometry.hpp"
#include "evasion/models.hpp"
#include "evasion/qp.hpp"
#include "evasion/reference_path.hpp"

namespace evasion::mpc {

enum class Variant { kNominal, kOffsetFree, kRobust };

struct MpcConfig {
  Variant variant = Variant::kNominal;
  int horizon = 14;

  // Weights on [x, y, v_x, psi] and [delta_f, a_x]; P = p_scale * Q.
  Eigen::Vector4d q_diag{1.0, 50.0, 0.5, 10.0};
  Eigen::Vector2d r_diag{100.0, 1.0};
  double p_scale = 10.0;
  Eigen::Vector2d error_q_diag{20.0, 20.0};  // e_y, e_psi (offset-free)

  // Admissible boxes in the local path frame.
  Eigen::Vector4d x_lo{-60.0, -9.0, 0.0, -0.5};
  Eigen::Vector4d x_hi{160.0, 9.0, 40.0, 0.5};
  Eigen::Vector2d u_lo{-0.4, -6.0};
  Eigen::Vector2d u_hi{0.4, 4.0};
  Eigen::Vector2d e_lo{-4.0, -0.15};
  Eigen::Vector2d e_hi{4.0, 0.15};

  // Robust variant: LPV speed range, ancillary-gain LQR weights, disturbance
  // floors applied to flat dimensions of W before the invariant-set build.
  double v_min = 60.0 / 3.6;
  double v_max = 80.0 / 3.6;
  Eigen::Vector4d gain_q_diag{1.0, 1.0, 1.0, 1.0};
  Eigen::Vector2d gain_r_diag{0.1, 0.1};
  Eigen::Vector4d w_floor{0.02, 0.02, 0.02, 0.002};
  double mrpi_eps = 1e-2;

  double slack_penalty = 1e5;

  Eigen::Matrix4d Q() const { return q_diag.asDiagonal(); }
  Eigen::Matrix2d R() const { return r_diag.asDiagonal(); }
  Eigen::Matrix4d P() const { return Eigen::Vector4d(p_scale * q_diag).asDiagonal(); }
  void validate() const;
};

struct PlannerOutput {
  Eigen::MatrixXd xi;      // n_x x (N+1) planned states, local path frame
  Eigen::MatrixXd u;       // 2 x N planned inputs
  model::ControlInput u0;  // input to apply (robust: nominal + ancillary action)
  qp::SolveStatus status = qp::SolveStatus::kMaxIter;
  bool feasible = false;
  bool slack_used = false;
  double slack_max = 0;
  double objective = 0;  // tracking cost value at the optimum
  double kkt_residual = 0;
  int qp_iterations = 0;
  bool ancillary_saturated = false;  // robust: u left the input box before clamping
  bool tube_reset = false;  // robust: error left Z, nominal state re-anchored
  path::PathPose predicted_pose;     // planned pose one step ahead, world frame
  double predicted_v = 0;
};

/// Discrete LQR gain for u = K xi on (A, B), via the Riccati fixed point.
Eigen::Matrix<double, 2, 4> dlqr_gain(const Eigen::Matrix4d& A,
                                      const Eigen::Matrix<double, 4, 2>& B,
                                      const Eigen::Matrix4d& Q, const Eigen::Matrix2d& R);

double spectral_radius(const Eigen::MatrixXd& M);

/// Ancillary tube gain on the vertex-average pair, LQR-designed. Throws with
/// the spectral radii listed when any vertex closed loop is unstable.
Eigen::Matrix<double, 2, 4> design_ancillary_gain(const model::LpvVertexSet& lpv,
                                                  const Eigen::Matrix4d& Q,
                                                  const Eigen::Matrix2d& R);

/// Deadbeat gain -B^-1 A for square invertible B (test configurations).
Eigen::MatrixXd design_deadbeat_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Everything the robust planner precomputes once per scenario.
struct RobustSetup {
  model::LpvVertexSet lpv;
  Eigen::Matrix<double, 2, 4> K;
  geom::Polytope W;        // disturbance box (after floors)
  geom::Polytope Z;        // invariant tube cross-section
  geom::Polytope KZ;       // input-space image of Z
  geom::Polytope X_tight;  // X (-) Z
  geom::Polytope U_tight;  // U (-) KZ
  geom::MrpiInfo mrpi;
  double rho_closed_loop = 0;
};

struct InfeasibleSetup : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RobustSetup design_robust_setup(const model::VehicleParams& params, const MpcConfig& cfg,
                                bool reject_empty = true);

/// Stacked finite-horizon QP over [xi_1..xi_N, u_0..u_{N-1}] plus slack
/// columns when `slack` is set: dynamics as equalities, boxes and region
/// halfspaces (applied to the position components named by pos_idx) as
/// inequalities. Exposed for tests.
struct AssembledQp {
  qp::QpProblem problem;
  double cost_constant = 0;  // completes 0.5 z'Hz + g'z to the tracking cost
  int n_x = 0;
  int n_slack = 0;
};

AssembledQp assemble(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::VectorXd& affine, int horizon, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P,
                     const Eigen::VectorXd& x0, const Eigen::MatrixXd& x_ref,
                     const std::vector<geom::Halfspace>& region_pos,
                     std::pair<int, int> pos_idx, const Eigen::VectorXd& x_lo,
                     const Eigen::VectorXd& x_hi, const Eigen::VectorXd& u_lo,
                     const Eigen::VectorXd& u_hi, double slack_penalty, bool slack);

/// One receding-horizon planner instance. Holds only the warm-start cache and
/// (for the robust variant) the carried nominal state.
class Planner {
 public:
  Planner(model::VehicleParams params, MpcConfig cfg);

  /// Plan from the measured state. `proj` is the projection of `meas` onto
  /// `path`; `region` is in world coordinates; `v_ref` is the reference speed
  /// (held at the scenario's initial speed).
  PlannerOutput plan(const model::KinematicState& meas, const constraint::ConvexRegion& region,
                     const path::RoadPath& path, const path::Projection& proj, double v_ref);

  void reset();
  const MpcConfig& config() const { return cfg_; }
  const RobustSetup* robust_setup() const { return setup_ ? &*setup_ : nullptr; }
  const qp::QpProblem& last_problem() const { return last_problem_; }
  const qp::QpSolution& last_solution() const { return last_solution_; }

 private:
  model::VehicleParams params_;
  MpcConfig cfg_;
  std::optional<RobustSetup> setup_;
  std::optional<model::KinematicState> nominal_state_;  // robust, world frame
  Eigen::VectorXd warm_z_, warm_dual_;
  qp::QpProblem last_problem_;
  qp::QpSolution last_solution_;
  qp::QpSolver solver_;

  AssembledQp build_qp(const model::KinematicState& meas, const constraint::ConvexRegion& region,
                       const path::RoadPath& path, const path::Projection& proj, double v_ref,
                       bool slack, Eigen::Vector4d* xi0_local_out,
                       Eigen::Vector2d* frame_origin_out, double* frame_theta_out) const;
};

}  // namespace evasion::mpc
