#include "evasion/mpc.hpp"

#include <cmath>
#include <sstream>

namespace evasion::mpc {

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2 * M_PI;
  while (a < -M_PI) a += 2 * M_PI;
  return a;
}

Eigen::Matrix2d rot(double theta) {
  Eigen::Matrix2d R;
  R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return R;
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 2) throw std::invalid_argument("mpc: horizon must be >= 2");
  if (q_diag.minCoeff() < 0 || error_q_diag.minCoeff() < 0 || p_scale < 0)
    throw std::invalid_argument("mpc: state weights must be nonnegative");
  if (r_diag.minCoeff() <= 0) throw std::invalid_argument("mpc: input weights must be positive");
  if (((x_hi - x_lo).minCoeff() < 0) || ((u_hi - u_lo).minCoeff() < 0) ||
      ((e_hi - e_lo).minCoeff() < 0))
    throw std::invalid_argument("mpc: malformed admissible boxes");
  if (variant == Variant::kRobust && (v_min <= 0 || v_min > v_max))
    throw std::invalid_argument("mpc: malformed speed range");
}

double spectral_radius(const Eigen::MatrixXd& M) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(M, false).eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::Matrix<double, 2, 4> dlqr_gain(const Eigen::Matrix4d& A,
                                      const Eigen::Matrix<double, 4, 2>& B,
                                      const Eigen::Matrix4d& Q, const Eigen::Matrix2d& R) {
  Eigen::Matrix4d P = Q;
  for (int it = 0; it < 100000; ++it) {
    const Eigen::Matrix2d S = R + B.transpose() * P * B;
    const Eigen::Matrix<double, 2, 4> K = S.ldlt().solve(B.transpose() * P * A);
    const Eigen::Matrix4d P_next = Q + A.transpose() * P * (A - B * K);
    if ((P_next - P).cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      P = P_next;
      break;
    }
    P = P_next;
  }
  const Eigen::Matrix2d S = R + B.transpose() * P * B;
  return -S.ldlt().solve(B.transpose() * P * A);
}

Eigen::MatrixXd design_deadbeat_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (B.rows() != B.cols()) throw std::invalid_argument("deadbeat gain needs square B");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
  if (!lu.isInvertible()) throw std::invalid_argument("deadbeat gain needs invertible B");
  return -lu.solve(A);
}

Eigen::Matrix<double, 2, 4> design_ancillary_gain(const model::LpvVertexSet& lpv,
                                                  const Eigen::Matrix4d& Q,
                                                  const Eigen::Matrix2d& R) {
  const Eigen::Matrix<double, 2, 4> K = dlqr_gain(lpv.A_bar, lpv.B_bar, Q, R);
  std::vector<double> radii;
  radii.push_back(spectral_radius(lpv.A_bar + lpv.B_bar * K));
  for (const auto& v : lpv.vertices) radii.push_back(spectral_radius(v.A_d + v.B_d * K));
  for (double r : radii) {
    if (r >= 1.0 - 1e-9) {
      std::ostringstream os;
      os << "ancillary gain does not stabilise every vertex; spectral radii:";
      for (double q : radii) os << " " << q;
      throw std::runtime_error(os.str());
    }
  }
  return K;
}

RobustSetup design_robust_setup(const model::VehicleParams& params, const MpcConfig& cfg,
                                bool reject_empty) {
  RobustSetup s;
  s.lpv = model::build_lpv_vertices(params, cfg.v_min, cfg.v_max, params.t_s);
  s.K = design_ancillary_gain(s.lpv, cfg.gain_q_diag.asDiagonal(), cfg.gain_r_diag.asDiagonal());
  s.rho_closed_loop = spectral_radius(s.lpv.A_bar + s.lpv.B_bar * s.K);

  const geom::Polytope X = geom::Polytope::box(cfg.x_lo, cfg.x_hi);
  const geom::Polytope U = geom::Polytope::box(cfg.u_lo, cfg.u_hi);
  const geom::Polytope W_raw = model::compute_disturbance_set(s.lpv, X, U);
  Eigen::VectorXd lo = W_raw.box_lo().cwiseMin(-cfg.w_floor);
  Eigen::VectorXd hi = W_raw.box_hi().cwiseMax(cfg.w_floor);
  s.W = geom::Polytope::box(lo, hi);

  try {
    s.Z = geom::compute_mrpi(s.lpv.A_bar + s.lpv.B_bar * s.K, s.W, cfg.mrpi_eps, 200, &s.mrpi);
  } catch (const std::exception& e) {
    throw InfeasibleSetup(std::string("invariant set computation failed: ") + e.what());
  }
  s.KZ = geom::linear_map(s.K, s.Z);
  s.X_tight = geom::pontryagin_diff(X, s.Z);
  s.U_tight = geom::pontryagin_diff(U, s.KZ);
  if (reject_empty && (s.X_tight.is_empty() || s.U_tight.is_empty()))
    throw InfeasibleSetup("tightened state or input set is empty");
  return s;
}

AssembledQp assemble(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::VectorXd& affine, int horizon, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P,
                     const Eigen::VectorXd& x0, const Eigen::MatrixXd& x_ref,
                     const std::vector<geom::Halfspace>& region_pos,
                     std::pair<int, int> pos_idx, const Eigen::VectorXd& x_lo,
                     const Eigen::VectorXd& x_hi, const Eigen::VectorXd& u_lo,
                     const Eigen::VectorXd& u_hi, double slack_penalty, bool slack) {
  const int n_x = static_cast<int>(A.rows());
  const int n_u = static_cast<int>(B.cols());
  const int N = horizon;
  if (N < 1) throw std::invalid_argument("assemble: horizon must be >= 1");
  if (x_ref.rows() != n_x || x_ref.cols() != N)
    throw std::invalid_argument("assemble: reference must be n_x x N");

  const int n_region = static_cast<int>(region_pos.size());
  const int n_slack = slack ? n_region * N : 0;
  const int nv = N * (n_x + n_u) + n_slack;
  const auto ix = [&](int k) { return (k - 1) * n_x; };          // state k = 1..N
  const auto iu = [&](int k) { return N * n_x + k * n_u; };      // input k = 0..N-1
  const int is0 = N * (n_x + n_u);

  AssembledQp out;
  out.n_x = n_x;
  out.n_slack = n_slack;
  qp::QpProblem& p = out.problem;
  p.n_vars = nv;
  p.n_steps = N;
  p.H = Eigen::MatrixXd::Zero(nv, nv);
  p.g = Eigen::VectorXd::Zero(nv);

  for (int k = 1; k <= N; ++k) {
    const Eigen::MatrixXd& Wk = (k == N) ? P : Q;
    p.H.block(ix(k), ix(k), n_x, n_x) = 2.0 * Wk;
    p.g.segment(ix(k), n_x) = -2.0 * Wk * x_ref.col(k - 1);
    out.cost_constant += x_ref.col(k - 1).dot(Wk * x_ref.col(k - 1));
  }
  for (int k = 0; k < N; ++k) p.H.block(iu(k), iu(k), n_u, n_u) = 2.0 * R;
  for (int i = 0; i < n_slack; ++i) p.H(is0 + i, is0 + i) = 2.0 * slack_penalty;

  // Dynamics equalities.
  p.A_eq = Eigen::MatrixXd::Zero(N * n_x, nv);
  p.b_eq = Eigen::VectorXd::Zero(N * n_x);
  for (int k = 0; k < N; ++k) {
    p.A_eq.block(k * n_x, ix(k + 1), n_x, n_x).setIdentity();
    p.A_eq.block(k * n_x, iu(k), n_x, n_u) = -B;
    if (k == 0) {
      p.b_eq.segment(0, n_x) = A * x0 + affine;
    } else {
      p.A_eq.block(k * n_x, ix(k), n_x, n_x) = -A;
      p.b_eq.segment(k * n_x, n_x) = affine;
    }
  }

  // Box and region inequalities.
  const int m_box = 2 * N * (n_x + n_u);
  const int m_region = n_region * N;
  p.A_ineq = Eigen::MatrixXd::Zero(m_box + m_region + n_slack, nv);
  p.b_ineq = Eigen::VectorXd::Zero(m_box + m_region + n_slack);
  int row = 0;
  for (int k = 1; k <= N; ++k) {
    for (int i = 0; i < n_x; ++i) {
      p.A_ineq(row, ix(k) + i) = 1.0;
      p.b_ineq(row++) = x_hi(i);
      p.A_ineq(row, ix(k) + i) = -1.0;
      p.b_ineq(row++) = -x_lo(i);
    }
  }
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < n_u; ++i) {
      p.A_ineq(row, iu(k) + i) = 1.0;
      p.b_ineq(row++) = u_hi(i);
      p.A_ineq(row, iu(k) + i) = -1.0;
      p.b_ineq(row++) = -u_lo(i);
    }
  }
  // Safe side is eval >= 0: -(a x + b y) - s <= c.
  int slack_col = is0;
  for (const auto& hs : region_pos) {
    const geom::Halfspace h = hs.sense == geom::Halfspace::Sense::GE
                                  ? hs
                                  : geom::Halfspace::ge(-hs.normal, -hs.offset);
    for (int k = 1; k <= N; ++k) {
      p.A_ineq(row, ix(k) + pos_idx.first) = -h.a();
      p.A_ineq(row, ix(k) + pos_idx.second) = -h.b();
      if (slack) p.A_ineq(row, slack_col) = -1.0;
      p.b_ineq(row++) = h.c();
      if (slack) {  // s >= 0
        p.A_ineq(m_box + m_region + (slack_col - is0), slack_col) = -1.0;
        ++slack_col;
      }
    }
  }
  return out;
}

Planner::Planner(model::VehicleParams params, MpcConfig cfg)
    : params_(std::move(params)), cfg_(std::move(cfg)) {
  params_.validate();
  cfg_.validate();
  if (cfg_.variant == Variant::kRobust) setup_ = design_robust_setup(params_, cfg_);
}

void Planner::reset() {
  nominal_state_.reset();
  warm_z_.resize(0);
  warm_dual_.resize(0);
}

AssembledQp Planner::build_qp(const model::KinematicState& meas,
                              const constraint::ConvexRegion& region, const path::RoadPath& path,
                              const path::Projection& proj, double v_ref, bool slack,
                              Eigen::Vector4d* xi0_local_out, Eigen::Vector2d* frame_origin_out,
                              double* frame_theta_out) const {
  const int N = cfg_.horizon;
  const double ts = params_.t_s;
  const path::PathPose anchor = path.pose_at(proj.s);
  const Eigen::Vector2d origin = anchor.pos();
  const double theta = proj.psi_ref;
  const Eigen::Matrix2d Rw = rot(theta);
  *frame_origin_out = origin;
  *frame_theta_out = theta;

  // Measured (or carried nominal) state in the local path frame.
  const model::KinematicState& base =
      (cfg_.variant == Variant::kRobust && nominal_state_) ? *nominal_state_ : meas;
  const Eigen::Vector2d p_local = Rw.transpose() * (base.pos() - origin);
  Eigen::Vector4d xi0;
  xi0 << p_local(0), p_local(1), base.v_x, wrap_angle(base.psi - theta);
  *xi0_local_out = xi0;

  // Per-step references previewed along the path at the reference speed.
  Eigen::MatrixXd ref4(4, N);
  for (int k = 1; k <= N; ++k) {
    const path::PathPose pk = path.pose_at(proj.s + k * v_ref * ts);
    const Eigen::Vector2d pl = Rw.transpose() * (pk.pos() - origin);
    ref4.col(k - 1) << pl(0), pl(1), v_ref, wrap_angle(pk.psi - theta);
  }

  // Region halfspaces in the local frame (robust: tightened by the tube).
  std::vector<geom::Halfspace> region_local;
  auto add_hs = [&](const geom::Halfspace& h_world) {
    const geom::Halfspace h = h_world.sense == geom::Halfspace::Sense::GE
                                  ? h_world
                                  : geom::Halfspace::ge(-h_world.normal, -h_world.offset);
    Eigen::Vector2d n_w(h.a(), h.b());
    const Eigen::Vector2d n_l = Rw.transpose() * n_w;
    double c_l = h.c() + n_w.dot(origin);
    if (cfg_.variant == Variant::kRobust) {
      Eigen::Vector4d lift = Eigen::Vector4d::Zero();
      lift(model::kIdxX) = n_l(0);
      lift(model::kIdxY) = n_l(1);
      c_l -= setup_->Z.support(lift);
    }
    region_local.push_back(geom::Halfspace::ge((Eigen::VectorXd(2) << n_l(0), n_l(1)).finished(), c_l));
  };
  add_hs(region.upper);
  add_hs(region.lower);
  if (region.collision) add_hs(*region.collision);

  if (cfg_.variant == Variant::kOffsetFree) {
    const model::AugmentedModel am =
        model::build_augmented(model::discretize(model::build_kinematic_lti(params_, meas.v_x), ts));
    Eigen::Matrix<double, 6, 1> eta0;
    eta0 << xi0(0), xi0(2), xi0(1), xi0(3), proj.e_y, -xi0(3);  // e_psi = psi_ref - psi
    Eigen::MatrixXd ref6(6, N);
    for (int k = 0; k < N; ++k)
      ref6.col(k) << ref4(0, k), ref4(2, k), ref4(1, k), ref4(3, k), 0.0, 0.0;
    Eigen::Matrix<double, 6, 1> q6, lo6, hi6;
    q6 << cfg_.q_diag(0), cfg_.q_diag(2), cfg_.q_diag(1), cfg_.q_diag(3), cfg_.error_q_diag(0),
        cfg_.error_q_diag(1);
    lo6 << cfg_.x_lo(0), cfg_.x_lo(2), cfg_.x_lo(1), cfg_.x_lo(3), cfg_.e_lo(0), cfg_.e_lo(1);
    hi6 << cfg_.x_hi(0), cfg_.x_hi(2), cfg_.x_hi(1), cfg_.x_hi(3), cfg_.e_hi(0), cfg_.e_hi(1);
    const Eigen::Matrix<double, 6, 6> Q6 = q6.asDiagonal();
    const Eigen::Matrix<double, 6, 6> P6 = Eigen::Matrix<double, 6, 1>(cfg_.p_scale * q6).asDiagonal();
    return assemble(am.A, am.B, am.B_dist * proj.kappa, N, Q6, cfg_.R(), P6, eta0, ref6,
                    region_local, {model::kEtaX, model::kEtaY}, lo6, hi6, cfg_.u_lo, cfg_.u_hi,
                    cfg_.slack_penalty, slack);
  }

  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;
  Eigen::VectorXd x_lo = cfg_.x_lo, x_hi = cfg_.x_hi, u_lo = cfg_.u_lo, u_hi = cfg_.u_hi;
  if (cfg_.variant == Variant::kRobust) {
    A = setup_->lpv.A_bar;
    B = setup_->lpv.B_bar;
    x_lo = setup_->X_tight.box_lo();
    x_hi = setup_->X_tight.box_hi();
    u_lo = setup_->U_tight.box_lo();
    u_hi = setup_->U_tight.box_hi();
  } else {
    const model::LtiModel m = model::discretize(model::build_kinematic_lti(params_, meas.v_x), ts);
    A = m.A_d;
    B = m.B_d;
  }
  return assemble(A, B, Eigen::Vector4d::Zero(), N, cfg_.Q(), cfg_.R(), cfg_.P(), xi0, ref4,
                  region_local, {model::kIdxX, model::kIdxY}, x_lo, x_hi, u_lo, u_hi,
                  cfg_.slack_penalty, slack);
}

PlannerOutput Planner::plan(const model::KinematicState& meas,
                            const constraint::ConvexRegion& region, const path::RoadPath& path,
                            const path::Projection& proj, double v_ref) {
  if (cfg_.variant == Variant::kRobust && !nominal_state_) nominal_state_ = meas;
  bool tube_reset = false;
  if (cfg_.variant == Variant::kRobust) {
    // Re-anchor when the tracking error leaves the invariant tube: the tube
    // argument only covers disturbances in W, and the plant can exceed that
    // class during tire saturation. Resetting makes e = 0, which is in Z.
    Eigen::Vector4d e = meas.vec() - nominal_state_->vec();
    e(model::kIdxPsi) = wrap_angle(e(model::kIdxPsi));
    if (!setup_->Z.contains(e, geom::kContainTol * 10)) {
      nominal_state_ = meas;
      tube_reset = true;
    }
  }

  Eigen::Vector4d xi0;
  Eigen::Vector2d origin;
  double theta = 0;
  AssembledQp built = build_qp(meas, region, path, proj, v_ref, false, &xi0, &origin, &theta);

  qp::QpSolution sol = (warm_z_.size() == built.problem.n_vars)
                           ? solver_.solve(built.problem, warm_z_, warm_dual_)
                           : solver_.solve(built.problem);
  bool slack_used = false;
  if (sol.status == qp::SolveStatus::kInfeasible) {
    built = build_qp(meas, region, path, proj, v_ref, true, &xi0, &origin, &theta);
    sol = solver_.solve(built.problem);
    slack_used = true;
  }
  last_problem_ = built.problem;
  last_solution_ = sol;

  PlannerOutput out;
  out.tube_reset = tube_reset;
  out.status = sol.status;
  out.kkt_residual = sol.kkt_residual;
  out.qp_iterations = sol.iterations;
  out.slack_used = slack_used;
  if (sol.status == qp::SolveStatus::kInfeasible) {
    out.feasible = false;
    return out;
  }
  out.feasible = true;
  out.objective = 0.5 * sol.z.dot(built.problem.H * sol.z) + built.problem.g.dot(sol.z) +
                  built.cost_constant;
  const int N = cfg_.horizon;
  const int n_x = built.n_x;
  out.xi.resize(n_x, N + 1);
  if (n_x == 4) {
    out.xi.col(0) = xi0;
  } else {
    Eigen::Matrix<double, 6, 1> eta0;
    eta0 << xi0(0), xi0(2), xi0(1), xi0(3), proj.e_y, -xi0(3);
    out.xi.col(0) = eta0;
  }
  for (int k = 1; k <= N; ++k) out.xi.col(k) = sol.z.segment((k - 1) * n_x, n_x);
  out.u.resize(2, N);
  for (int k = 0; k < N; ++k) out.u.col(k) = sol.z.segment(N * n_x + 2 * k, 2);
  if (built.n_slack > 0)
    out.slack_max = sol.z.tail(built.n_slack).cwiseMax(0.0).maxCoeff();

  Eigen::Vector2d u_apply = out.u.col(0);
  if (cfg_.variant == Variant::kRobust) {
    const Eigen::Matrix2d Rw = rot(theta);
    const Eigen::Vector2d p_local = Rw.transpose() * (meas.pos() - origin);
    Eigen::Vector4d xi_meas;
    xi_meas << p_local(0), p_local(1), meas.v_x, wrap_angle(meas.psi - theta);
    const Eigen::Vector4d e = xi_meas - xi0;
    u_apply += setup_->K * e;
    for (int i = 0; i < 2; ++i) {
      if (u_apply(i) < cfg_.u_lo(i) - 1e-12 || u_apply(i) > cfg_.u_hi(i) + 1e-12)
        out.ancillary_saturated = true;
      u_apply(i) = std::clamp(u_apply(i), cfg_.u_lo(i), cfg_.u_hi(i));
    }
    // Propagate the carried nominal trajectory by one step.
    const Eigen::Vector4d nom_next =
        setup_->lpv.A_bar * xi0 + setup_->lpv.B_bar * out.u.col(0);
    const Eigen::Vector2d pw = origin + rot(theta) * nom_next.head<2>();
    nominal_state_ = model::KinematicState{pw(0), pw(1), nom_next(2),
                                           wrap_angle(nom_next(3) + theta)};
  }
  out.u0 = {u_apply(0), u_apply(1)};

  // One-step-ahead planned pose in world coordinates.
  const int xi_x = n_x == 4 ? model::kIdxX : model::kEtaX;
  const int xi_y = n_x == 4 ? model::kIdxY : model::kEtaY;
  const int xi_v = n_x == 4 ? model::kIdxVx : model::kEtaVx;
  const int xi_p = n_x == 4 ? model::kIdxPsi : model::kEtaPsi;
  const Eigen::Vector2d p1_local(out.xi(xi_x, 1), out.xi(xi_y, 1));
  const Eigen::Vector2d p1 = origin + rot(theta) * p1_local;
  out.predicted_pose.x = p1(0);
  out.predicted_pose.y = p1(1);
  out.predicted_pose.psi = wrap_angle(out.xi(xi_p, 1) + theta);
  out.predicted_pose.kappa = proj.kappa;
  out.predicted_v = out.xi(xi_v, 1);

  // Shifted warm start for the next step.
  if (!slack_used) {
    warm_z_ = sol.z;
    for (int k = 1; k < N; ++k)
      warm_z_.segment((k - 1) * n_x, n_x) = sol.z.segment(k * n_x, n_x);
    for (int k = 0; k + 1 < N; ++k)
      warm_z_.segment(N * n_x + 2 * k, 2) = sol.z.segment(N * n_x + 2 * (k + 1), 2);
    warm_dual_ = sol.dual;
  } else {
    warm_z_.resize(0);
    warm_dual_.resize(0);
  }
  return out;
}

}  // namespace evasion::mpc
