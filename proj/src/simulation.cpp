#include "evasion/simulation.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace evasion::sim {

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2 * M_PI;
  while (a < -M_PI) a += 2 * M_PI;
  return a;
}

std::array<double, 3> hs_coeffs(const geom::Halfspace& h) {
  const geom::Halfspace g =
      h.sense == geom::Halfspace::Sense::GE ? h : geom::Halfspace::ge(-h.normal, -h.offset);
  return {g.a(), g.b(), g.c()};
}

}  // namespace

const char* variant_name(mpc::Variant v) {
  switch (v) {
    case mpc::Variant::kNominal: return "nominal";
    case mpc::Variant::kOffsetFree: return "offset_free";
    case mpc::Variant::kRobust: return "robust";
  }
  return "?";
}

const char* mode_name(constraint::AvoidMode m) {
  switch (m) {
    case constraint::AvoidMode::kNone: return "none";
    case constraint::AvoidMode::kFcc: return "fcc";
    case constraint::AvoidMode::kRcc: return "rcc";
  }
  return "?";
}

void Scenario::validate() const {
  vehicle.validate();
  if (path_length <= 0 || path_step <= 0 || lane_width <= 0)
    throw std::invalid_argument("scenario: malformed path geometry");
  if (left_edge <= right_edge) throw std::invalid_argument("scenario: edges out of order");
  if (subject_speed <= 0 || subject_speed > 70)
    throw std::invalid_argument("scenario: subject speed out of range");
  if (lead_present && (lead_speed < 0 || lead_start_s <= subject_start_s))
    throw std::invalid_argument("scenario: lead must start ahead with nonnegative speed");
  if (mu <= 0 || mu > 1.2) throw std::invalid_argument("scenario: mu out of range");
  if (duration <= 0 || duration > 600) throw std::invalid_argument("scenario: bad duration");
  if (envelope.time_gap <= 0 || envelope.lateral_w <= 0 || envelope.lead_length <= 0)
    throw std::invalid_argument("scenario: malformed safety envelope");
  if (radius != 0 && std::abs(radius) < 50)
    throw std::invalid_argument("scenario: radius too tight");
  mpc.validate();
}

path::RoadPath Scenario::build_path() const {
  const path::KappaProfile profile =
      !kappa_points.empty() ? path::KappaProfile::from_breakpoints(kappa_points)
      : radius != 0        ? path::KappaProfile::constant(1.0 / radius)
                           : path::KappaProfile::constant(0.0);
  return path::RoadPath::build_clothoid(profile, path_length, path_step, lane_width);
}

plant::PlantParams Scenario::plant_params() const {
  plant::PlantParams p;
  p.veh = vehicle;
  p.wheel_inertia = wheel_inertia;
  p.width = body_width;
  p.overhang_front = overhang_front;
  p.overhang_rear = overhang_rear;
  return p;
}

double compute_iaca(const std::vector<double>& t, const std::vector<double>& v, double t_in,
                    double t_fin) {
  if (t.size() != v.size() || t.size() < 2 || t_fin <= t_in)
    throw std::invalid_argument("compute_iaca: bad window or series");
  double integral = 0;
  for (size_t i = 0; i + 1 < t.size(); ++i) {
    const double a = std::max(t[i], t_in), b = std::min(t[i + 1], t_fin);
    if (b <= a) continue;
    const double span = t[i + 1] - t[i];
    const double fa = std::abs(v[i] + (v[i + 1] - v[i]) * (a - t[i]) / span);
    const double fb = std::abs(v[i] + (v[i + 1] - v[i]) * (b - t[i]) / span);
    integral += 0.5 * (fa + fb) * (b - a);
  }
  return integral / (t_fin - t_in);
}

Runner::Runner(const Scenario& sc)
    : sc_([](Scenario s) {
        s.validate();
        return s;
      }(sc)),
      path_(sc_.build_path()),
      plant_(sc_.plant_params(), plant::Surface{sc_.mu}),
      planner_(sc_.vehicle, sc_.mpc),
      selector_(sc_.return_ey_threshold) {
  const path::PathPose start = path_.pose_at(sc_.subject_start_s);
  plant_.set_kinematic(start.x, start.y, start.psi, sc_.subject_speed);
  trace_.scenario_name = sc_.name;
  trace_.t_s = sc_.vehicle.t_s;
  n_steps_ = static_cast<int>(std::round(sc_.duration / sc_.vehicle.t_s));
  trace_.steps.reserve(n_steps_);
}

void Runner::abort(const std::string& reason) {
  trace_.aborted = true;
  trace_.abort_reason = reason;
  finished_ = true;
}

bool Runner::done() const { return finished_ || step_index_ >= n_steps_; }

bool Runner::step() {
  if (done()) return false;
  const double t = step_index_ * sc_.vehicle.t_s;
  StepRecord rec;
  rec.t = t;

  const plant::Measurement meas = plant_.measure();
  rec.plant = plant_.state();

  const auto proj_opt = path_.project(meas.kin.pos(), s_hint_);
  if (!proj_opt) {
    abort("projection failure: subject left the path corridor");
    return false;
  }
  const path::Projection proj = *proj_opt;
  s_hint_ = proj.s;
  rec.s = proj.s;
  rec.e_y = proj.e_y;
  rec.e_psi = wrap_angle(proj.psi_ref - meas.kin.psi);

  // Lead vehicle rides the reference line.
  constraint::LeadVehicle lead;
  double s_lead = 0;
  if (sc_.lead_present) {
    s_lead = sc_.lead_start_s + sc_.lead_speed * t;
    const path::PathPose lp = path_.pose_at(s_lead);
    lead = {lp.pos(), lp.psi, sc_.lead_l_f, sc_.lead_l_r, sc_.lead_width, sc_.lead_speed};
  }

  constraint::AvoidMode mode = constraint::AvoidMode::kNone;
  if (sc_.lead_present)
    mode = selector_.select(proj.s, s_lead, proj.e_y, sc_.envelope.l_x(meas.kin.v_x));
  rec.mode = mode;

  constraint::ConvexRegion region;
  try {
    auto [upper, lower] = constraint::build_boundary_halfspaces(
        path_, meas.kin.pos(), meas.kin.psi, proj, sc_.left_edge, sc_.right_edge);
    region.upper = upper;
    region.lower = lower;
    region.mode = mode;
    if (mode == constraint::AvoidMode::kFcc)
      region.collision = constraint::build_fcc(lead, sc_.envelope, meas.kin, sc_.avoid_side);
    else if (mode == constraint::AvoidMode::kRcc)
      region.collision = constraint::build_rcc(lead, sc_.envelope, meas.kin, sc_.avoid_side);
  } catch (const constraint::ConstructionError& e) {
    abort(std::string("constraint construction failure: ") + e.what());
    return false;
  }
  rec.upper = hs_coeffs(region.upper);
  rec.lower = hs_coeffs(region.lower);
  if (region.collision) {
    rec.collision = hs_coeffs(*region.collision);
    rec.has_collision_hs = true;
  }
  rec.region_margin = region.margin(meas.kin.pos());

  const mpc::PlannerOutput plan = planner_.plan(meas.kin, region, path_, proj, sc_.subject_speed);
  rec.solver_status = plan.status == qp::SolveStatus::kOptimal     ? 0
                      : plan.status == qp::SolveStatus::kInfeasible ? 1
                                                                    : 2;
  rec.kkt_residual = plan.kkt_residual;
  rec.qp_iterations = plan.qp_iterations;
  rec.slack_used = plan.slack_used;
  rec.slack_max = plan.slack_max;
  rec.tube_reset = plan.tube_reset;
  rec.objective = plan.objective;
  if (!plan.feasible) {
    trace_.steps.push_back(rec);
    abort("planner infeasible after slack fallback");
    return false;
  }
  rec.delta_cmd = plan.u0.delta_f;
  rec.ax_cmd = plan.u0.a_x;
  // One-step optimal velocity implied by the applied command (for the tube
  // controller this includes the ancillary correction).
  const double v_star = meas.kin.v_x + plan.u0.a_x * sc_.vehicle.t_s;
  rec.v_star = v_star;
  rec.pred_x = plan.predicted_pose.x;
  rec.pred_y = plan.predicted_pose.y;
  rec.pred_psi = plan.predicted_pose.psi;
  rec.pred_v = plan.predicted_v;

  // Low-level actuation.
  std::array<double, 4> torques{};
  if (sc_.torque_vectoring) {
    const auto t_ff = tv::feedforward_torque(v_star, meas.kin.v_x, sc_.tv.K_p);
    tv::TvConfig tvc = sc_.tv;
    tvc.mu = sc_.mu;
    const tv::PlantSummary summary{meas.kin.v_x, meas.yaw_rate, meas.cg};
    const tv::CgForceTarget f_des =
        tv::desired_cg_forces(plan.u0.delta_f, v_star, summary, sc_.vehicle, tvc);
    const tv::Allocation alloc =
        tv::allocate(meas.tires, f_des, meas.cg, plan.u0.delta_f, t_ff, sc_.vehicle, tvc);
    torques = alloc.command.T;
    rec.delta_torque = alloc.command.delta_T;
    rec.t_ff_total = alloc.command.T_ff_total;
    rec.net_yaw_moment = alloc.net_yaw_moment;
  } else {
    // Idealised actuator: acceleration command through equal torques from
    // inverse wheel dynamics.
    const double a = plan.u0.a_x;
    const double per_wheel = sc_.vehicle.wheel_radius_eff * sc_.vehicle.mass * a / 4.0 +
                             sc_.wheel_inertia * a / sc_.vehicle.wheel_radius_eff;
    torques = {per_wheel, per_wheel, per_wheel, per_wheel};
  }
  rec.torques = torques;

  if (sc_.lead_present) {
    const auto sub_fp = constraint::footprint_corners(
        meas.kin.pos(), meas.kin.psi, sc_.vehicle.l_f + sc_.overhang_front,
        sc_.vehicle.l_r + sc_.overhang_rear, sc_.body_width);
    const double lead_oh =
        std::max(0.0, (sc_.envelope.lead_length - (sc_.lead_l_f + sc_.lead_l_r)) / 2.0);
    const auto lead_fp = constraint::footprint_corners(lead.pos, lead.psi, lead.l_f + lead_oh,
                                                       lead.l_r + lead_oh, lead.width);
    rec.separation = constraint::footprint_distance(sub_fp, lead_fp);
  } else {
    rec.separation = 1e9;
  }

  trace_.steps.push_back(rec);
  try {
    plant_.step(plan.u0.delta_f, torques, sc_.vehicle.t_s);
  } catch (const plant::Divergence& e) {
    abort(std::string("plant divergence: ") + e.what());
    return false;
  }
  ++step_index_;
  return !done();
}

SimTrace Runner::finish() {
  while (step()) {
  }
  Metrics m;
  const auto& steps = trace_.steps;
  if (steps.empty()) {
    trace_.metrics = m;
    return trace_;
  }

  std::vector<double> t, dcmd, acmd, mz;
  t.reserve(steps.size());
  for (const auto& r : steps) {
    t.push_back(r.t);
    dcmd.push_back(r.delta_cmd);
    acmd.push_back(r.ax_cmd);
    mz.push_back(r.net_yaw_moment);
  }

  double t0 = steps.front().t, t1 = steps.back().t;
  bool saw_fcc = false;
  for (const auto& r : steps) {
    if (!saw_fcc && r.mode == constraint::AvoidMode::kFcc) {
      saw_fcc = true;
      t0 = r.t;
    } else if (saw_fcc && r.mode == constraint::AvoidMode::kNone) {
      t1 = r.t;
      break;
    }
  }
  m.window_t0 = t0;
  m.window_t1 = t1;
  m.completed = sc_.lead_present ? selector_.manoeuvre_complete() : !trace_.aborted;
  if (t1 > t0 && steps.size() >= 2) {
    m.iaca_delta = compute_iaca(t, dcmd, t0, t1);
    m.iaca_ax = compute_iaca(t, acmd, t0, t1);
    m.iaca_mz = compute_iaca(t, mz, t0, t1);
  }

  m.min_separation = 1e9;
  for (const auto& r : steps) {
    if (r.mode == constraint::AvoidMode::kNone) {
      m.max_e_y = std::max(m.max_e_y, std::abs(r.e_y));
      m.max_e_psi = std::max(m.max_e_psi, std::abs(r.e_psi));
    }
    if (sc_.lead_present) m.min_separation = std::min(m.min_separation, r.separation);
    if (r.separation <= 0) m.collision = true;
    if (r.e_y > sc_.left_edge || r.e_y < sc_.right_edge) m.boundary_violation = true;
  }
  trace_.metrics = m;
  return trace_;
}

SimTrace run(const Scenario& sc) {
  Runner runner(sc);
  return runner.finish();
}

SweepResult sweep(const Scenario& base, SweepAxis axis, const std::vector<double>& values,
                  const std::vector<mpc::Variant>& variants, bool parallel) {
  SweepResult result;
  result.axis = axis;
  const int nv = static_cast<int>(variants.size());
  const int na = static_cast<int>(values.size());
  result.rows.resize(static_cast<size_t>(nv) * na);

  const auto work = [&](int idx) {
    const int vi = idx / na, ai = idx % na;
    SweepRow& row = result.rows[idx];
    row.variant = variants[vi];
    row.axis_value = values[ai];
    Scenario sc = base;
    sc.mpc.variant = variants[vi];
    if (axis == SweepAxis::kSpeeds) {
      sc.subject_speed = values[ai] / 3.6;
    } else {
      sc.radius = values[ai];
      sc.kappa_points.clear();
    }
    try {
      const SimTrace trace = run(sc);
      row.metrics = trace.metrics;
      row.ok = !trace.aborted;
      row.error = trace.abort_reason;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  };

  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < nv * na; ++i) work(i);
  } else {
    for (int i = 0; i < nv * na; ++i) work(i);
  }
  return result;
}

}  // namespace evasion::sim
