#pragma once

#include <array>
#include <string>
#include <vector>

#include "evasion/constraints.hpp"
#include "evasion/mpc.hpp"
#include "evasion/models.hpp"
#include "evasion/plant.hpp"
#include "evasion/reference_path.hpp"
#include "evasion/torque_vectoring.hpp"

namespace evasion::sim {

struct Scenario {
  std::string name = "scenario";
  int schema = 1;

  // Road: constant radius (0 = straight) unless curvature breakpoints given.
  double radius = 750.0;
  std::vector<std::pair<double, double>> kappa_points;  // (s, kappa)
  double path_length = 900.0;
  double path_step = 0.5;
  double lane_width = 5.0;
  double left_edge = 7.5;    // lateral edge offsets from the reference line
  double right_edge = -2.5;

  // Subject vehicle.
  double subject_speed = 80.0 / 3.6;  // [m/s]
  double subject_start_s = 0.0;
  model::VehicleParams vehicle;

  // Lead vehicle (rides the reference line).
  bool lead_present = true;
  double lead_speed = 30.0 / 3.6;
  double lead_start_s = 70.0;
  double lead_l_f = 1.5;
  double lead_l_r = 1.7;
  double lead_width = 1.8;

  // Controller.
  mpc::MpcConfig mpc;
  bool torque_vectoring = true;
  constraint::SafetyEnvelope envelope;
  constraint::AvoidSide avoid_side = constraint::AvoidSide::kLeft;
  double return_ey_threshold = 0.2;
  tv::TvConfig tv;

  // Plant / environment.
  double mu = 1.0;
  double wheel_inertia = 1.2;
  double body_width = 1.8;
  double overhang_front = 0.9;
  double overhang_rear = 0.9;

  double duration = 25.0;
  unsigned seed = 1;

  void validate() const;
  path::RoadPath build_path() const;
  plant::PlantParams plant_params() const;
};

struct StepRecord {
  double t = 0;
  plant::PlantState plant;
  double s = 0, e_y = 0, e_psi = 0;  // path-relative errors (e_psi = psi_ref - psi)
  constraint::AvoidMode mode = constraint::AvoidMode::kNone;
  // Active region, world frame: a x + b y + c >= 0 is safe.
  std::array<double, 3> upper{}, lower{}, collision{};
  bool has_collision_hs = false;
  double region_margin = 0;
  double delta_cmd = 0, ax_cmd = 0, v_star = 0;
  std::array<double, 4> torques{}, delta_torque{};
  double t_ff_total = 0;
  double net_yaw_moment = 0;
  int solver_status = 0;  // 0 optimal, 1 infeasible, 2 max-iter
  double kkt_residual = 0;
  int qp_iterations = 0;
  bool slack_used = false;
  double slack_max = 0;
  bool tube_reset = false;
  double objective = 0;
  double separation = 0;  // footprint distance to the lead
  double pred_x = 0, pred_y = 0, pred_psi = 0, pred_v = 0;  // one-step-ahead plan
};

struct Metrics {
  double iaca_delta = 0;      // [rad]
  double iaca_ax = 0;         // [m/s^2]
  double iaca_mz = 0;         // [N m]
  double max_e_y = 0;         // [m], over pure tracking phases (mode NONE)
  double max_e_psi = 0;       // [rad]
  double min_separation = 0;  // [m] (1e9 when no lead vehicle)
  bool collision = false;
  bool boundary_violation = false;
  bool completed = false;     // manoeuvre finished (trivially true without lead)
  double window_t0 = 0, window_t1 = 0;  // IACA window
};

struct SimTrace {
  std::string scenario_name;
  double t_s = 0.1;
  std::vector<StepRecord> steps;
  bool aborted = false;
  std::string abort_reason;
  Metrics metrics;
};

/// Time-normalised integral of the absolute value over [t_in, t_fin]
/// (trapezoidal).
double compute_iaca(const std::vector<double>& t, const std::vector<double>& v, double t_in,
                    double t_fin);

/// Step-wise closed loop: measure, project, select mode, build region, plan,
/// torque-vector (or idealised actuation), sub-step the plant.
class Runner {
 public:
  explicit Runner(const Scenario& sc);

  bool step();  // false when finished or aborted
  bool done() const;
  const SimTrace& trace() const { return trace_; }
  SimTrace finish();  // computes metrics and returns the trace

  mpc::Planner& planner() { return planner_; }
  const path::RoadPath& road() const { return path_; }

 private:
  Scenario sc_;
  path::RoadPath path_;
  plant::Plant plant_;
  mpc::Planner planner_;
  constraint::ModeSelector selector_;
  SimTrace trace_;
  int step_index_ = 0, n_steps_ = 0;
  bool finished_ = false;
  std::optional<double> s_hint_;

  void abort(const std::string& reason);
};

SimTrace run(const Scenario& sc);

enum class SweepAxis { kSpeeds, kRadii };

struct SweepRow {
  mpc::Variant variant;
  double axis_value = 0;  // km/h for speeds, metres for radii
  Metrics metrics;
  bool ok = false;
  std::string error;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kSpeeds;
  std::vector<SweepRow> rows;
};

/// One run per (variant, axis value). `parallel` distributes runs over OpenMP
/// threads; each run is isolated and the row order is identical to the serial
/// reference.
SweepResult sweep(const Scenario& base, SweepAxis axis, const std::vector<double>& values,
                  const std::vector<mpc::Variant>& variants, bool parallel = false);

const char* variant_name(mpc::Variant v);
const char* mode_name(constraint::AvoidMode m);

}  // namespace evasion::sim
