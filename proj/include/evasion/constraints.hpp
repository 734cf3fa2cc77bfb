#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <stdexcept>

#include "evasion/geometry.hpp"
#include "evasion/models.hpp"
#include "evasion/reference_path.hpp"

namespace evasion::constraint {

struct LeadVehicle {
  Eigen::Vector2d pos{0, 0};
  double psi = 0;      // orientation [rad]
  double l_f = 1.5;    // CG to front axle [m]
  double l_r = 1.7;    // CG to rear axle [m]
  double width = 1.8;  // [m]
  double speed = 0;    // along-path speed [m/s]
};

struct SafetyEnvelope {
  double time_gap = 1.0;     // desired gap when approaching [s]
  double lead_length = 4.5;  // L_c [m]
  double lateral_w = 3.0;    // lateral safety radius W [m]; must exceed the
                             // combined half-widths to be physically meaningful

  // Longitudinal safety distance, refreshed from the current subject speed.
  double l_x(double subject_speed) const { return subject_speed * time_gap + lead_length; }
};

enum class AvoidMode { kNone, kFcc, kRcc };
enum class AvoidSide { kLeft, kRight };

struct ConvexRegion {
  geom::Halfspace upper, lower;               // virtual road edges
  std::optional<geom::Halfspace> collision;   // FCC or RCC when active
  AvoidMode mode = AvoidMode::kNone;

  bool contains(const Eigen::Vector2d& p, double tol = geom::kPointTol) const;
  double margin(const Eigen::Vector2d& p) const;  // smallest halfspace value
};

struct ConstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Virtual straight road edges: lines with the reference heading through the
/// intersections of the outer/inner edge with the line through the subject CG
/// perpendicular to the vehicle's longitudinal axis. Halfspaces are
/// sign-normalised so the subject position evaluates positive.
std::pair<geom::Halfspace, geom::Halfspace> build_boundary_halfspaces(
    const path::RoadPath& path, const Eigen::Vector2d& subject_pos, double subject_psi,
    const path::Projection& proj, double left_edge_offset, double right_edge_offset);

/// Forward collision constraint: line through the circle/axis intersection
/// points P3 (longitudinal axis, radius L_x + l_r of the lead, root nearest
/// the subject) and P4 (lateral axis, radius W, root on the avoidance side),
/// sign-normalised so the subject position evaluates positive (safe).
geom::Halfspace build_fcc(const LeadVehicle& lead, const SafetyEnvelope& env,
                          const model::KinematicState& subject,
                          AvoidSide side = AvoidSide::kLeft);

/// Rear collision constraint: mirror of the FCC through the forward
/// intersection point (the root nearest the subject once it has crossed).
geom::Halfspace build_rcc(const LeadVehicle& lead, const SafetyEnvelope& env,
                          const model::KinematicState& subject,
                          AvoidSide side = AvoidSide::kLeft);

/// FCC while behind the lead, RCC after crossing until the return to the
/// original lane is complete, NONE afterwards (latched).
class ModeSelector {
 public:
  explicit ModeSelector(double return_ey_threshold = 0.2)
      : return_ey_threshold_(return_ey_threshold) {}

  AvoidMode select(double s_subject, double s_lead, double e_y_subject, double l_x);
  bool manoeuvre_complete() const { return done_; }
  void reset() { done_ = false; }

 private:
  double return_ey_threshold_;
  bool done_ = false;
};

/// Footprint corners in CCW order: front-left, rear-left, rear-right,
/// front-right. Lengths are measured from the CG.
std::array<Eigen::Vector2d, 4> footprint_corners(const Eigen::Vector2d& pos, double psi,
                                                 double front_length, double rear_length,
                                                 double width);

/// Euclidean distance between two convex quadrilaterals; 0 when they overlap.
double footprint_distance(const std::array<Eigen::Vector2d, 4>& a,
                          const std::array<Eigen::Vector2d, 4>& b);

}  // namespace evasion::constraint
