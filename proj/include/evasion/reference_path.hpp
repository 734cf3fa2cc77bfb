#pragma once

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

namespace evasion::path {

/// Piecewise-linear curvature over arc length, clamped outside the breakpoint
/// span. The heading integral is evaluated in closed form (quadratic pieces).
class KappaProfile {
 public:
  static KappaProfile constant(double kappa);
  static KappaProfile from_breakpoints(std::vector<std::pair<double, double>> pts);

  double kappa(double s) const;
  double heading(double s) const;  // integral of kappa over [0, s]
  const std::vector<std::pair<double, double>>& breakpoints() const { return pts_; }

 private:
  std::vector<std::pair<double, double>> pts_;  // (s, kappa), s strictly increasing
  std::vector<double> psi_;                     // heading at breakpoints
};

struct PathSample {
  double s, x, y, psi, kappa;
};

struct PathPose {
  double x, y, psi, kappa;
  Eigen::Vector2d pos() const { return {x, y}; }
  Eigen::Vector2d tangent() const { return {std::cos(psi), std::sin(psi)}; }
  Eigen::Vector2d normal() const { return {-std::sin(psi), std::cos(psi)}; }  // path-left
};

struct Projection {
  double s;        // arc length of the closest centreline point
  double e_y;      // signed lateral offset, positive toward path-left
  double psi_ref;  // reference heading at s
  double kappa;    // curvature at s
};

/// Arc-length parameterised centreline sampled on a uniform grid; positions
/// come from per-interval Simpson quadrature of (cos psi, sin psi).
class RoadPath {
 public:
  static RoadPath build_clothoid(const KappaProfile& profile, double length, double step = 0.5,
                                 double lane_width = 5.0);

  const std::vector<PathSample>& samples() const { return samples_; }
  double total_length() const { return length_; }
  double lane_width() const { return lane_width_; }
  double step() const { return step_; }

  PathPose pose_at(double s) const;  // s clamped to [0, length]

  /// Closest-point projection: grid search (optionally windowed around
  /// `s_hint`) then Newton refinement of the perpendicularity condition.
  /// Returns nullopt when pos is outside the +-3 lane-width corridor.
  std::optional<Projection> project(const Eigen::Vector2d& pos,
                                    std::optional<double> s_hint = {}) const;

  /// Point on the lateral offset curve (positive offsets toward path-left).
  Eigen::Vector2d edge_point(double s, double offset) const;

 private:
  KappaProfile profile_;
  std::vector<PathSample> samples_;
  double length_ = 0, step_ = 0, lane_width_ = 0;
};

}  // namespace evasion::path
