#include "evasion/constraints.hpp"

#include <algorithm>
#include <cmath>

namespace evasion::constraint {

namespace {

using geom::Halfspace;

// Normalise to unit normal and flip so `safe_anchor` evaluates >= 0. The
// anchor is a point that is geometrically always on the safe side (the road
// centre for boundaries, the mirror of the lead for collision lines), which
// keeps the orientation stable even if the subject itself grazes the line.
Halfspace normalize_safe(Eigen::Vector2d n, double c, const Eigen::Vector2d& safe_anchor) {
  const double len = n.norm();
  if (len < 1e-14) throw ConstructionError("degenerate halfspace normal");
  n /= len;
  c /= len;
  if (n.dot(safe_anchor) + c < 0) {
    n = -n;
    c = -c;
  }
  return Halfspace::ge((Eigen::VectorXd(2) << n(0), n(1)).finished(), c);
}

// Line through p, q flipped so `unsafe_anchor` evaluates < 0.
Halfspace through_points_unsafe(const Eigen::Vector2d& p, const Eigen::Vector2d& q,
                                const Eigen::Vector2d& unsafe_anchor) {
  const Eigen::Vector2d d = q - p;
  if (d.norm() < 1e-9) throw ConstructionError("collision constraint points coincide");
  Eigen::Vector2d n(-d(1), d(0));
  n /= n.norm();
  double c = -n.dot(p);
  if (n.dot(unsafe_anchor) + c > 0) {
    n = -n;
    c = -c;
  }
  return Halfspace::ge((Eigen::VectorXd(2) << n(0), n(1)).finished(), c);
}

// Line through `point` with direction angle `theta`, as a*x + b*y + c = 0.
Halfspace direction_line(const Eigen::Vector2d& point, double theta) {
  const Eigen::Vector2d n(-std::sin(theta), std::cos(theta));
  return Halfspace::line2(n(0), n(1), -n.dot(point));
}

// Intersection of the lateral-offset edge curve with the line through the
// subject CG perpendicular to the vehicle axis, searched around s0.
Eigen::Vector2d edge_intersection(const path::RoadPath& path, const Eigen::Vector2d& cg,
                                  double subject_psi, double offset, double s0) {
  const Eigen::Vector2d axis(std::cos(subject_psi), std::sin(subject_psi));
  auto g = [&](double s) { return axis.dot(path.edge_point(s, offset) - cg); };
  const double window = 40.0, coarse = 1.0;
  double lo = std::max(0.0, s0 - window);
  double hi = std::min(path.total_length(), s0 + window);
  double prev_s = lo, prev_g = g(lo);
  for (double s = lo + coarse;; s += coarse) {
    s = std::min(s, hi);
    const double gs = g(s);
    if (prev_g == 0.0) return path.edge_point(prev_s, offset);
    if (prev_g * gs <= 0.0) {
      double a = prev_s, b = s, ga = prev_g;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + b), gm = g(mid);
        if (ga * gm <= 0.0) b = mid;
        else {
          a = mid;
          ga = gm;
        }
      }
      return path.edge_point(0.5 * (a + b), offset);
    }
    prev_s = s;
    prev_g = gs;
    if (s >= hi) break;
  }
  throw ConstructionError("road edge not intersected within search window");
}

}  // namespace

bool ConvexRegion::contains(const Eigen::Vector2d& p, double tol) const {
  return margin(p) >= -tol;
}

double ConvexRegion::margin(const Eigen::Vector2d& p) const {
  double m = std::min(upper.eval(p), lower.eval(p));
  if (collision) m = std::min(m, collision->eval(p));
  return m;
}

std::pair<Halfspace, Halfspace> build_boundary_halfspaces(const path::RoadPath& path,
                                                          const Eigen::Vector2d& subject_pos,
                                                          double subject_psi,
                                                          const path::Projection& proj,
                                                          double left_edge_offset,
                                                          double right_edge_offset) {
  const Eigen::Vector2d p1 =
      edge_intersection(path, subject_pos, subject_psi, left_edge_offset, proj.s);
  const Eigen::Vector2d p2 =
      edge_intersection(path, subject_pos, subject_psi, right_edge_offset, proj.s);
  const Eigen::Vector2d centre = path.pose_at(proj.s).pos();
  const Halfspace up_line = direction_line(p1, proj.psi_ref);
  const Halfspace lo_line = direction_line(p2, proj.psi_ref);
  const Eigen::Vector2d n_up(up_line.a(), up_line.b());
  const Eigen::Vector2d n_lo(lo_line.a(), lo_line.b());
  // The road centre is strictly inside both virtual edges and keeps the
  // orientation well defined when the subject sits exactly on an edge.
  return {normalize_safe(n_up, up_line.c(), centre), normalize_safe(n_lo, lo_line.c(), centre)};
}

namespace {

Halfspace build_collision_line(const LeadVehicle& lead, const SafetyEnvelope& env,
                               const model::KinematicState& subject, AvoidSide side) {
  const double r_long = env.l_x(subject.v_x) + lead.l_r;
  const Halfspace lon_axis = direction_line(lead.pos, lead.psi);
  const Halfspace lat_axis = direction_line(lead.pos, lead.psi + M_PI / 2.0);
  const auto p3s = geom::intersect_line_circle(lon_axis, {lead.pos, r_long});
  const auto p4s = geom::intersect_line_circle(lat_axis, {lead.pos, env.lateral_w});
  if (p3s.size() < 2 || p4s.size() < 2) throw ConstructionError("collision circle degenerate");

  const Eigen::Vector2d sub = subject.pos();
  const Eigen::Vector2d p3 = (p3s[0] - sub).norm() <= (p3s[1] - sub).norm() ? p3s[0] : p3s[1];
  const Eigen::Vector2d left(-std::sin(lead.psi), std::cos(lead.psi));
  const double want = side == AvoidSide::kLeft ? 1.0 : -1.0;
  const Eigen::Vector2d p4 = want * left.dot(p4s[0] - lead.pos) > 0 ? p4s[0] : p4s[1];
  // The lead centre is always strictly unsafe, so it anchors the sign even
  // when the subject grazes the line; on the safe side this agrees with
  // normalising at the subject position.
  return through_points_unsafe(p3, p4, lead.pos);
}

}  // namespace

Halfspace build_fcc(const LeadVehicle& lead, const SafetyEnvelope& env,
                    const model::KinematicState& subject, AvoidSide side) {
  return build_collision_line(lead, env, subject, side);
}

Halfspace build_rcc(const LeadVehicle& lead, const SafetyEnvelope& env,
                    const model::KinematicState& subject, AvoidSide side) {
  // Same construction; with the subject past the lead the nearest
  // longitudinal root is the forward one, which mirrors the FCC line.
  return build_collision_line(lead, env, subject, side);
}

AvoidMode ModeSelector::select(double s_subject, double s_lead, double e_y_subject, double l_x) {
  if (done_) return AvoidMode::kNone;
  if (s_subject < s_lead) return AvoidMode::kFcc;
  if (s_subject - s_lead > l_x && std::abs(e_y_subject) < return_ey_threshold_) {
    done_ = true;
    return AvoidMode::kNone;
  }
  return AvoidMode::kRcc;
}

std::array<Eigen::Vector2d, 4> footprint_corners(const Eigen::Vector2d& pos, double psi,
                                                 double front_length, double rear_length,
                                                 double width) {
  const Eigen::Vector2d fwd(std::cos(psi), std::sin(psi));
  const Eigen::Vector2d left(-std::sin(psi), std::cos(psi));
  const double hw = width / 2.0;
  return {pos + front_length * fwd + hw * left, pos - rear_length * fwd + hw * left,
          pos - rear_length * fwd - hw * left, pos + front_length * fwd - hw * left};
}

namespace {

bool separated_along(const Eigen::Vector2d& axis, const std::array<Eigen::Vector2d, 4>& a,
                     const std::array<Eigen::Vector2d, 4>& b) {
  double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
  for (const auto& p : a) {
    amin = std::min(amin, axis.dot(p));
    amax = std::max(amax, axis.dot(p));
  }
  for (const auto& p : b) {
    bmin = std::min(bmin, axis.dot(p));
    bmax = std::max(bmax, axis.dot(p));
  }
  return amax < bmin || bmax < amin;
}

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = b - a;
  const double t = std::clamp(d.dot(p - a) / std::max(d.squaredNorm(), 1e-30), 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

}  // namespace

double footprint_distance(const std::array<Eigen::Vector2d, 4>& a,
                          const std::array<Eigen::Vector2d, 4>& b) {
  bool separated = false;
  for (const auto& quad : {a, b}) {
    for (int i = 0; i < 4 && !separated; ++i) {
      const Eigen::Vector2d e = quad[(i + 1) % 4] - quad[i];
      separated = separated_along({-e(1), e(0)}, a, b);
    }
    if (separated) break;
  }
  if (!separated) return 0.0;  // overlapping
  double d = 1e300;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      d = std::min(d, point_segment_distance(a[i], b[j], b[(j + 1) % 4]));
      d = std::min(d, point_segment_distance(b[i], a[j], a[(j + 1) % 4]));
    }
  }
  return d;
}

}  // namespace evasion::constraint
