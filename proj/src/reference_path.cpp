#include "evasion/reference_path.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evasion::path {

KappaProfile KappaProfile::constant(double kappa) {
  return from_breakpoints({{0.0, kappa}, {1.0, kappa}});
}

KappaProfile KappaProfile::from_breakpoints(std::vector<std::pair<double, double>> pts) {
  if (pts.empty()) throw std::invalid_argument("KappaProfile: no breakpoints");
  std::sort(pts.begin(), pts.end());
  for (size_t i = 1; i < pts.size(); ++i)
    if (pts[i].first <= pts[i - 1].first)
      throw std::invalid_argument("KappaProfile: breakpoints must be strictly increasing");
  for (const auto& [s, k] : pts)
    if (!std::isfinite(s) || !std::isfinite(k))
      throw std::invalid_argument("KappaProfile: non-finite breakpoint");
  KappaProfile p;
  p.pts_ = std::move(pts);
  p.psi_.resize(p.pts_.size());
  // Heading at breakpoints relative to s = 0 (trapezoid is exact for
  // piecewise-linear curvature).
  p.psi_[0] = p.pts_[0].second * p.pts_[0].first;  // constant extension below first breakpoint
  for (size_t i = 1; i < p.pts_.size(); ++i) {
    const double ds = p.pts_[i].first - p.pts_[i - 1].first;
    p.psi_[i] = p.psi_[i - 1] + 0.5 * (p.pts_[i].second + p.pts_[i - 1].second) * ds;
  }
  return p;
}

double KappaProfile::kappa(double s) const {
  if (s <= pts_.front().first) return pts_.front().second;
  if (s >= pts_.back().first) return pts_.back().second;
  auto it = std::upper_bound(pts_.begin(), pts_.end(), std::make_pair(s, 1e300));
  const size_t i = static_cast<size_t>(it - pts_.begin());
  const auto& [s0, k0] = pts_[i - 1];
  const auto& [s1, k1] = pts_[i];
  return k0 + (k1 - k0) * (s - s0) / (s1 - s0);
}

double KappaProfile::heading(double s) const {
  if (s <= pts_.front().first) return pts_.front().second * s;
  if (s >= pts_.back().first)
    return psi_.back() + pts_.back().second * (s - pts_.back().first);
  auto it = std::upper_bound(pts_.begin(), pts_.end(), std::make_pair(s, 1e300));
  const size_t i = static_cast<size_t>(it - pts_.begin());
  const auto& [s0, k0] = pts_[i - 1];
  const double ds = s - s0;
  return psi_[i - 1] + k0 * ds + 0.5 * (kappa(s) - k0) * ds;
}

RoadPath RoadPath::build_clothoid(const KappaProfile& profile, double length, double step,
                                  double lane_width) {
  if (step <= 0 || length <= 0) throw std::invalid_argument("build_clothoid: bad length/step");
  RoadPath rp;
  rp.profile_ = profile;
  rp.length_ = length;
  rp.step_ = step;
  rp.lane_width_ = lane_width;
  const int n = static_cast<int>(std::ceil(length / step));
  rp.samples_.reserve(n + 1);
  double x = 0, y = 0;
  for (int i = 0; i <= n; ++i) {
    const double s = std::min(i * step, length);
    rp.samples_.push_back({s, x, y, profile.heading(s), profile.kappa(s)});
    if (i == n) break;
    const double s1 = std::min((i + 1) * step, length);
    const double h = s1 - s;
    const double pm = profile.heading(s + h / 2), p1 = profile.heading(s1);
    const double p0 = rp.samples_.back().psi;
    x += h / 6.0 * (std::cos(p0) + 4 * std::cos(pm) + std::cos(p1));
    y += h / 6.0 * (std::sin(p0) + 4 * std::sin(pm) + std::sin(p1));
  }
  return rp;
}

PathPose RoadPath::pose_at(double s) const {
  s = std::clamp(s, 0.0, length_);
  const size_t i = std::min(static_cast<size_t>(s / step_), samples_.size() - 1);
  const PathSample& a = samples_[i];
  const double h = s - a.s;
  PathPose p;
  p.psi = profile_.heading(s);
  p.kappa = profile_.kappa(s);
  if (h < 1e-12) {
    p.x = a.x;
    p.y = a.y;
    return p;
  }
  const double pm = profile_.heading(a.s + h / 2);
  p.x = a.x + h / 6.0 * (std::cos(a.psi) + 4 * std::cos(pm) + std::cos(p.psi));
  p.y = a.y + h / 6.0 * (std::sin(a.psi) + 4 * std::sin(pm) + std::sin(p.psi));
  return p;
}

Eigen::Vector2d RoadPath::edge_point(double s, double offset) const {
  const PathPose p = pose_at(s);
  return p.pos() + offset * p.normal();
}

std::optional<Projection> RoadPath::project(const Eigen::Vector2d& pos,
                                            std::optional<double> s_hint) const {
  size_t i_lo = 0, i_hi = samples_.size() - 1;
  if (s_hint) {
    const double window = 60.0;
    i_lo = static_cast<size_t>(std::max(0.0, (*s_hint - window) / step_));
    i_hi = std::min(i_hi, static_cast<size_t>(std::max(0.0, (*s_hint + window) / step_)) + 1);
  }
  double best_d2 = 1e300;
  size_t best = i_lo;
  for (size_t i = i_lo; i <= i_hi; ++i) {
    const double dx = pos(0) - samples_[i].x, dy = pos(1) - samples_[i].y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {  // strict: equidistant samples resolve to smallest s
      best_d2 = d2;
      best = i;
    }
  }
  double s = samples_[best].s;
  for (int it = 0; it < 4; ++it) {
    const PathPose p = pose_at(s);
    const Eigen::Vector2d r = pos - p.pos();
    const double f = p.tangent().dot(r);             // zero at the foot point
    const double fp = p.kappa * p.normal().dot(r) - 1.0;
    if (std::abs(fp) < 1e-12) break;
    s = std::clamp(s - f / fp, 0.0, length_);
  }
  const PathPose p = pose_at(s);
  Projection proj{s, p.normal().dot(pos - p.pos()), p.psi, p.kappa};
  if (std::abs(proj.e_y) > 3.0 * lane_width_) return std::nullopt;
  return proj;
}

}  // namespace evasion::path
