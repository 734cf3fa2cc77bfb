#include "evasion/validation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace evasion::validate {

namespace {

using constraint::LeadVehicle;
using constraint::SafetyEnvelope;

// Independent root computation: parametrise the line as p0 + t d and solve
// the quadratic |p0 + t d - c|^2 = r^2 directly.
std::vector<Eigen::Vector2d> circle_oracle(const geom::Halfspace& line, const geom::Circle& c) {
  const Eigen::Vector2d n(line.a(), line.b());
  const Eigen::Vector2d p0 = -line.c() * n / n.squaredNorm();
  const Eigen::Vector2d d(-line.b(), line.a());
  const Eigen::Vector2d rel = p0 - c.center;
  const double A = d.squaredNorm();
  const double B = 2.0 * d.dot(rel);
  const double C = rel.squaredNorm() - c.radius * c.radius;
  const double disc = B * B - 4 * A * C;
  std::vector<Eigen::Vector2d> out;
  if (disc < 0) return out;
  const double sq = std::sqrt(disc);
  out.push_back(p0 + ((-B + sq) / (2 * A)) * d);
  if (sq > 0) out.push_back(p0 + ((-B - sq) / (2 * A)) * d);
  return out;
}

double intersection_residual(const geom::Halfspace& line, const geom::Circle& c) {
  const auto pts = geom::intersect_line_circle(line, c);
  const auto oracle = circle_oracle(line, c);
  double worst = 0;
  const double nn = std::hypot(line.a(), line.b());
  for (const auto& p : pts) {
    worst = std::max(worst, std::abs((p - c.center).norm() - c.radius));
    worst = std::max(worst, std::abs(line.eval(p)) / nn);
    double best = 1e300;
    for (const auto& q : oracle) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  if (pts.size() != oracle.size() && !(pts.size() == 1 && oracle.size() == 2)) worst = 1e300;
  return worst;
}

struct SampleResult {
  bool ok = true;
  double residual = 0;
  double margin = 1e300;
  std::string what;
};

SampleResult check_one(const path::RoadPath& road, std::mt19937& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  SampleResult res;

  const double margin_ends = 160.0;
  const double s_lead = margin_ends + uni(rng) * (road.total_length() - 2 * margin_ends);
  const path::PathPose lp = road.pose_at(s_lead);
  LeadVehicle lead{lp.pos(), lp.psi, 1.5, 1.7, 1.8, 0.0};
  SafetyEnvelope env{1.0, 4.5, 3.0};
  const double v = 10.0 + 15.0 * uni(rng);
  const double r_x = env.l_x(v) + lead.l_r;
  const double oh = std::max(0.0, (env.lead_length - (lead.l_f + lead.l_r)) / 2.0);
  const auto corners = constraint::footprint_corners(lead.pos, lead.psi, lead.l_f + oh,
                                                     lead.l_r + oh, lead.width);

  const bool fcc = uni(rng) < 0.5;
  double off, gap;
  if (fcc) {
    off = -2.0 + 4.0 * uni(rng);  // own lane, either side
    gap = r_x * (env.lateral_w - off) / env.lateral_w + 2.0 + 60.0 * uni(rng);
  } else if (uni(rng) < 0.5) {
    off = env.lateral_w + 0.6 + 1.5 * uni(rng);  // abeam, in the avoidance lane
    gap = -uni(rng) * r_x;                       // measured backwards: subject ahead by -gap
  } else {
    off = 0.3 + 4.0 * uni(rng);  // far enough past to be safe at this offset
    gap = -(r_x * (env.lateral_w - std::min(off, env.lateral_w)) / env.lateral_w + 2.0 +
            60.0 * uni(rng));
  }
  const double s_sub = s_lead - gap;
  const Eigen::Vector2d sub_pos = road.edge_point(s_sub, off);
  model::KinematicState subject{sub_pos(0), sub_pos(1), v, road.pose_at(s_sub).psi};

  geom::Halfspace hs = fcc ? constraint::build_fcc(lead, env, subject)
                           : constraint::build_rcc(lead, env, subject);
  const double sv = hs.eval(sub_pos);
  res.margin = sv;
  if (sv <= 0) {
    res.ok = false;
    std::ostringstream os;
    os << (fcc ? "fcc" : "rcc") << ": subject unsafe, value " << sv << " at gap " << gap
       << " offset " << off;
    res.what = os.str();
    return res;
  }
  for (const auto& cpt : corners) {
    const double cv = hs.eval(cpt);
    if (cv >= 0) {
      res.ok = false;
      std::ostringstream os;
      os << (fcc ? "fcc" : "rcc") << ": lead corner in safe region, value " << cv;
      res.what = os.str();
      return res;
    }
  }

  // Intersection accuracy against the independent oracle.
  const Eigen::Vector2d fwd(std::cos(lead.psi), std::sin(lead.psi));
  const Eigen::Vector2d left(-fwd(1), fwd(0));
  const geom::Halfspace lon = geom::Halfspace::line2(-fwd(1), fwd(0), fwd(1) * lead.pos(0) - fwd(0) * lead.pos(1));
  const geom::Halfspace lat = geom::Halfspace::line2(-left(1), left(0), left(1) * lead.pos(0) - left(0) * lead.pos(1));
  res.residual = std::max(intersection_residual(lon, {lead.pos, r_x}),
                          intersection_residual(lat, {lead.pos, env.lateral_w}));
  if (res.residual > 1e-9) {
    res.ok = false;
    std::ostringstream os;
    os << "intersection residual " << res.residual;
    res.what = os.str();
  }
  return res;
}

}  // namespace

GeometryReport validate_constraint_geometry(double radius, int n_samples, unsigned seed,
                                            bool parallel) {
  const path::KappaProfile profile = radius != 0 ? path::KappaProfile::constant(1.0 / radius)
                                                 : path::KappaProfile::constant(0.0);
  const double length = 2000.0;
  const path::RoadPath road = path::RoadPath::build_clothoid(profile, length, 0.5, 5.0);

  GeometryReport rep;
  rep.samples = n_samples;
  std::vector<SampleResult> results(n_samples);
  const auto work = [&](int i) {
    std::mt19937 rng(seed + 7919u * static_cast<unsigned>(i));
    results[i] = check_one(road, rng);
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_samples; ++i) work(i);
  } else {
    for (int i = 0; i < n_samples; ++i) work(i);
  }
  for (const auto& r : results) {
    if (!r.ok && rep.first_failure.empty()) rep.first_failure = r.what;
    rep.failures += r.ok ? 0 : 1;
    rep.max_intersection_residual = std::max(rep.max_intersection_residual, r.residual);
    rep.min_subject_margin = std::min(rep.min_subject_margin, r.margin);
  }
  return rep;
}

}  // namespace evasion::validate
