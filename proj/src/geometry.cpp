#include "evasion/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <omp.h>

#include <random>
#include <set>
#include <unordered_map>
#include <sstream>
#include <stdexcept>

#include "evasion/qp.hpp"

namespace evasion::geom {

namespace {

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// Monotone-chain convex hull, CCW order. Collinear points are dropped.
std::vector<Eigen::VectorXd> hull2d(std::vector<Eigen::VectorXd> pts) {
  auto cross = [](const Eigen::VectorXd& o, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
  };
  std::sort(pts.begin(), pts.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1));
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                          return near(a(0), b(0), kPointTol) && near(a(1), b(1), kPointTol);
                        }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Eigen::VectorXd> h(2 * pts.size());
  size_t k = 0;
  for (const auto& p : pts) {  // lower
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 1e-12) --k;
    h[k++] = p;
  }
  for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {  // upper
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 1e-12) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

std::vector<Halfspace> edges_to_halfspaces(const std::vector<Eigen::VectorXd>& hull) {
  std::vector<Halfspace> hs;
  const size_t n = hull.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& p = hull[i];
    const auto& q = hull[(i + 1) % n];
    Eigen::VectorXd normal(2);
    normal << q(1) - p(1), p(0) - q(0);  // outward for CCW hulls
    const double len = normal.norm();
    if (len < 1e-14) continue;
    normal /= len;
    hs.push_back(Halfspace::le(normal, -normal.dot(p)));
  }
  return hs;
}

void dedupe_points(std::vector<Eigen::VectorXd>& pts, double tol) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& p : pts) {
    bool dup = false;
    for (const auto& q : out)
      if ((p - q).lpNorm<Eigen::Infinity>() <= tol) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(p);
  }
  pts.swap(out);
}

// Vector orthogonal to the given unit columns (dim x (dim-1)), via cofactor
// expansion. Returns a zero vector when the columns are dependent.
Eigen::VectorXd orthogonal_complement(const Eigen::MatrixXd& cols) {
  const int d = static_cast<int>(cols.rows());
  Eigen::VectorXd n(d);
  if (d == 2) {
    n << -cols(1, 0), cols(0, 0);
    return n;
  }
  for (int i = 0; i < d; ++i) {
    Eigen::MatrixXd minor(d - 1, d - 1);
    int r = 0;
    for (int row = 0; row < d; ++row) {
      if (row == i) continue;
      minor.row(r++) = cols.row(row);
    }
    n(i) = ((i % 2) ? -1.0 : 1.0) * minor.determinant();
  }
  return n;
}

std::vector<std::vector<int>> combinations(int m, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

bool infeasible_by_qp(const std::vector<Halfspace>& hs, int dim) {
  qp::QpProblem p;
  p.n_vars = dim;
  p.H = Eigen::MatrixXd::Identity(dim, dim);
  p.g = Eigen::VectorXd::Zero(dim);
  p.A_ineq.resize(static_cast<int>(hs.size()), dim);
  p.b_ineq.resize(static_cast<int>(hs.size()));
  for (size_t i = 0; i < hs.size(); ++i) {
    const Halfspace h = hs[i].as_le();
    p.A_ineq.row(static_cast<int>(i)) = h.normal.transpose();
    p.b_ineq(static_cast<int>(i)) = -h.offset;
  }
  qp::QpSolver solver;
  return solver.solve(p).status == qp::SolveStatus::kInfeasible;
}

}  // namespace

// ---------------------------------------------------------------------------
// Halfspace

Halfspace Halfspace::le(Eigen::VectorXd n, double c) { return {std::move(n), c, Sense::LE}; }
Halfspace Halfspace::ge(Eigen::VectorXd n, double c) { return {std::move(n), c, Sense::GE}; }

Halfspace Halfspace::line2(double a, double b, double c, Sense s) {
  Eigen::VectorXd n(2);
  n << a, b;
  return {std::move(n), c, s};
}

bool Halfspace::contains(const Eigen::VectorXd& p, double tol) const {
  const double v = eval(p);
  return sense == Sense::LE ? v <= tol : v >= -tol;
}

Halfspace Halfspace::normalized() const {
  const double len = normal.norm();
  if (len < 1e-14) throw std::invalid_argument("halfspace normal is zero");
  return {normal / len, offset / len, sense};
}

Halfspace Halfspace::as_le() const {
  if (sense == Sense::LE) return *this;
  return {-normal, -offset, Sense::LE};
}

// ---------------------------------------------------------------------------
// Circle

std::vector<Eigen::Vector2d> intersect_line_circle(const Halfspace& line, const Circle& circle) {
  if (line.dim() != 2) throw std::invalid_argument("intersect_line_circle: 2D line required");
  const double a = line.a(), b = line.b(), c = line.c();
  const double nn = a * a + b * b;
  if (nn < 1e-28) throw std::invalid_argument("intersect_line_circle: degenerate line");
  // Foot of the perpendicular from the centre, then +/- half chord.
  const double v = (a * circle.center(0) + b * circle.center(1) + c) / nn;
  const Eigen::Vector2d foot = circle.center - v * Eigen::Vector2d(a, b);
  const double d2 = v * v * nn;
  const double r2 = circle.radius * circle.radius;
  std::vector<Eigen::Vector2d> out;
  if (d2 > r2 + kPointTol * std::max(1.0, r2)) return out;
  const double h2 = std::max(0.0, r2 - d2);
  const double h = std::sqrt(h2);
  if (h < kPointTol) {
    out.push_back(foot);
    return out;
  }
  const Eigen::Vector2d t = Eigen::Vector2d(-b, a) / std::sqrt(nn);
  out.push_back(foot + h * t);
  out.push_back(foot - h * t);
  return out;
}

// ---------------------------------------------------------------------------
// Zonotope

double Zonotope::support(const Eigen::VectorXd& dir) const {
  double s = dir.dot(center);
  for (int j = 0; j < generators.cols(); ++j) s += std::abs(dir.dot(generators.col(j)));
  return s;
}

Eigen::VectorXd Zonotope::vertex_toward(const Eigen::VectorXd& dir) const {
  Eigen::VectorXd v = center;
  for (int j = 0; j < generators.cols(); ++j) {
    const double d = dir.dot(generators.col(j));
    v += (d >= 0 ? 1.0 : -1.0) * generators.col(j);
  }
  return v;
}

std::vector<Halfspace> zonotope_facets(const Zonotope& z, bool parallel) {
  const int d = z.dim();
  if (d > 4) throw std::invalid_argument("zonotope_facets: dimension > 4 unsupported");
  // Direction-only: normalize generator columns, drop near-zero ones.
  // Deduplicate generator *directions*: parallel generators contribute the
  // same facet normals, and the support offsets below are computed from the
  // full generator matrix either way.
  std::vector<Eigen::VectorXd> gd;
  {
    std::set<std::array<long long, 4>> seen;
    for (int j = 0; j < z.generators.cols(); ++j) {
      const double n = z.generators.col(j).norm();
      if (n <= 1e-13) continue;
      Eigen::VectorXd u = z.generators.col(j) / n;
      for (int k = 0; k < d; ++k) {
        if (std::abs(u(k)) > 1e-12) {
          if (u(k) < 0) u = -u;
          break;
        }
      }
      std::array<long long, 4> key{0, 0, 0, 0};
      for (int k = 0; k < d; ++k) key[static_cast<size_t>(k)] = std::llround(u(k) * 1e9);
      if (seen.insert(key).second) gd.push_back(std::move(u));
    }
  }
  const int m = static_cast<int>(gd.size());
  if (m < d) throw std::invalid_argument("zonotope_facets: set is not full-dimensional");
  if (m > 1500) throw std::runtime_error("zonotope_facets: generator count too large");

  // Streamed enumeration of (d-1)-subsets with early hash-deduplication of
  // the resulting normals. The representative per quantised key is the
  // lexicographically smallest normal, so serial and parallel builds agree.
  using Key = std::array<long long, 4>;
  struct KeyHash {
    size_t operator()(const Key& k) const {
      size_t h = 1469598103934665603ull;
      for (long long v : k) h = (h ^ static_cast<size_t>(v)) * 1099511628211ull;
      return h;
    }
  };
  using NormalMap = std::unordered_map<Key, Eigen::VectorXd, KeyHash>;
  const auto lex_less = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (int k = 0; k < a.size(); ++k) {
      if (a(k) != b(k)) return a(k) < b(k);
    }
    return false;
  };
  const auto subsets_from = [&](int i, NormalMap& out) {
    Eigen::MatrixXd cols(d, d - 1);
    const auto emit = [&](const Eigen::MatrixXd& c) {
      Eigen::VectorXd n = orthogonal_complement(c);
      const double len = n.norm();
      if (len < 1e-10) return;
      n /= len;
      for (int k = 0; k < d; ++k) {  // canonical sign so duplicates collapse
        if (std::abs(n(k)) > 1e-12) {
          if (n(k) < 0) n = -n;
          break;
        }
      }
      Key key{0, 0, 0, 0};
      for (int k = 0; k < d; ++k) key[static_cast<size_t>(k)] = std::llround(n(k) * 1e7);
      auto [it, fresh] = out.try_emplace(key, n);
      if (!fresh && lex_less(n, it->second)) it->second = n;
    };
    if (d == 2) {
      cols.col(0) = gd[i];
      emit(cols);
      return;
    }
    if (d == 3) {
      for (int j = i + 1; j < m; ++j) {
        cols.col(0) = gd[i];
        cols.col(1) = gd[j];
        emit(cols);
      }
      return;
    }
    for (int j = i + 1; j < m; ++j) {
      for (int k = j + 1; k < m; ++k) {
        cols.col(0) = gd[i];
        cols.col(1) = gd[j];
        cols.col(2) = gd[k];
        emit(cols);
      }
    }
  };
  NormalMap merged;
  if (parallel) {
    std::vector<NormalMap> locals;
#pragma omp parallel
    {
#pragma omp single
      locals.resize(static_cast<size_t>(omp_get_num_threads()));
      auto& mine = locals[static_cast<size_t>(omp_get_thread_num())];
#pragma omp for schedule(dynamic, 4)
      for (int i = 0; i < m; ++i) subsets_from(i, mine);
    }
    for (auto& l : locals) {
      for (auto& [key, n] : l) {
        auto [it, fresh] = merged.try_emplace(key, n);
        if (!fresh && lex_less(n, it->second)) it->second = n;
      }
    }
  } else {
    for (int i = 0; i < m; ++i) subsets_from(i, merged);
  }
  std::vector<Eigen::VectorXd> uniq;
  uniq.reserve(merged.size());
  for (auto& [key, n] : merged) uniq.push_back(std::move(n));
  std::sort(uniq.begin(), uniq.end(), lex_less);

  std::vector<Halfspace> hs;
  hs.reserve(2 * uniq.size());
  for (const auto& n : uniq) {
    hs.push_back(Halfspace::le(n, -z.support(n)));
    hs.push_back(Halfspace::le(-n, -z.support(-n)));
  }
  return hs;
}

// ---------------------------------------------------------------------------
// Polytope

Polytope Polytope::empty(int dim) {
  Polytope p;
  p.dim_ = dim;
  p.empty_ = true;
  return p;
}

Polytope Polytope::point(const Eigen::VectorXd& p) { return box(p, p); }

Polytope Polytope::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int d = static_cast<int>(lo.size());
  if (hi.size() != d) throw std::invalid_argument("box: bound dimensions differ");
  for (int i = 0; i < d; ++i)
    if (lo(i) > hi(i)) return empty(d);
  Polytope p;
  p.dim_ = d;
  p.box_lo_ = lo;
  p.box_hi_ = hi;
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    e(i) = 1.0;
    p.halfspaces_.push_back(Halfspace::le(e, -hi(i)));
    p.halfspaces_.push_back(Halfspace::le(-e, lo(i)));
  }
  if (d <= 12) {
    std::vector<Eigen::VectorXd> corners;
    corners.reserve(size_t{1} << d);
    for (size_t mask = 0; mask < (size_t{1} << d); ++mask) {
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = (mask >> i) & 1 ? hi(i) : lo(i);
      corners.push_back(std::move(v));
    }
    dedupe_points(corners, 0.0);
    if (d == 2 && corners.size() >= 3) corners = hull2d(corners);
    p.vertices_ = std::move(corners);
  }
  Zonotope z;
  z.center = (lo + hi) / 2.0;
  std::vector<int> nz;
  for (int i = 0; i < d; ++i)
    if (hi(i) - lo(i) > 0) nz.push_back(i);
  z.generators = Eigen::MatrixXd::Zero(d, static_cast<int>(nz.size()));
  for (size_t j = 0; j < nz.size(); ++j) z.generators(nz[j], static_cast<int>(j)) = (hi(nz[j]) - lo(nz[j])) / 2.0;
  p.zono_ = std::move(z);
  return p;
}

Polytope Polytope::from_vertices(std::vector<Eigen::VectorXd> verts) {
  if (verts.empty()) throw std::invalid_argument("from_vertices: no vertices");
  const int d = static_cast<int>(verts.front().size());
  for (const auto& v : verts)
    if (v.size() != d) throw std::invalid_argument("from_vertices: mixed dimensions");
  dedupe_points(verts, kPointTol);
  if (verts.size() == 1) return point(verts.front());
  Polytope p;
  p.dim_ = d;
  if (d == 1) {
    double lo = verts[0](0), hi = verts[0](0);
    for (const auto& v : verts) {
      lo = std::min(lo, v(0));
      hi = std::max(hi, v(0));
    }
    Eigen::VectorXd l(1), h(1);
    l << lo;
    h << hi;
    return box(l, h);
  }
  if (d == 2) {
    auto hull = hull2d(verts);
    if (hull.size() >= 3) p.halfspaces_ = edges_to_halfspaces(hull);
    p.vertices_ = std::move(hull);
    return p;
  }
  p.vertices_ = std::move(verts);  // >=3D: stored as generators of the hull
  return p;
}

Polytope Polytope::from_halfspaces(std::vector<Halfspace> hs) {
  if (hs.empty()) throw std::invalid_argument("from_halfspaces: no halfspaces");
  const int d = hs.front().dim();
  std::vector<Halfspace> norm;
  norm.reserve(hs.size());
  for (const auto& h : hs) {
    if (h.dim() != d) throw std::invalid_argument("from_halfspaces: mixed dimensions");
    norm.push_back(h.as_le().normalized());
  }

  // Axis-aligned systems become boxes so downstream algebra stays exact.
  bool axis = true;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, -kUnbounded);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(d, kUnbounded);
  for (const auto& h : norm) {
    int k = -1;
    for (int i = 0; i < d; ++i) {
      if (std::abs(std::abs(h.normal(i)) - 1.0) < 1e-12) k = i;
      else if (std::abs(h.normal(i)) > 1e-12) k = -2;
    }
    if (k < 0) {
      axis = false;
      break;
    }
    if (h.normal(k) > 0) hi(k) = std::min(hi(k), -h.offset);
    else lo(k) = std::max(lo(k), h.offset);
  }
  if (axis && lo.minCoeff() > -kUnbounded / 2 && hi.maxCoeff() < kUnbounded / 2)
    return box(lo, hi);

  Polytope p;
  p.dim_ = d;
  p.halfspaces_ = std::move(norm);
  if (d == 2) {
    std::vector<Eigen::VectorXd> verts;
    const auto& H = p.halfspaces_;
    for (size_t i = 0; i < H.size(); ++i) {
      for (size_t j = i + 1; j < H.size(); ++j) {
        Eigen::Matrix2d A;
        A << H[i].normal(0), H[i].normal(1), H[j].normal(0), H[j].normal(1);
        if (std::abs(A.determinant()) < 1e-12) continue;
        Eigen::Vector2d rhs(-H[i].offset, -H[j].offset);
        Eigen::Vector2d x = A.partialPivLu().solve(rhs);
        bool ok = true;
        for (const auto& h : H)
          if (h.eval(x) > 1e-7) {
            ok = false;
            break;
          }
        if (ok) verts.emplace_back(x);
      }
    }
    dedupe_points(verts, kPointTol);
    if (verts.empty()) return empty(2);
    if (verts.size() >= 3) verts = hull2d(verts);
    p.vertices_ = std::move(verts);
    return p;
  }
  if (infeasible_by_qp(p.halfspaces_, d)) return empty(d);
  return p;
}

Polytope Polytope::from_zonotope(Zonotope z, bool parallel_facets) {
  const int d = z.dim();
  // Drop negligible generators.
  std::vector<int> keep;
  for (int j = 0; j < z.generators.cols(); ++j)
    if (z.generators.col(j).norm() > 1e-13) keep.push_back(j);
  Eigen::MatrixXd G(d, static_cast<int>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) G.col(static_cast<int>(j)) = z.generators.col(keep[j]);
  z.generators = std::move(G);
  if (z.generators.cols() == 0) return point(z.center);

  Polytope p;
  p.dim_ = d;
  p.halfspaces_ = zonotope_facets(z, parallel_facets);
  p.zono_ = std::move(z);
  return p;
}

const std::vector<Halfspace>& Polytope::halfspaces() const {
  if (empty_ || halfspaces_.empty())
    throw std::runtime_error("polytope has no halfspace representation");
  return halfspaces_;
}

const std::vector<Eigen::VectorXd>& Polytope::vertices() const {
  if (empty_ || vertices_.empty()) throw std::runtime_error("polytope has no vertex representation");
  return vertices_;
}

const Zonotope& Polytope::zonotope() const {
  if (!zono_) throw std::runtime_error("polytope has no zonotope representation");
  return *zono_;
}

const Eigen::VectorXd& Polytope::box_lo() const {
  if (!box_lo_) throw std::runtime_error("polytope is not a box");
  return *box_lo_;
}

const Eigen::VectorXd& Polytope::box_hi() const {
  if (!box_hi_) throw std::runtime_error("polytope is not a box");
  return *box_hi_;
}

bool Polytope::contains(const Eigen::VectorXd& p, double tol) const {
  if (empty_) return false;
  if (box_lo_) {
    for (int i = 0; i < dim_; ++i)
      if (p(i) < (*box_lo_)(i) - tol || p(i) > (*box_hi_)(i) + tol) return false;
    return true;
  }
  if (!halfspaces_.empty()) {
    for (const auto& h : halfspaces_)
      if (h.eval(p) > tol) return false;
    return true;
  }
  throw std::runtime_error("polytope membership requires halfspaces");
}

double Polytope::support(const Eigen::VectorXd& dir) const {
  if (empty_) throw std::runtime_error("support of empty polytope");
  if (zono_) return zono_->support(dir);
  if (!vertices_.empty()) {
    double s = -kUnbounded;
    for (const auto& v : vertices_) s = std::max(s, dir.dot(v));
    return s;
  }
  throw std::runtime_error("support requires vertices or generators");
}

std::vector<Eigen::VectorXd> Polytope::sample_vertices(int count, unsigned seed) const {
  if (empty_) return {};
  if (!vertices_.empty() && !zono_) return vertices_;
  if (box_lo_) return vertices_;
  std::vector<Eigen::VectorXd> out;
  if (zono_) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < count; ++i) {
      Eigen::VectorXd dir(dim_);
      for (int k = 0; k < dim_; ++k) dir(k) = gauss(rng);
      out.push_back(zono_->vertex_toward(dir));
    }
    dedupe_points(out, kPointTol);
    return out;
  }
  return vertices_;
}

Polytope Polytope::scaled(double factor) const {
  if (factor <= 0) throw std::invalid_argument("scaled: factor must be positive");
  if (empty_) return *this;
  Polytope p;
  p.dim_ = dim_;
  if (box_lo_) return box(factor * (*box_lo_), factor * (*box_hi_));
  for (const auto& h : halfspaces_) p.halfspaces_.push_back({h.normal, factor * h.offset, h.sense});
  for (const auto& v : vertices_) p.vertices_.push_back(factor * v);
  if (zono_) p.zono_ = Zonotope{factor * zono_->center, factor * zono_->generators};
  return p;
}

// ---------------------------------------------------------------------------
// Set algebra

Polytope minkowski_sum(const Polytope& p, const Polytope& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("minkowski_sum: dimension mismatch");
  if (p.is_empty() || q.is_empty()) return Polytope::empty(p.dim());
  if (p.is_box() && q.is_box())
    return Polytope::box(p.box_lo() + q.box_lo(), p.box_hi() + q.box_hi());
  std::vector<Eigen::VectorXd> sums;
  sums.reserve(p.vertices().size() * q.vertices().size());
  for (const auto& a : p.vertices())
    for (const auto& b : q.vertices()) sums.push_back(a + b);
  return Polytope::from_vertices(std::move(sums));
}

Polytope pontryagin_diff(const Polytope& p, const Polytope& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("pontryagin_diff: dimension mismatch");
  if (p.is_empty()) return Polytope::empty(p.dim());
  std::vector<Halfspace> tightened;
  for (const auto& h : p.halfspaces()) {
    // n.x <= b shrinks to n.x <= b - h_q(n).
    tightened.push_back(Halfspace::le(h.normal, h.offset + q.support(h.normal)));
  }
  return Polytope::from_halfspaces(std::move(tightened));
}

Polytope linear_map(const Eigen::MatrixXd& M, const Polytope& p) {
  if (M.cols() != p.dim()) throw std::invalid_argument("linear_map: dimension mismatch");
  const int out_dim = static_cast<int>(M.rows());
  if (p.is_empty()) return Polytope::empty(out_dim);
  if (p.is_box() && M.rows() == M.cols() && M.isDiagonal(1e-14)) {
    Eigen::VectorXd lo(out_dim), hi(out_dim);
    for (int i = 0; i < out_dim; ++i) {
      const double a = M(i, i) * p.box_lo()(i), b = M(i, i) * p.box_hi()(i);
      lo(i) = std::min(a, b);
      hi(i) = std::max(a, b);
    }
    return Polytope::box(lo, hi);
  }
  if (p.has_zonotope() && out_dim <= 4) {
    const Zonotope& z = p.zonotope();
    return Polytope::from_zonotope({M * z.center, M * z.generators});
  }
  std::vector<Eigen::VectorXd> verts;
  verts.reserve(p.vertices().size());
  for (const auto& v : p.vertices()) verts.push_back(M * v);
  return Polytope::from_vertices(std::move(verts));
}

double support(const Polytope& p, const Eigen::VectorXd& dir) { return p.support(dir); }

// ---------------------------------------------------------------------------
// Minimal robust positively invariant set (outer approximation)

Polytope compute_mrpi(const Eigen::MatrixXd& A_k, const Polytope& W, double eps, int s_cap,
                      MrpiInfo* info) {
  const int d = static_cast<int>(A_k.rows());
  if (A_k.cols() != d || W.dim() != d) throw std::invalid_argument("compute_mrpi: dimension mismatch");
  const double rho = Eigen::EigenSolver<Eigen::MatrixXd>(A_k).eigenvalues().cwiseAbs().maxCoeff();
  if (rho >= 1.0 - 1e-9) {
    std::ostringstream os;
    os << "compute_mrpi: A_k is not Schur stable (spectral radius " << rho << ")";
    throw std::invalid_argument(os.str());
  }
  if (!W.has_zonotope())
    throw std::invalid_argument("compute_mrpi: W must be a box (or zonotope)");
  const Zonotope& wz = W.zonotope();
  const double wscale = std::max(wz.center.lpNorm<Eigen::Infinity>(),
                                 wz.generators.size() ? wz.generators.cwiseAbs().maxCoeff() : 0.0);
  if (wscale < 1e-15) return Polytope::point(Eigen::VectorXd::Zero(d));  // W = {0}

  const auto& w_facets = W.halfspaces();
  const double alpha_target = eps / (1.0 + eps);
  const double ztol = 1e-12 * std::max(1.0, wscale);

  Eigen::MatrixXd A_pow = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd f_center = Eigen::VectorXd::Zero(d);
  std::vector<Eigen::MatrixXd> terms;
  int s = 0;
  double alpha = std::numeric_limits<double>::infinity();
  while (s < s_cap) {
    terms.push_back(A_pow * wz.generators);
    f_center += A_pow * wz.center;
    A_pow = A_k * A_pow;  // now A_k^{s+1}
    ++s;
    // Smallest alpha with A_k^s W inside alpha*W, via support ratios over
    // the facets of W.
    alpha = 0.0;
    bool feasible = true;
    for (const auto& h : w_facets) {
      const double b = -h.offset;  // n.x <= b
      Eigen::VectorXd nt = A_pow.transpose() * h.normal;
      double sup = nt.dot(wz.center);
      for (int j = 0; j < wz.generators.cols(); ++j) sup += std::abs(nt.dot(wz.generators.col(j)));
      if (b <= ztol) {
        if (sup > ztol) {
          feasible = false;
          break;
        }
      } else {
        alpha = std::max(alpha, sup / b);
      }
    }
    if (feasible && alpha <= alpha_target) break;
    if (s == s_cap) {
      std::ostringstream os;
      os << "compute_mrpi: no contraction after s=" << s_cap << " terms (alpha=" << alpha
         << ", spectral radius " << rho
         << "); W may be flat in a direction A_k mixes -- inflate W first";
      throw std::runtime_error(os.str());
    }
  }
  if (info) *info = {s, alpha};
  if (alpha == 0.0 && s == 1) return W;  // A_k W = {0}: W itself is invariant

  Eigen::MatrixXd gens(d, static_cast<int>(terms.size()) * wz.generators.cols());
  for (size_t i = 0; i < terms.size(); ++i)
    gens.middleCols(static_cast<int>(i) * wz.generators.cols(), wz.generators.cols()) = terms[i];
  const double inflation = 1.0 / (1.0 - alpha);
  Zonotope zz{inflation * f_center, inflation * gens};
  Polytope Z = Polytope::from_zonotope(std::move(zz), /*parallel_facets=*/true);

  // Invariance certificate: support of A_k Z (+) W within every facet of Z.
  const Zonotope& z = Z.zonotope();
  for (const auto& h : Z.halfspaces()) {
    const double lhs = z.support(A_k.transpose() * h.normal) + wz.support(h.normal);
    const double rhs = -h.offset;
    if (lhs > rhs + kContainTol * std::max(1.0, std::abs(rhs)))
      throw std::runtime_error("compute_mrpi: invariance certificate failed");
  }
  return Z;
}

}  // namespace evasion::geom
