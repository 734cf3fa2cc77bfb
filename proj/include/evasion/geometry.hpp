#pragma once

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

namespace evasion::geom {

// Centralised numeric tolerances.
inline constexpr double kPointTol = 1e-9;    // point membership, absolute
inline constexpr double kContainTol = 1e-6;  // set containment, relative
inline constexpr double kUnbounded = 1e30;   // stands in for +/- infinity

/// Closed halfspace normal·p + offset {<=,>=} 0 in arbitrary dimension.
/// In 2D this is the line a*x + b*y + c = 0 together with a side.
struct Halfspace {
  enum class Sense { LE, GE };

  Eigen::VectorXd normal;
  double offset = 0.0;
  Sense sense = Sense::LE;

  static Halfspace le(Eigen::VectorXd n, double c);
  static Halfspace ge(Eigen::VectorXd n, double c);
  static Halfspace line2(double a, double b, double c, Sense s = Sense::LE);

  double a() const { return normal(0); }
  double b() const { return normal(1); }
  double c() const { return offset; }
  int dim() const { return static_cast<int>(normal.size()); }

  // Signed evaluation normal·p + offset, independent of sense.
  double eval(const Eigen::VectorXd& p) const { return normal.dot(p) + offset; }
  bool contains(const Eigen::VectorXd& p, double tol = kPointTol) const;

  Halfspace normalized() const;  // unit normal, same set
  Halfspace as_le() const;       // flipped so sense is LE
};

/// Circle in the plane, radius strictly positive.
struct Circle {
  Eigen::Vector2d center;
  double radius;
};

/// All real intersection points of the boundary line of `line` with `circle`.
/// Returns 0, 1 (tangency) or 2 points.
std::vector<Eigen::Vector2d> intersect_line_circle(const Halfspace& line, const Circle& circle);

/// Centrally generated set {center + G*t : t in [-1,1]^m}. Closed under
/// linear maps and Minkowski sums, which is what the invariant-set
/// computation needs; support functions are exact and cheap.
struct Zonotope {
  Eigen::VectorXd center;
  Eigen::MatrixXd generators;  // one generator per column

  int dim() const { return static_cast<int>(center.size()); }
  double support(const Eigen::VectorXd& dir) const;
  // An extreme point of the set in direction `dir` (a vertex for generic dir).
  Eigen::VectorXd vertex_toward(const Eigen::VectorXd& dir) const;
};

/// Exact H-representation of a zonotope in dimension <= 4. Facet normals are
/// orthogonal complements of (dim-1)-subsets of generators. `parallel` runs
/// the subset enumeration under OpenMP; results are identical to the serial
/// reference (verified in tests).
std::vector<Halfspace> zonotope_facets(const Zonotope& z, bool parallel = false);

/// Convex polytope with whichever of the three representations is known:
/// halfspaces (H-rep), vertices (V-rep), generators (zonotope). Axis-aligned
/// boxes keep their bounds so conversions stay exact. Instances are immutable
/// after construction and safe to read concurrently.
class Polytope {
 public:
  Polytope() = default;

  static Polytope from_halfspaces(std::vector<Halfspace> hs);
  static Polytope from_vertices(std::vector<Eigen::VectorXd> verts);
  static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
  static Polytope from_zonotope(Zonotope z, bool parallel_facets = false);
  static Polytope point(const Eigen::VectorXd& p);
  static Polytope empty(int dim);

  int dim() const { return dim_; }
  bool is_empty() const { return empty_; }
  bool is_box() const { return box_lo_.has_value(); }

  bool has_halfspaces() const { return !halfspaces_.empty(); }
  bool has_vertices() const { return !vertices_.empty(); }
  bool has_zonotope() const { return zono_.has_value(); }

  const std::vector<Halfspace>& halfspaces() const;
  const std::vector<Eigen::VectorXd>& vertices() const;
  const Zonotope& zonotope() const;
  const Eigen::VectorXd& box_lo() const;
  const Eigen::VectorXd& box_hi() const;

  bool contains(const Eigen::VectorXd& p, double tol = kPointTol) const;
  double support(const Eigen::VectorXd& dir) const;

  /// Exact vertices reached by deterministic random direction sampling
  /// (duplicates removed). For boxes and 2D polytopes this is typically the
  /// full vertex set; for higher-dimensional zonotopes it is a sample.
  std::vector<Eigen::VectorXd> sample_vertices(int count, unsigned seed) const;

  Polytope scaled(double factor) const;  // about the origin

 private:
  int dim_ = 0;
  bool empty_ = false;
  std::vector<Halfspace> halfspaces_;      // normalized, sense LE
  std::vector<Eigen::VectorXd> vertices_;  // hull-reduced in 2D
  std::optional<Zonotope> zono_;
  std::optional<Eigen::VectorXd> box_lo_, box_hi_;

  friend Polytope minkowski_sum(const Polytope&, const Polytope&);
  friend Polytope pontryagin_diff(const Polytope&, const Polytope&);
  friend Polytope linear_map(const Eigen::MatrixXd&, const Polytope&);
};

/// p (+) q: vertex sums, hull-reduced where exact reduction is available.
Polytope minkowski_sum(const Polytope& p, const Polytope& q);

/// p (-) q: every halfspace offset of p tightened by the support of q in the
/// facet normal direction. Returns an explicit empty polytope when the
/// tightened system is infeasible.
Polytope pontryagin_diff(const Polytope& p, const Polytope& q);

/// Image {M x : x in p}.
Polytope linear_map(const Eigen::MatrixXd& M, const Polytope& p);

/// Support function max_{x in p} dir·x.
double support(const Polytope& p, const Eigen::VectorXd& dir);

struct MrpiInfo {
  int s = 0;         // number of Minkowski terms
  double alpha = 0;  // contraction ratio at termination
};

/// Outer approximation of the minimal robust positively invariant set of
/// e+ = A_k e + w, w in W: smallest s with A_k^s W inside alpha*W and
/// Z = (1-alpha)^-1 (W (+) A_k W (+) ... (+) A_k^{s-1} W).
/// Requires rho(A_k) < 1 and W a bounded box with the origin inside (flat
/// box dimensions are only accepted when A_k keeps them flat; otherwise the
/// caller must inflate W first). The returned set carries both the exact
/// zonotope and its facet H-rep, and satisfies A_k Z (+) W subset Z, which
/// is re-verified here by support-function comparison over all facets.
Polytope compute_mrpi(const Eigen::MatrixXd& A_k, const Polytope& W, double eps = 1e-2,
                      int s_cap = 200, MrpiInfo* info = nullptr);

}  // namespace evasion::geom
