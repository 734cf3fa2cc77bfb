#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>

namespace evasion::qp {

/// Dense convex QP
///   min 0.5 z'Hz + g'z   s.t.  A_ineq z <= b_ineq,  A_eq z = b_eq
/// H symmetric positive semidefinite.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_ineq;  // may have zero rows
  Eigen::VectorXd b_ineq;
  Eigen::MatrixXd A_eq;  // may have zero rows
  Eigen::VectorXd b_eq;
  int n_vars = 0;
  int n_steps = 0;  // horizon length when assembled from an MPC, else 0

  void validate() const;  // throws std::invalid_argument on bad shapes / non-PSD H
};

enum class SolveStatus { kOptimal, kInfeasible, kMaxIter };

struct QpSolution {
  Eigen::VectorXd z;
  SolveStatus status = SolveStatus::kMaxIter;
  double objective = 0.0;
  double kkt_residual = 0.0;  // max of stationarity, feasibility, complementarity
  int iterations = 0;
  Eigen::VectorXd dual;                       // multipliers, eq rows then ineq rows
  Eigen::VectorXd infeasibility_certificate;  // Farkas direction when kInfeasible
};

struct SolverSettings {
  double rho = 0.1;          // ADMM penalty (inequalities)
  double rho_eq_scale = 1e3; // equality rows run at rho * this
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  double eps_abs = 1e-9;
  double eps_rel = 1e-9;
  int max_iter = 4000;
  int check_interval = 20;
  bool adaptive_rho = true;
  bool polish = true;
  double kkt_tol = 1e-6;   // OPTIMAL requires kkt_residual below this
  double feas_tol = 1e-7;  // and constraint violation below this
};

/// Operator-splitting solver with an active-set polish step. Deterministic:
/// identical inputs (and warm starts) give identical outputs.
class QpSolver {
 public:
  QpSolver() = default;
  explicit QpSolver(SolverSettings s) : settings_(s) {}

  QpSolution solve(const QpProblem& p) const;
  QpSolution solve(const QpProblem& p, const Eigen::VectorXd& warm_z,
                   const Eigen::VectorXd& warm_dual) const;

  const SolverSettings& settings() const { return settings_; }

 private:
  SolverSettings settings_;
};

/// Plain-text dump (dimensions then row-major matrices) for offline checks.
void dump(const QpProblem& p, std::ostream& os);

}  // namespace evasion::qp
