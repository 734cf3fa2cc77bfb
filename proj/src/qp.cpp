#include "evasion/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace evasion::qp {

namespace {

constexpr double kInf = 1e30;

struct Stacked {
  Eigen::MatrixXd C;     // [A_eq; A_ineq]
  Eigen::VectorXd l, u;  // per-row bounds, l = u on equality rows
  int m_eq = 0;
  int m = 0;
};

Stacked stack(const QpProblem& p) {
  Stacked s;
  s.m_eq = static_cast<int>(p.A_eq.rows());
  const int m_in = static_cast<int>(p.A_ineq.rows());
  s.m = s.m_eq + m_in;
  s.C.resize(s.m, p.n_vars);
  s.l.resize(s.m);
  s.u.resize(s.m);
  if (s.m_eq > 0) {
    s.C.topRows(s.m_eq) = p.A_eq;
    s.l.head(s.m_eq) = p.b_eq;
    s.u.head(s.m_eq) = p.b_eq;
  }
  if (m_in > 0) {
    s.C.bottomRows(m_in) = p.A_ineq;
    s.l.tail(m_in).setConstant(-kInf);
    s.u.tail(m_in) = p.b_ineq;
  }
  return s;
}

struct KktReport {
  double violation = 0;  // primal feasibility
  double residual = 0;   // max(stationarity, violation, dual feas, complementarity)
};

KktReport kkt_report(const QpProblem& p, const Eigen::VectorXd& z, const Eigen::VectorXd& dual) {
  KktReport r;
  Eigen::VectorXd stat = p.H * z + p.g;
  if (p.A_eq.rows() > 0) {
    stat += p.A_eq.transpose() * dual.head(p.A_eq.rows());
    r.violation = (p.A_eq * z - p.b_eq).lpNorm<Eigen::Infinity>();
  }
  double dual_feas = 0, comp = 0;
  if (p.A_ineq.rows() > 0) {
    const auto y = dual.tail(p.A_ineq.rows());
    stat += p.A_ineq.transpose() * y;
    const Eigen::VectorXd slack = p.b_ineq - p.A_ineq * z;
    r.violation = std::max(r.violation, std::max(0.0, -slack.minCoeff()));
    dual_feas = std::max(0.0, -y.minCoeff());
    comp = y.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  r.residual = std::max({stat.lpNorm<Eigen::Infinity>(), r.violation, dual_feas, comp});
  return r;
}

// Equality-constrained solve on the current active set, with iterative
// refinement against the unregularised KKT system.
bool polish(const QpProblem& p, const Stacked& s, const SolverSettings& cfg, Eigen::VectorXd& z,
            Eigen::VectorXd& dual) {
  const int n = p.n_vars;
  std::vector<char> active(s.m, 0);
  for (int i = 0; i < s.m_eq; ++i) active[i] = 1;
  const double act_tol = 1e-7;
  for (int i = s.m_eq; i < s.m; ++i) {
    const double slack = s.u(i) - s.C.row(i).dot(z);
    if (slack < act_tol || dual(i) > act_tol) active[i] = 1;
  }

  for (int round = 0; round < 6; ++round) {
    std::vector<int> idx;
    for (int i = 0; i < s.m; ++i)
      if (active[i]) idx.push_back(i);
    const int ma = static_cast<int>(idx.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + ma, n + ma);
    K.topLeftCorner(n, n) = p.H;
    for (int j = 0; j < ma; ++j) {
      K.block(0, n + j, n, 1) = s.C.row(idx[j]).transpose();
      K.block(n + j, 0, 1, n) = s.C.row(idx[j]);
    }
    Eigen::MatrixXd Kreg = K;
    const double delta = 1e-9;
    Kreg.topLeftCorner(n, n) += delta * Eigen::MatrixXd::Identity(n, n);
    Kreg.bottomRightCorner(ma, ma) -= delta * Eigen::MatrixXd::Identity(ma, ma);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kreg);
    Eigen::VectorXd rhs(n + ma);
    rhs.head(n) = -p.g;
    for (int j = 0; j < ma; ++j) rhs(n + j) = s.u(idx[j]);
    Eigen::VectorXd w = lu.solve(rhs);
    for (int it = 0; it < 3; ++it) w += lu.solve(rhs - K * w);

    Eigen::VectorXd z_new = w.head(n);
    Eigen::VectorXd dual_new = Eigen::VectorXd::Zero(s.m);
    for (int j = 0; j < ma; ++j) dual_new(idx[j]) = w(n + j);

    bool changed = false;
    for (int j = 0; j < ma; ++j) {  // drop inequality rows with negative duals
      if (idx[j] >= s.m_eq && dual_new(idx[j]) < -act_tol) {
        active[idx[j]] = 0;
        changed = true;
      }
    }
    for (int i = s.m_eq; i < s.m; ++i) {  // add violated rows
      if (!active[i] && s.C.row(i).dot(z_new) > s.u(i) + cfg.feas_tol) {
        active[i] = 1;
        changed = true;
      }
    }
    if (!changed) {
      z = z_new;
      dual = dual_new;
      return true;
    }
  }
  return false;
}

}  // namespace

void QpProblem::validate() const {
  if (H.rows() != n_vars || H.cols() != n_vars || g.size() != n_vars)
    throw std::invalid_argument("qp: cost dimensions inconsistent");
  if (A_ineq.rows() != b_ineq.size() || (A_ineq.rows() > 0 && A_ineq.cols() != n_vars))
    throw std::invalid_argument("qp: inequality dimensions inconsistent");
  if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n_vars))
    throw std::invalid_argument("qp: equality dimensions inconsistent");
  if (!H.isApprox(H.transpose(), 1e-9)) throw std::invalid_argument("qp: H not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()))
    throw std::invalid_argument("qp: H not positive semidefinite");
}

QpSolution QpSolver::solve(const QpProblem& p) const {
  return solve(p, Eigen::VectorXd::Zero(p.n_vars), Eigen::VectorXd());
}

QpSolution QpSolver::solve(const QpProblem& p, const Eigen::VectorXd& warm_z,
                           const Eigen::VectorXd& warm_dual) const {
  p.validate();
  const SolverSettings& cfg = settings_;
  const Stacked s = stack(p);
  const int n = p.n_vars, m = s.m;

  QpSolution sol;
  if (m == 0 && n == 0) {
    sol.status = SolveStatus::kOptimal;
    return sol;
  }

  Eigen::VectorXd x = warm_z.size() == n ? warm_z : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd zc(m), y(m);
  if (m > 0) {
    zc = (s.C * x).cwiseMax(s.l).cwiseMin(s.u);
    y = warm_dual.size() == m ? warm_dual : Eigen::VectorXd::Zero(m);
  }

  double rho = cfg.rho;
  Eigen::VectorXd rho_vec(m);
  auto fill_rho = [&] {
    for (int i = 0; i < m; ++i) rho_vec(i) = i < s.m_eq ? rho * cfg.rho_eq_scale : rho;
  };
  Eigen::LLT<Eigen::MatrixXd> llt;
  auto factorize = [&] {
    fill_rho();
    Eigen::MatrixXd M = p.H + cfg.sigma * Eigen::MatrixXd::Identity(n, n);
    if (m > 0) M += s.C.transpose() * rho_vec.asDiagonal() * s.C;
    llt.compute(M);
  };
  factorize();

  int it = 0;
  for (it = 1; it <= cfg.max_iter; ++it) {
    Eigen::VectorXd rhs = cfg.sigma * x - p.g;
    if (m > 0) rhs += s.C.transpose() * (rho_vec.cwiseProduct(zc) - y);
    const Eigen::VectorXd x_tilde = llt.solve(rhs);
    const Eigen::VectorXd x_next = cfg.alpha * x_tilde + (1 - cfg.alpha) * x;
    Eigen::VectorXd y_prev = y;
    if (m > 0) {
      const Eigen::VectorXd cz = s.C * x_tilde;
      const Eigen::VectorXd v = cfg.alpha * cz + (1 - cfg.alpha) * zc + y.cwiseQuotient(rho_vec);
      const Eigen::VectorXd z_next = v.cwiseMax(s.l).cwiseMin(s.u);
      y = y + rho_vec.cwiseProduct(v - z_next - y.cwiseQuotient(rho_vec));
      zc = z_next;
    }
    x = x_next;

    if (it % cfg.check_interval != 0 && it != cfg.max_iter) continue;

    double r_prim = 0, r_dual = 0, prim_scale = 1, dual_scale = 1;
    Eigen::VectorXd cx;
    if (m > 0) {
      cx = s.C * x;
      r_prim = (cx - zc).lpNorm<Eigen::Infinity>();
      prim_scale = std::max({cx.lpNorm<Eigen::Infinity>(), zc.lpNorm<Eigen::Infinity>(), 1e-12});
    }
    Eigen::VectorXd grad = p.H * x + p.g;
    if (m > 0) grad += s.C.transpose() * y;
    r_dual = grad.lpNorm<Eigen::Infinity>();
    dual_scale = std::max({(p.H * x).lpNorm<Eigen::Infinity>(), p.g.lpNorm<Eigen::Infinity>(),
                           m > 0 ? (s.C.transpose() * y).lpNorm<Eigen::Infinity>() : 0.0, 1e-12});

    if (r_prim <= cfg.eps_abs + cfg.eps_rel * prim_scale &&
        r_dual <= cfg.eps_abs + cfg.eps_rel * dual_scale)
      break;

    // Primal infeasibility certificate from the dual update direction.
    if (m > 0) {
      const Eigen::VectorXd dy = y - y_prev;
      const double dy_norm = dy.lpNorm<Eigen::Infinity>();
      if (dy_norm > 1e-12) {
        const double eps_pinf = 1e-7 * dy_norm;
        bool cert = (s.C.transpose() * dy).lpNorm<Eigen::Infinity>() <= eps_pinf;
        double supp = 0;
        for (int i = 0; i < m && cert; ++i) {
          if (dy(i) > 0) supp += s.u(i) * dy(i);
          else if (dy(i) < 0) {
            if (s.l(i) <= -kInf / 2) {
              if (dy(i) < -eps_pinf) cert = false;
            } else {
              supp += s.l(i) * dy(i);
            }
          }
        }
        if (cert && supp <= -eps_pinf) {
          sol.z = x;
          sol.status = SolveStatus::kInfeasible;
          sol.iterations = it;
          sol.infeasibility_certificate = dy / dy_norm;
          sol.dual = y;
          return sol;
        }
      }
    }
    if (cfg.adaptive_rho && m > 0 && it != cfg.max_iter) {
      const double ratio = std::sqrt((r_prim / prim_scale) / std::max(r_dual / dual_scale, 1e-16));
      if (ratio > 5.0 || ratio < 0.2) {
        rho = std::clamp(rho * ratio, 1e-6, 1e6);
        factorize();
      }
    }
  }

  sol.z = x;
  sol.dual = m > 0 ? y : Eigen::VectorXd();
  sol.iterations = std::min(it, cfg.max_iter);

  if (cfg.polish && m > 0) {
    Eigen::VectorXd zp = x, dp = y;
    if (polish(p, s, cfg, zp, dp)) {
      if (kkt_report(p, zp, dp).residual <= kkt_report(p, x, y).residual) {
        sol.z = zp;
        sol.dual = dp;
      }
    }
  }

  const KktReport rep =
      m > 0 ? kkt_report(p, sol.z, sol.dual) : kkt_report(p, sol.z, Eigen::VectorXd::Zero(0));
  sol.kkt_residual = rep.residual;
  sol.objective = 0.5 * sol.z.dot(p.H * sol.z) + p.g.dot(sol.z);
  sol.status = (rep.residual < cfg.kkt_tol && rep.violation < cfg.feas_tol)
                   ? SolveStatus::kOptimal
                   : SolveStatus::kMaxIter;
  return sol;
}

void dump(const QpProblem& p, std::ostream& os) {
  os.precision(17);
  os << "qp 1\n";
  os << "n " << p.n_vars << " m_ineq " << p.A_ineq.rows() << " m_eq " << p.A_eq.rows() << "\n";
  auto mat = [&os](const char* name, const Eigen::MatrixXd& M) {
    os << name << " " << M.rows() << " " << M.cols() << "\n";
    for (int i = 0; i < M.rows(); ++i) {
      for (int j = 0; j < M.cols(); ++j) os << M(i, j) << (j + 1 == M.cols() ? '\n' : ' ');
    }
  };
  mat("H", p.H);
  mat("g", p.g);
  mat("A_ineq", p.A_ineq);
  mat("b_ineq", p.b_ineq);
  mat("A_eq", p.A_eq);
  mat("b_eq", p.b_eq);
}

}  // namespace evasion::qp
