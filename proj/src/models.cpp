#include "evasion/models.hpp"

#include <stdexcept>

namespace evasion::model {

void VehicleParams::validate() const {
  if (l_f <= 0 || l_r <= 0 || mass <= 0 || I_z <= 0 || lane_width <= 0 || t_s <= 0 ||
      wheel_radius_eff <= 0 || track_width <= 0)
    throw std::invalid_argument("VehicleParams: all fields must be strictly positive");
}

ContinuousLti build_kinematic_lti(const VehicleParams& params, double v_nom) {
  params.validate();
  if (v_nom < 0) throw std::invalid_argument("build_kinematic_lti: v_nom must be nonnegative");
  const double L = params.wheelbase();
  ContinuousLti m;
  m.v_nom = v_nom;
  m.A.setZero();
  m.A(kIdxX, kIdxVx) = 1.0;
  m.A(kIdxY, kIdxPsi) = v_nom;
  m.B.setZero();
  m.B(kIdxY, 0) = v_nom * params.l_r / L;
  m.B(kIdxPsi, 0) = v_nom / L;
  m.B(kIdxVx, 1) = 1.0;
  return m;
}

LtiModel discretize(const ContinuousLti& model, double t_s) {
  if (t_s <= 0) throw std::invalid_argument("discretize: t_s must be positive");
  LtiModel d;
  d.t_s = t_s;
  d.v_nom = model.v_nom;
  // A is nilpotent (A^2 = 0), so the exponential series ends here and the
  // hold is exact, not an approximation.
  d.A_d = Eigen::Matrix4d::Identity() + model.A * t_s;
  d.B_d = model.B * t_s + model.A * model.B * (t_s * t_s / 2.0);
  return d;
}

AugmentedModel build_augmented(const LtiModel& model) {
  AugmentedModel a;
  a.t_s = model.t_s;
  a.v_nom = model.v_nom;
  const double ts = model.t_s;
  a.A.setIdentity();
  a.A(kEtaX, kEtaVx) = model.A_d(kIdxX, kIdxVx);      // t_s
  a.A(kEtaY, kEtaPsi) = model.A_d(kIdxY, kIdxPsi);    // t_s v_nom
  a.A(kEtaEy, kEtaEpsi) = -ts * model.v_nom;
  a.B.setZero();
  a.B(kEtaY, 0) = model.B_d(kIdxY, 0);
  a.B(kEtaPsi, 0) = model.B_d(kIdxPsi, 0);
  a.B(kEtaEpsi, 0) = -model.B_d(kIdxPsi, 0);  // e_psi loses what psi gains
  a.B(kEtaX, 1) = model.B_d(kIdxX, 1);
  a.B(kEtaVx, 1) = model.B_d(kIdxVx, 1);
  a.B_dist.setZero();
  a.B_dist(kEtaEpsi) = ts * model.v_nom;
  a.C.setIdentity();
  a.C_dist = 1.0;
  return a;
}

LpvVertexSet build_lpv_vertices(const VehicleParams& params, double v_min, double v_max,
                                double t_s) {
  if (v_min > v_max || v_min < 0)
    throw std::invalid_argument("build_lpv_vertices: invalid speed range");
  LpvVertexSet set;
  set.v_min = v_min;
  set.v_max = v_max;
  set.t_s = t_s;
  for (double v : {v_min, v_max})
    set.vertices.push_back(discretize(build_kinematic_lti(params, v), t_s));
  set.A_bar.setZero();
  set.B_bar.setZero();
  for (const auto& m : set.vertices) {
    set.A_bar += m.A_d;
    set.B_bar += m.B_d;
  }
  set.A_bar /= static_cast<double>(set.vertices.size());
  set.B_bar /= static_cast<double>(set.vertices.size());
  return set;
}

geom::Polytope compute_disturbance_set(const LpvVertexSet& lpv, const geom::Polytope& X,
                                       const geom::Polytope& U) {
  if (!X.is_box() || !U.is_box() || X.dim() != 4 || U.dim() != 2)
    throw std::invalid_argument("compute_disturbance_set: X (4D) and U (2D) must be boxes");
  if (X.is_empty() || U.is_empty())
    throw std::invalid_argument("compute_disturbance_set: empty state or input set");
  Eigen::Vector4d lo = Eigen::Vector4d::Zero(), hi = Eigen::Vector4d::Zero();
  for (const auto& m : lpv.vertices) {
    const Eigen::Matrix4d dA = m.A_d - lpv.A_bar;
    const Eigen::Matrix<double, 4, 2> dB = m.B_d - lpv.B_bar;
    for (const auto& xi : X.vertices()) {
      for (const auto& u : U.vertices()) {
        const Eigen::Vector4d w = dA * xi + dB * u;
        lo = lo.cwiseMin(w);
        hi = hi.cwiseMax(w);
      }
    }
  }
  return geom::Polytope::box(lo, hi);
}

}  // namespace evasion::model
