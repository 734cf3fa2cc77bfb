#include "evasion/plant.hpp"

#include <cmath>

namespace evasion::plant {

namespace {
constexpr double kGravity = 9.81;
}

Plant::Plant(PlantParams params, Surface surface)
    : params_(std::move(params)), surface_(surface) {
  params_.veh.validate();
  surface_.validate();
}

void Plant::set_kinematic(double x, double y, double psi, double v) {
  state_ = PlantState{};
  last_steering_ = 0;
  state_.x = x;
  state_.y = y;
  state_.psi = psi;
  state_.v_x = v;
  const double w = v / params_.veh.wheel_radius_eff;
  state_.omega = {w, w, w, w};
}

std::array<double, 4> Plant::wheel_loads() const {
  const auto& p = params_.veh;
  const double front = p.mass * kGravity * p.l_r / (2.0 * p.wheelbase());
  const double rear = p.mass * kGravity * p.l_f / (2.0 * p.wheelbase());
  return {front, front, rear, rear};
}

Plant::Forces Plant::tire_forces(const PlantState& s, double steering) const {
  const auto& p = params_.veh;
  const double hw = p.track_width / 2.0;
  const double xs[4] = {p.l_f, p.l_f, -p.l_r, -p.l_r};
  const double ys[4] = {hw, -hw, hw, -hw};
  const auto loads = wheel_loads();
  Forces out;
  for (int i = 0; i < 4; ++i) {
    const bool front = i < 2;
    const double d = front ? steering : 0.0;
    const double cd = std::cos(d), sd = std::sin(d);
    // Contact-point velocity, body frame then wheel frame.
    const double vcx = s.v_x - s.r * ys[i];
    const double vcy = s.v_y + s.r * xs[i];
    const double vlx = cd * vcx + sd * vcy;
    const double vly = -sd * vcx + cd * vcy;
    const double denom = std::max(std::abs(vlx), params_.v_eps);
    const double kappa = (s.omega[i] * p.wheel_radius_eff - vlx) / denom;
    const double alpha = std::atan2(vly, denom);
    const double D = surface_.mu * loads[i];
    double fx = D * std::sin(params_.tire_C * std::atan(params_.tire_B * kappa));
    double fy = -D * std::sin(params_.tire_C * std::atan(params_.tire_B * alpha));
    const double norm = std::hypot(fx, fy);
    if (norm > D && norm > 0) {  // friction circle, exact clamp
      fx *= D / norm;
      fy *= D / norm;
    }
    out.fx_wheel[i] = fx;
    out.fy_wheel[i] = fy;
    const double fbx = cd * fx - sd * fy;
    const double fby = sd * fx + cd * fy;
    out.Fx_body += fbx;
    out.Fy_body += fby;
    out.Mz += xs[i] * fby - ys[i] * fbx;
  }
  return out;
}

PlantState Plant::derivative(const PlantState& s, double steering,
                             const std::array<double, 4>& torques) const {
  const auto& p = params_.veh;
  const Forces f = tire_forces(s, steering);
  PlantState d;
  d.x = s.v_x * std::cos(s.psi) - s.v_y * std::sin(s.psi);
  d.y = s.v_x * std::sin(s.psi) + s.v_y * std::cos(s.psi);
  d.psi = s.r;
  d.v_x = f.Fx_body / p.mass + s.r * s.v_y;
  d.v_y = f.Fy_body / p.mass - s.r * s.v_x;
  d.r = f.Mz / p.I_z;
  for (int i = 0; i < 4; ++i)
    d.omega[i] = (torques[i] - p.wheel_radius_eff * f.fx_wheel[i]) / params_.wheel_inertia;
  return d;
}

void Plant::step(double steering, const std::array<double, 4>& torques, double dt_total,
                 double dt_sub) {
  last_steering_ = steering;
  const int n = std::max(1, static_cast<int>(std::ceil(dt_total / dt_sub)));
  const double h = dt_total / n;
  auto axpy = [](const PlantState& a, double c, const PlantState& b) {
    PlantState r = a;
    r.x += c * b.x;
    r.y += c * b.y;
    r.psi += c * b.psi;
    r.v_x += c * b.v_x;
    r.v_y += c * b.v_y;
    r.r += c * b.r;
    for (int i = 0; i < 4; ++i) r.omega[i] += c * b.omega[i];
    return r;
  };
  for (int step = 0; step < n; ++step) {
    const PlantState k1 = derivative(state_, steering, torques);
    const PlantState k2 = derivative(axpy(state_, h / 2, k1), steering, torques);
    const PlantState k3 = derivative(axpy(state_, h / 2, k2), steering, torques);
    const PlantState k4 = derivative(axpy(state_, h, k3), steering, torques);
    PlantState next = axpy(state_, h / 6, k1);
    next = axpy(next, h / 3, k2);
    next = axpy(next, h / 3, k3);
    next = axpy(next, h / 6, k4);
    state_ = next;
    const bool finite = std::isfinite(state_.x) && std::isfinite(state_.y) &&
                        std::isfinite(state_.psi) && std::isfinite(state_.v_x) &&
                        std::isfinite(state_.v_y) && std::isfinite(state_.r);
    if (!finite || std::abs(state_.v_x) > 150 || std::abs(state_.v_y) > 80 ||
        std::abs(state_.r) > 25)
      throw Divergence("plant state diverged");
  }
}

Measurement Plant::measure() const {
  const Forces f = tire_forces(state_, last_steering_);
  Measurement m;
  m.kin = {state_.x, state_.y, state_.v_x, state_.psi};
  for (int i = 0; i < 4; ++i) {
    m.tires.f_x[i] = f.fx_wheel[i];
    m.tires.f_y[i] = f.fy_wheel[i];
  }
  m.cg = {f.Fx_body, f.Fy_body, f.Mz};
  m.yaw_rate = state_.r;
  m.v_y = state_.v_y;
  return m;
}

}  // namespace evasion::plant
