#include "evasion/artifacts.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace evasion::io {

namespace {

std::ofstream open_out(const std::string& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file);
  return os;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void write_trace_csv(const sim::SimTrace& trace, const std::string& file) {
  auto os = open_out(file);
  os << "# evasion trace v1; units in column names; t_s=" << num(trace.t_s);
  if (trace.aborted) os << "; aborted=" << trace.abort_reason;
  os << "\n";
  os << "t_s,x_m,y_m,psi_rad,vx_mps,vy_mps,r_radps,"
        "omega_fl_radps,omega_fr_radps,omega_rl_radps,omega_rr_radps,"
        "s_m,e_y_m,e_psi_rad,mode,region_margin_m,"
        "delta_cmd_rad,ax_cmd_mps2,v_star_mps,"
        "T_fl_Nm,T_fr_Nm,T_rl_Nm,T_rr_Nm,dT_fl_Nm,dT_fr_Nm,dT_rl_Nm,dT_rr_Nm,"
        "T_ff_total_Nm,net_yaw_moment_Nm,"
        "solver_status,kkt_residual,qp_iterations,slack_used,slack_max,tube_reset,objective,"
        "separation_m,pred_x_m,pred_y_m,pred_psi_rad,pred_v_mps\n";
  for (const auto& r : trace.steps) {
    os << num(r.t) << ',' << num(r.plant.x) << ',' << num(r.plant.y) << ',' << num(r.plant.psi)
       << ',' << num(r.plant.v_x) << ',' << num(r.plant.v_y) << ',' << num(r.plant.r);
    for (double w : r.plant.omega) os << ',' << num(w);
    os << ',' << num(r.s) << ',' << num(r.e_y) << ',' << num(r.e_psi) << ','
       << sim::mode_name(r.mode) << ',' << num(r.region_margin) << ',' << num(r.delta_cmd) << ','
       << num(r.ax_cmd) << ',' << num(r.v_star);
    for (double v : r.torques) os << ',' << num(v);
    for (double v : r.delta_torque) os << ',' << num(v);
    os << ',' << num(r.t_ff_total) << ',' << num(r.net_yaw_moment) << ',' << r.solver_status
       << ',' << num(r.kkt_residual) << ',' << r.qp_iterations << ',' << (r.slack_used ? 1 : 0)
       << ',' << num(r.slack_max) << ',' << (r.tube_reset ? 1 : 0) << ',' << num(r.objective) << ',' << num(r.separation) << ','
       << num(r.pred_x) << ',' << num(r.pred_y) << ',' << num(r.pred_psi) << ','
       << num(r.pred_v) << '\n';
  }
}

void write_region_csv(const sim::SimTrace& trace, const std::string& file) {
  auto os = open_out(file);
  os << "# evasion region v1; halfspaces a*x + b*y + c >= 0 are safe\n";
  os << "t_s,mode,up_a,up_b,up_c_m,lo_a,lo_b,lo_c_m,has_cc,cc_a,cc_b,cc_c_m\n";
  for (const auto& r : trace.steps) {
    os << num(r.t) << ',' << sim::mode_name(r.mode);
    for (double v : r.upper) os << ',' << num(v);
    for (double v : r.lower) os << ',' << num(v);
    os << ',' << (r.has_collision_hs ? 1 : 0);
    for (double v : r.collision) os << ',' << num(v);
    os << '\n';
  }
}

void write_metrics_json(const sim::SimTrace& trace, const std::string& file) {
  const sim::Metrics& m = trace.metrics;
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["scenario"] = trace.scenario_name;
  j["aborted"] = trace.aborted;
  j["abort_reason"] = trace.abort_reason;
  j["steps"] = trace.steps.size();
  j["iaca_delta_rad"] = m.iaca_delta;
  j["iaca_ax_mps2"] = m.iaca_ax;
  j["iaca_mz_Nm"] = m.iaca_mz;
  j["max_e_y_m"] = m.max_e_y;
  j["max_e_psi_rad"] = m.max_e_psi;
  j["min_separation_m"] = m.min_separation;
  j["collision"] = m.collision;
  j["boundary_violation"] = m.boundary_violation;
  j["completed"] = m.completed;
  j["window_t0_s"] = m.window_t0;
  j["window_t1_s"] = m.window_t1;
  auto os = open_out(file);
  os << j.dump(2) << "\n";
}

void write_plot_script(const std::string& file) {
  auto os = open_out(file);
  os << R"py(#!/usr/bin/env python3
"""Plots for one run directory: trajectory, velocity/heading, net yaw moment.

Reads trace.csv next to this script and writes PNGs alongside it.
"""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(sys.argv[0] if len(sys.argv) < 2 else sys.argv[1]))
rows = []
with open(os.path.join(here, "trace.csv")) as f:
    f.readline()  # comment line
    for row in csv.DictReader(f):
        rows.append(row)

def col(name, cast=float):
    return [cast(r[name]) for r in rows]

t = col("t_s")

fig, ax = plt.subplots(figsize=(9, 4))
ax.plot(col("x_m"), col("y_m"), label="vehicle")
ax.plot(col("pred_x_m"), col("pred_y_m"), ":", label="planned (1 step)")
ax.set_xlabel("x [m]"); ax.set_ylabel("y [m]"); ax.axis("equal"); ax.legend()
fig.savefig(os.path.join(here, "trajectory.png"), dpi=150, bbox_inches="tight")

fig, (a0, a1) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
a0.plot(t, col("vx_mps")); a0.set_ylabel("v_x [m/s]")
a1.plot(t, col("psi_rad")); a1.set_ylabel("psi [rad]"); a1.set_xlabel("t [s]")
fig.savefig(os.path.join(here, "velocity_heading.png"), dpi=150, bbox_inches="tight")

fig, ax = plt.subplots(figsize=(9, 4))
ax.plot(t, col("net_yaw_moment_Nm"))
ax.set_xlabel("t [s]"); ax.set_ylabel("net yaw moment [N m]")
fig.savefig(os.path.join(here, "yaw_moment.png"), dpi=150, bbox_inches="tight")
print("wrote trajectory.png velocity_heading.png yaw_moment.png")
)py";
}

int emit_artifacts(const sim::SimTrace& trace, const std::string& outdir) {
  std::filesystem::create_directories(outdir);
  write_trace_csv(trace, outdir + "/trace.csv");
  write_region_csv(trace, outdir + "/region.csv");
  write_metrics_json(trace, outdir + "/metrics.json");
  write_plot_script(outdir + "/plot.py");
  return 4;
}

void write_sweep_csv(const sim::SweepResult& result, const std::string& file) {
  auto os = open_out(file);
  os << "# evasion sweep v1; axis value in km/h (speeds) or m (radii)\n";
  os << "variant,axis,axis_value,IACA_delta_rad,IACA_ax_mps2,IACA_Mz_Nm,max_e_y_m,"
        "max_e_psi_rad,min_separation_m,collision,boundary_violation,completed,status\n";
  for (const auto& r : result.rows) {
    const sim::Metrics& m = r.metrics;
    os << sim::variant_name(r.variant) << ','
       << (result.axis == sim::SweepAxis::kSpeeds ? "speed_kmh" : "radius_m") << ','
       << num(r.axis_value) << ',' << num(m.iaca_delta) << ',' << num(m.iaca_ax) << ','
       << num(m.iaca_mz) << ',' << num(m.max_e_y) << ',' << num(m.max_e_psi) << ','
       << num(m.min_separation) << ',' << (m.collision ? 1 : 0) << ','
       << (m.boundary_violation ? 1 : 0) << ',' << (m.completed ? 1 : 0) << ','
       << (r.ok ? "ok" : r.error) << '\n';
  }
}

}  // namespace evasion::io
