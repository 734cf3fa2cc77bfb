#pragma once

#include <string>

#include "evasion/simulation.hpp"

namespace evasion::io {

/// Writes trace.csv, region.csv, metrics.json and plot.py into `outdir`
/// (created if missing). Re-running on the same trace produces byte-identical
/// files. Returns the number of files written.
int emit_artifacts(const sim::SimTrace& trace, const std::string& outdir);

void write_trace_csv(const sim::SimTrace& trace, const std::string& file);
void write_region_csv(const sim::SimTrace& trace, const std::string& file);
void write_metrics_json(const sim::SimTrace& trace, const std::string& file);
void write_plot_script(const std::string& file);

/// Sweep table in the paper's row-per-variant layout:
/// variant, axis, axis_value, IACA_delta_rad, IACA_ax_mps2, IACA_Mz_Nm,
/// max_e_y_m, max_e_psi_rad, min_separation_m, collision,
/// boundary_violation, completed, status.
void write_sweep_csv(const sim::SweepResult& result, const std::string& file);

}  // namespace evasion::io
