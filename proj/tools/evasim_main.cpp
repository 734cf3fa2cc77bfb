// evasim: scenario runner for the curved-road collision-avoidance stack.
//
// Exit codes: 0 success, 1 configuration error, 2 run failure
// (collision/divergence/abort), 3 infeasible robust setup.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evasion/artifacts.hpp"
#include "evasion/mpc.hpp"
#include "evasion/scenario.hpp"
#include "evasion/simulation.hpp"
#include "evasion/validation.hpp"

namespace {

int log_level() {
  const char* env = std::getenv("EVASIM_LOG");
  if (!env) return 1;
  const std::string v = env;
  if (v == "off" || v == "0") return 0;
  if (v == "debug" || v == "2") return 2;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "evasim: %s\n", msg.c_str());
}

evasion::sim::Scenario load(const std::string& file, const std::vector<std::string>& overrides) {
  evasion::sim::Scenario sc = evasion::io::parse_scenario_file(file);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw evasion::io::ParseError("override must be key=value: " + kv);
    evasion::io::apply_override(sc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return sc;
}

std::vector<evasion::mpc::Variant> parse_variants(const std::string& csv) {
  std::vector<evasion::mpc::Variant> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "nominal") out.push_back(evasion::mpc::Variant::kNominal);
    else if (tok == "offset_free") out.push_back(evasion::mpc::Variant::kOffsetFree);
    else if (tok == "robust") out.push_back(evasion::mpc::Variant::kRobust);
    else throw evasion::io::ParseError("unknown variant: " + tok);
  }
  if (out.empty()) throw evasion::io::ParseError("no variants given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace evasion;

  CLI::App app{"curved-road collision avoidance simulator"};
  app.require_subcommand(1);

  std::string scenario_file, outdir = "out";
  std::vector<std::string> overrides;
  bool serial = false;

  auto add_common = [&](CLI::App* cmd, bool need_out) {
    cmd->add_option("--scenario", scenario_file, "scenario file")->required();
    cmd->add_option("--set", overrides, "override, section.key=value (repeatable)");
    if (need_out) cmd->add_option("--out", outdir, "output directory");
  };

  auto* cmd_run = app.add_subcommand("run", "run one closed-loop scenario");
  add_common(cmd_run, true);

  auto* cmd_sweep = app.add_subcommand("sweep", "run a (speeds|radii) x variants grid");
  add_common(cmd_sweep, true);
  std::string axis = "speeds", variants_csv = "nominal,offset_free,robust", values_csv;
  cmd_sweep->add_option("--axis", axis, "speeds (km/h) or radii (m)")
      ->check(CLI::IsMember({"speeds", "radii"}));
  cmd_sweep->add_option("--values", values_csv, "comma-separated axis values")->required();
  cmd_sweep->add_option("--variants", variants_csv, "comma-separated controller variants");
  cmd_sweep->add_flag("--serial", serial, "disable the OpenMP sweep");
  bool emit_traces = false;
  cmd_sweep->add_flag("--traces", emit_traces, "also write per-run trace directories");

  auto* cmd_tighten = app.add_subcommand("tighten-sets", "robust set computation report");
  add_common(cmd_tighten, true);

  auto* cmd_validate = app.add_subcommand("validate-constraints",
                                          "randomised FCC/RCC geometry audit");
  add_common(cmd_validate, false);
  int samples = 1000;
  unsigned vseed = 2024;
  cmd_validate->add_option("--samples", samples, "samples per road");
  cmd_validate->add_option("--seed", vseed, "RNG seed");
  cmd_validate->add_flag("--serial", serial, "disable OpenMP");

  CLI11_PARSE(app, argc, argv);

  sim::Scenario sc;
  try {
    sc = load(scenario_file, overrides);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "evasim: configuration error: %s\n", e.what());
    return 1;
  }

  try {
    if (app.got_subcommand(cmd_run)) {
      info("running " + sc.name);
      const sim::SimTrace trace = sim::run(sc);
      io::emit_artifacts(trace, outdir);
      std::ofstream(outdir + "/scenario.txt") << io::emit_scenario(sc);
      info("wrote " + outdir);
      if (trace.aborted || trace.metrics.collision) {
        std::fprintf(stderr, "evasim: run failure: %s\n",
                     trace.aborted ? trace.abort_reason.c_str() : "collision");
        return 2;
      }
      std::printf("%s: min_separation=%.3f m, max_e_y=%.4f m, IACA_delta=%.5f rad\n",
                  sc.name.c_str(), trace.metrics.min_separation, trace.metrics.max_e_y,
                  trace.metrics.iaca_delta);
      return 0;
    }
    if (app.got_subcommand(cmd_sweep)) {
      std::vector<double> values;
      std::stringstream ss(values_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) values.push_back(std::stod(tok));
      const auto variants = parse_variants(variants_csv);
      const auto ax = axis == "speeds" ? sim::SweepAxis::kSpeeds : sim::SweepAxis::kRadii;
      info("sweeping " + std::to_string(values.size() * variants.size()) + " runs");
      const sim::SweepResult result = sim::sweep(sc, ax, values, variants, !serial);
      std::filesystem::create_directories(outdir);
      io::write_sweep_csv(result, outdir + "/sweep.csv");
      if (emit_traces) {
        for (const auto& row : result.rows) {
          sim::Scenario sci = sc;
          sci.mpc.variant = row.variant;
          if (ax == sim::SweepAxis::kSpeeds) sci.subject_speed = row.axis_value / 3.6;
          else {
            sci.radius = row.axis_value;
            sci.kappa_points.clear();
          }
          char sub[64];
          std::snprintf(sub, sizeof(sub), "%s_%g", sim::variant_name(row.variant),
                        row.axis_value);
          io::emit_artifacts(sim::run(sci), outdir + "/" + sub);
        }
      }
      int failures = 0;
      for (const auto& row : result.rows) failures += row.ok ? 0 : 1;
      std::printf("sweep: %zu runs, %d failures -> %s/sweep.csv\n", result.rows.size(), failures,
                  outdir.c_str());
      return failures == 0 ? 0 : 2;
    }
    if (app.got_subcommand(cmd_tighten)) {
      sc.mpc.variant = mpc::Variant::kRobust;
      const mpc::RobustSetup setup = mpc::design_robust_setup(sc.vehicle, sc.mpc, false);
      const bool usable = !setup.X_tight.is_empty() && !setup.U_tight.is_empty();
      std::filesystem::create_directories(outdir);
      std::ofstream os(outdir + "/sets.txt");
      const auto box_line = [&](const char* nm, const geom::Polytope& p) {
        os << nm << " lo [" << p.box_lo().transpose() << "] hi [" << p.box_hi().transpose()
           << "]\n";
      };
      os << "K =\n" << setup.K << "\n";
      os << "rho(A+BK) = " << setup.rho_closed_loop << "\n";
      os << "mrpi: s = " << setup.mrpi.s << ", alpha = " << setup.mrpi.alpha << "\n";
      box_line("W", setup.W);
      os << "Z facets = " << setup.Z.halfspaces().size() << "\n";
      for (int i = 0; i < 4; ++i) {
        Eigen::Vector4d e = Eigen::Vector4d::Zero();
        e(i) = 1.0;
        os << "Z extent dim " << i << ": [" << -setup.Z.support(-e) << ", " << setup.Z.support(e)
           << "]\n";
      }
      if (usable) {
        box_line("X_tight", setup.X_tight);
        box_line("U_tight", setup.U_tight);
      } else {
        os << "EMPTY tightened set\n";
      }
      std::printf("tighten-sets: wrote %s/sets.txt (s=%d alpha=%.4f rho=%.3f usable=%d)\n",
                  outdir.c_str(), setup.mrpi.s, setup.mrpi.alpha, setup.rho_closed_loop, usable);
      return usable ? 0 : 3;
    }
    if (app.got_subcommand(cmd_validate)) {
      int failures = 0;
      double worst = 0;
      for (double radius : {0.0, 750.0, 500.0}) {
        const auto rep = validate::validate_constraint_geometry(radius, samples, vseed, !serial);
        failures += rep.failures;
        worst = std::max(worst, rep.max_intersection_residual);
        std::printf("radius %6.0f m: %d/%d ok, max residual %.3e m, min margin %.3f m%s%s\n",
                    radius, rep.samples - rep.failures, rep.samples,
                    rep.max_intersection_residual, rep.min_subject_margin,
                    rep.ok() ? "" : " FIRST: ", rep.first_failure.c_str());
      }
      return failures == 0 ? 0 : 2;
    }
  } catch (const mpc::InfeasibleSetup& e) {
    std::fprintf(stderr, "evasim: infeasible robust setup: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "evasim: run failure: %s\n", e.what());
    return 2;
  }
  return 0;
}
