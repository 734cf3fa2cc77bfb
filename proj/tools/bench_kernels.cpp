// Serial vs OpenMP timing for the data-parallel kernels: scenario sweeps,
// zonotope facet enumeration, and the randomised constraint-geometry audit.

#include <omp.h>

#include <cstdio>
#include <random>

#include "evasion/geometry.hpp"
#include "evasion/simulation.hpp"
#include "evasion/validation.hpp"

namespace {

evasion::sim::Scenario bench_scenario() {
  evasion::sim::Scenario sc;
  sc.radius = 750;
  sc.path_length = 700;
  sc.subject_speed = 75 / 3.6;
  sc.lead_start_s = 60;
  sc.duration = 12.0;
  return sc;
}

template <typename F>
double timed(F&& f) {
  const double t0 = omp_get_wtime();
  f();
  return omp_get_wtime() - t0;
}

}  // namespace

int main() {
  using namespace evasion;
  std::printf("threads available: %d\n\n", omp_get_max_threads());

  {
    const sim::Scenario sc = bench_scenario();
    const std::vector<double> speeds{60, 65, 70, 75, 80};
    const std::vector<mpc::Variant> variants{mpc::Variant::kNominal, mpc::Variant::kOffsetFree};
    sim::SweepResult serial_res, parallel_res;
    const double ts = timed([&] { serial_res = sim::sweep(sc, sim::SweepAxis::kSpeeds, speeds,
                                                          variants, false); });
    const double tp = timed([&] { parallel_res = sim::sweep(sc, sim::SweepAxis::kSpeeds, speeds,
                                                            variants, true); });
    bool same = serial_res.rows.size() == parallel_res.rows.size();
    for (size_t i = 0; same && i < serial_res.rows.size(); ++i)
      same = serial_res.rows[i].metrics.iaca_delta == parallel_res.rows[i].metrics.iaca_delta &&
             serial_res.rows[i].metrics.max_e_y == parallel_res.rows[i].metrics.max_e_y;
    std::printf("sweep (10 runs):        serial %7.2f s   openmp %7.2f s   speedup %5.2fx   identical %s\n",
                ts, tp, ts / tp, same ? "yes" : "NO");
  }

  {
    std::mt19937 rng(7);
    std::normal_distribution<double> g;
    Eigen::MatrixXd gens(4, 64);
    for (int j = 0; j < gens.cols(); ++j)
      for (int i = 0; i < 4; ++i) gens(i, j) = 0.2 * g(rng);
    const geom::Zonotope z{Eigen::VectorXd::Zero(4), gens};
    std::vector<geom::Halfspace> hs, hp;
    const double ts = timed([&] { hs = geom::zonotope_facets(z, false); });
    const double tp = timed([&] { hp = geom::zonotope_facets(z, true); });
    bool same = hs.size() == hp.size();
    for (size_t i = 0; same && i < hs.size(); ++i)
      same = hs[i].normal == hp[i].normal && hs[i].offset == hp[i].offset;
    std::printf("facets (64 generators): serial %7.2f s   openmp %7.2f s   speedup %5.2fx   identical %s\n",
                ts, tp, ts / tp, same ? "yes" : "NO");
  }

  {
    validate::GeometryReport rs, rp;
    const double ts =
        timed([&] { rs = validate::validate_constraint_geometry(500, 20000, 11, false); });
    const double tp =
        timed([&] { rp = validate::validate_constraint_geometry(500, 20000, 11, true); });
    const bool same = rs.failures == rp.failures &&
                      rs.max_intersection_residual == rp.max_intersection_residual;
    std::printf("geometry audit (20k):   serial %7.2f s   openmp %7.2f s   speedup %5.2fx   identical %s\n",
                ts, tp, ts / tp, same ? "yes" : "NO");
  }
  return 0;
}
