// Timings of the serial reference sweeps against the OpenMP two-color
// kernels, on the elliptic obstacle solve and a particle batch. Run
// manually: build/bench/stopflow_bench [grid_n] [particles]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "stopflow/free_target.hpp"
#include "stopflow/lcp.hpp"
#include "stopflow/montecarlo.hpp"
#include "stopflow/run_config.hpp"

using namespace stopflow;
using clock_type = std::chrono::steady_clock;

static double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 193;
    const int particles = argc > 2 ? std::atoi(argv[2]) : 100000;

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (no OpenMP)\n");
#endif

    const GridSpec g = GridSpec::box(-4.0, 4.0, n, -4.0, 4.0, n);
    DensityField mu = ball_bump(g, {0.0, 0.0}, 1.0, 4.0);
    DensityField f(g, 1.0);
    ScalarField q(g);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = f[i] - mu[i];
    StencilOperator lap = StencilOperator::neg_laplacian(g);

    for (SweepMode mode : {SweepMode::Lexicographic, SweepMode::RedBlack}) {
        LcpProblem prob{lap, q, 1e-10, 200000, 1.5, mode};
        const auto t0 = clock_type::now();
        LcpResult r = solve_lcp(prob, ScalarField::zeros(g));
        const double dt = seconds_since(t0);
        std::printf("lcp %-14s n=%4d  sweeps=%6d  residual=%.3e  %.3fs\n",
                    mode == SweepMode::Lexicographic ? "lexicographic" : "red-black(omp)", n,
                    r.diagnostics.sweeps, r.diagnostics.final_residual, dt);
    }

    // particle kernel: constant barrier, Gaussian endpoint law
    const GridSpec g1 = GridSpec::line(-8.0, 8.0, 1025);
    DensityField mu1 = box_bump(g1, {-0.25, 0.0}, {0.25, 0.0}, 2.0);
    BarrierField s = BarrierField::filled(g1, 1.0);
    auto starts = sample_initial(mu1, particles, 7);
    McOptions mo;
    mo.record_cost = false;
    const auto t0 = clock_type::now();
    ParticleEnsemble ens = simulate_stop(starts, s, CostType::TypeI, nullptr, 1.0 / 1024.0, 7,
                                         mass(mu1), mo);
    const double dt = seconds_since(t0);
    std::printf("mc   %-14s N=%d  steps/particle=%d  %.3fs\n", "omp particles", particles,
                1024, dt);
    (void)ens;
    return 0;
}
