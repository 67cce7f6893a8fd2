#ifndef STOPFLOW_BARRIER_FLOW_HPP
#define STOPFLOW_BARRIER_FLOW_HPP

#include <cstdint>
#include <vector>

#include "stopflow/free_target.hpp"
#include "stopflow/grid.hpp"
#include "stopflow/lcp.hpp"

namespace stopflow {

struct FlowOptions {
    SolverParams solver;
    double eps = 0.0;          // activity threshold; 0 means derive from solver tol
    int max_snapshots = 400;   // stored w snapshots are strided to stay below this
    bool require_extinction = false; // type I with f >= delta declared: failing to
                                     // extinguish by t_end raises NonExtinction
    int max_indicator_iters = 50;    // type II per-step indicator fixed point
};

// Time-indexed potential flow. w is stored at a subsampled set of step
// times; eta between consecutive snapshots is the exact window average
// -/+ 2 dw/dt, so all time integrals of eta telescope exactly.
struct SpaceTimeFlow {
    GridSpec grid;
    CostType cost_type = CostType::TypeI;
    double dt = 0.0;
    double eps = 0.0;
    DensityField absorb;  // absorption density: f restricted to the active set
    DensityField source;  // type II only: the post-instant-stop remainder of mu
    std::vector<double> snap_times;
    std::vector<ScalarField> w_snaps;
    BarrierField stop_time; // eps-crossing time per cell, +inf if never crossed
    DensityField rho_accum; // absorb restricted to cells that crossed
    double t_final = 0.0;
    int steps = 0;
    std::int64_t total_sweeps = 0;
    bool completed = false;
    bool extinct = false;

    // window-averaged eta on [snap_times[k], snap_times[k+1])
    DensityField eta_between(std::size_t k) const;
    NodeMask active_at(std::size_t k) const; // {w(t_k) > eps}
    // sum over steps of dt * mass(eta): telescopes to 2(int w_first - int w_last)
    double eta_time_mass() const;
};

// Freezing flow: implicit Euler for w_t - Lap w / 2 = -nu/2 on {w > 0},
// one projected-SOR LCP per step, early exit once max w stays below eps
// for three consecutive steps.
SpaceTimeFlow evolve_type1(const ScalarField& w0, const DensityField& nu, double dt,
                           double t_end, const FlowOptions& opts = {});

// Melting flow: w grows from 0 with source mu/2 and absorption nu/2 gated
// by the lagged activity indicator, iterated to a fixed point each step.
// As t_end grows w approaches the elliptic solution of the same data.
SpaceTimeFlow evolve_type2(const DensityField& mu_active, const DensityField& nu_active,
                           double dt, double t_end, const FlowOptions& opts = {});

// Stopping rule read off the flow: type I takes the first eps-crossing of
// w downward (0 where w never activated), type II the upward crossing
// (+inf where w never activated). Times are refined by linear
// interpolation between the bracketing steps.
BarrierField extract_barrier(const SpaceTimeFlow& flow);

// Max over the fixed space-time test family of the normalized weak defect
// of rho + d_t eta = Lap eta / 2 with eta(.,0) = mu.
double eulerian_residual(const SpaceTimeFlow& flow, const DensityField& mu);

} // namespace stopflow

#endif
