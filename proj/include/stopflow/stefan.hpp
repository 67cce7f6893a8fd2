#ifndef STOPFLOW_STEFAN_HPP
#define STOPFLOW_STEFAN_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "stopflow/barrier_flow.hpp"
#include "stopflow/free_target.hpp"
#include "stopflow/grid.hpp"

namespace stopflow {

enum class StefanVariant { St1, St2 };

// Piecewise-constant-in-time eta record: eta[k] lives on the interval
// [edges[k], edges[k+1]). eta_terminal is the state at edges.back(); the
// weak forms need it when the run is truncated while eta is still alive.
struct EtaSeries {
    GridSpec grid;
    std::vector<double> edges;
    std::vector<DensityField> eta;
    DensityField eta_terminal;
};

// Window-averaged eta series of a potential flow (exact time integrals).
EtaSeries flow_eta_series(const SpaceTimeFlow& flow);

struct St2Options {
    double gs_tol = 1e-12;
    int max_gs_iters = 20000;
    SweepMode mode = SweepMode::Lexicographic;
    double eps = 1e-9; // melt detection threshold on eta
    int max_snapshots = 400;
};

struct St2Result {
    GridSpec grid;
    double dt = 0.0;
    double t_final = 0.0;
    int steps = 0;
    std::int64_t total_sweeps = 0;
    EtaSeries series;       // eta snapshots
    NodeMask melted;        // accumulated active set: cells that ever had eta > eps
    BarrierField melt_time; // first flip time per cell, +inf if never
    DensityField e_final;   // final enthalpy
    double max_eta_final = 0.0;
};

// Melting dynamics by the enthalpy substitution: one implicit step
// (e' - e)/dt = Lap beta(e') / 2 with beta(e) = max(e - nu_weight, 0),
// solved by nonlinear Gauss-Seidel. Cells flip into `melted` permanently
// once their eta exceeds eps (mushy cells hold partial enthalpy silently).
St2Result st2_enthalpy_solve(const DensityField& mu, const DensityField& nu_weight,
                             double dt, double t_end, const St2Options& opts = {});

// Doubles the horizon from t0 until the melted set stops growing over a
// doubling and the residual superheat has decayed; the melted set is then
// the accumulated active region of the melting flow.
St2Result st2_long_time(const DensityField& mu, const DensityField& nu_weight, double dt,
                        double t0 = 1.0, const St2Options& opts = {});

// Max normalized weak-form defect of (eta -/+ nu chi_{eta>0})_t = Lap eta / 2
// over the shared test family. transition_time carries the freeze (St1) or
// melt (St2) time per cell, +inf where the phase never changes; eta0 and E0
// are the initial data pair.
double stefan_weak_residual(const EtaSeries& series, const DensityField& nu_weight,
                            const DensityField& eta0, const NodeMask& E0,
                            const BarrierField& transition_time, StefanVariant variant);

struct St1Report {
    double mass_mu = 0.0;
    double mass_nu = 0.0;
    double mass_rho = 0.0;
    double eta_time_mass = 0.0;     // sum_n dt mass(eta_n)
    double twice_w0_integral = 0.0; // should match the line above
    double extinction_time = kInf;
    double eulerian_defect = 0.0;
    double stefan_defect = 0.0;
    bool subharmonic_pass = false;
    // complement-of-K runs only: nu restricted to K and the Hausdorff gap
    // between the persistent active set and K at two horizons
    std::optional<double> nu_on_K;
    std::optional<double> K_gap_h1;
    std::optional<double> K_gap_h2;
};

struct St1Bundle {
    FreeTargetResult target;
    SpaceTimeFlow flow;
    BarrierField s;
    EtaSeries series;
    St1Report report;
};

// Full freezing pipeline: free target -> type I evolution -> barrier, plus
// the report of budgets and residuals. When f vanishes on a compact K
// containing supp mu, the K-characterization checks are filled in.
St1Bundle assemble_st1_solution(const ProblemSpec& spec, double dt, double t_end,
                                const FlowOptions& flow_opts = {});

} // namespace stopflow

#endif
