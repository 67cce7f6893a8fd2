#ifndef STOPFLOW_FREE_TARGET_HPP
#define STOPFLOW_FREE_TARGET_HPP

#include <optional>
#include <string>
#include <vector>

#include "stopflow/grid.hpp"
#include "stopflow/lcp.hpp"

namespace stopflow {

enum class CostType { TypeI, TypeII };

// Running cost L(x,t), strictly monotone in t: increasing for type (I)
// (freezing), decreasing for type (II) (melting). The optimal target is
// the same for every admissible choice; the cost only moves the barrier.
struct Lagrangian {
    enum class Kind { TimeLinear, ExpDecay, Table } kind = Kind::TimeLinear;
    // Table entries (t, L(t)), piecewise linear, must be strictly monotone
    // in the direction required by the cost type.
    std::vector<std::pair<double, double>> table;

    static Lagrangian time_linear() { return {Kind::TimeLinear, {}}; }
    static Lagrangian exp_decay() { return {Kind::ExpDecay, {}}; }
    static Lagrangian from_table(std::vector<std::pair<double, double>> t);

    double eval(double t) const;
    void validate(CostType type) const;
};

struct SolverParams {
    double lcp_tol = 1e-10;
    int max_sweeps = 200000;
    double omega = 1.5;
    SweepMode mode = SweepMode::Lexicographic;
};

// Activity threshold separating true positivity of w from solver noise.
double eps_active(const GridSpec& grid, double lcp_tol);

struct ProblemSpec {
    GridSpec grid;
    DensityField mu;
    DensityField f;
    CostType cost_type = CostType::TypeI;
    Lagrangian lagrangian = Lagrangian::time_linear();
    SolverParams solver;
    double f_cap = 1e6;
    bool check_universality = true; // re-solve through the split route and compare

    void validate() const;
};

struct FreeTargetResult {
    ScalarField w0;          // elliptic potential gap, >= 0
    NodeMask E;              // saturated set {w0 > eps_active}
    NodeMask F;              // instant-stop bookkeeping: {w0 <= eps} within supp mu
    DensityField nu;         // optimal target, mass-exact vs mu
    DensityField instant_mass; // type I: mu restricted off the active set; type II: f ^ mu
    double eps = 0.0;
    double mass_rescale = 1.0; // global factor applied to restore exact mass
    double universality_gap = 0.0; // max |nu_I - nu_II| when both routes run
    LcpDiagnostics lcp;

    // absorption density seen by the positive-time flow
    DensityField active_target() const;
};

// Solve the elliptic obstacle formulation for (mu, f): w0 >= 0 with
// -Lap w0 + (f - mu) on {w0 > 0}, complementarity elsewhere; then assemble
// nu = f on the active set, mu off it, with the discrete boundary flux of
// w0 assigned to the one-cell free-boundary ring so total mass is exact.
FreeTargetResult solve_free_target(const ProblemSpec& spec);

struct SubharmonicEntry {
    std::string phi;
    double gap = 0.0;   // integral(phi dnu) - integral(phi dmu)
    double scale = 0.0; // max |phi| over the grid box
    bool pass = false;
};

struct SubharmonicReport {
    std::vector<SubharmonicEntry> entries;
    double min_normalized_gap = 0.0;
    bool pass = false;
};

// Spot check of the subharmonic order mu <= nu against a fixed family of
// smooth subharmonic test functions (squared distances, exponentials,
// hinge functions). pass iff every gap >= -tol * scale(phi).
SubharmonicReport subharmonic_order_check(const DensityField& mu, const DensityField& nu,
                                          int test_family_size = 8, double tol = 1e-8);

} // namespace stopflow

#endif
