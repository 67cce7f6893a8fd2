#ifndef STOPFLOW_LCP_HPP
#define STOPFLOW_LCP_HPP

#include <vector>

#include "stopflow/grid.hpp"

namespace stopflow {

// Symmetric positive-definite 3-point (1D) / 5-point (2D) stencil with
// homogeneous Dirichlet boundary: diagonally dominant M-matrix, which is
// what the projected relaxation sweeps below rely on.
struct StencilOperator {
    GridSpec grid;
    double diag = 0.0;
    std::array<double, 2> off{0.0, 0.0}; // per-axis off-diagonal coefficient (<= 0)

    // -Laplacian: diag = sum 2/h_a^2, off_a = -1/h_a^2
    static StencilOperator neg_laplacian(const GridSpec& g);
    // I - (dt/2) Laplacian, the implicit half-heat step operator
    static StencilOperator implicit_heat(const GridSpec& g, double dt);

    void validate() const;
};

// A*w at every node; boundary rows return w (identity there, w pinned to 0
// by the solver).
ScalarField apply(const StencilOperator& op, const ScalarField& w);

enum class SweepMode {
    Lexicographic, // serial reference sweeps, fixed node order
    RedBlack       // two-color sweeps, OpenMP parallel, thread-count independent
};

struct LcpProblem {
    StencilOperator op;
    ScalarField q;
    double tolerance = 1e-10; // max-norm bound on min(w, A*w+q)
    int max_sweeps = 50000;
    double omega = 1.5; // relaxation factor in (0,2)
    SweepMode mode = SweepMode::Lexicographic;

    void validate() const;
};

struct LcpDiagnostics {
    int sweeps = 0;
    double final_residual = 0.0;
    bool converged = false;
    std::vector<double> residual_history; // one entry per convergence check
};

struct LcpResult {
    ScalarField w;
    LcpDiagnostics diagnostics;
};

// Find w >= 0 with A*w + q >= 0 and w*(A*w+q) = 0 nodewise, by projected
// SOR. Deterministic for a fixed sweep mode; throws NonConvergence with the
// final residual if max_sweeps is exhausted. w_init is clamped to >= 0.
LcpResult solve_lcp(const LcpProblem& problem, const ScalarField& w_init);

// Residual actually reported: || min(w, A*w+q) ||_inf over interior nodes.
double lcp_residual(const StencilOperator& op, const ScalarField& q, const ScalarField& w);

} // namespace stopflow

#endif
