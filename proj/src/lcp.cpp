#include "stopflow/lcp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stopflow {

StencilOperator StencilOperator::neg_laplacian(const GridSpec& g) {
    StencilOperator op;
    op.grid = g;
    op.diag = 0.0;
    for (int a = 0; a < g.dim; ++a) {
        const double inv_h2 = 1.0 / (g.h(a) * g.h(a));
        op.diag += 2.0 * inv_h2;
        op.off[a] = -inv_h2;
    }
    op.validate();
    return op;
}

StencilOperator StencilOperator::implicit_heat(const GridSpec& g, double dt) {
    if (!(dt > 0.0)) throw ValidationError("implicit_heat: dt must be positive");
    StencilOperator op;
    op.grid = g;
    op.diag = 1.0;
    for (int a = 0; a < g.dim; ++a) {
        const double c = 0.5 * dt / (g.h(a) * g.h(a));
        op.diag += 2.0 * c;
        op.off[a] = -c;
    }
    op.validate();
    return op;
}

void StencilOperator::validate() const {
    grid.validate();
    if (!(diag > 0.0)) throw ValidationError("stencil diagonal must be positive");
    double offsum = 0.0;
    for (int a = 0; a < grid.dim; ++a) {
        if (off[a] > 0.0) throw ValidationError("stencil off-diagonals must be <= 0");
        offsum += -2.0 * off[a];
    }
    if (offsum > diag * (1.0 + 1e-12))
        throw ValidationError("stencil must be diagonally dominant");
}

ScalarField apply(const StencilOperator& op, const ScalarField& w) {
    const GridSpec& g = op.grid;
    if (!g.same(w.grid)) throw GridMismatch("apply: operator and field grids differ");
    ScalarField out(g);
    const int nx = g.nx(), ny = g.ny();
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const int i = g.index(ix, iy);
            const bool interior =
                ix > 0 && ix < nx - 1 && (g.dim == 1 || (iy > 0 && iy < ny - 1));
            if (!interior) {
                out[i] = w[i];
                continue;
            }
            double v = op.diag * w[i] + op.off[0] * (w[i - 1] + w[i + 1]);
            if (g.dim == 2) v += op.off[1] * (w[i - nx] + w[i + nx]);
            out[i] = v;
        }
    return out;
}

void LcpProblem::validate() const {
    op.validate();
    if (!op.grid.same(q.grid)) throw GridMismatch("lcp: q grid differs from operator grid");
    if (!(tolerance > 0.0)) throw ValidationError("lcp: tolerance must be positive");
    if (max_sweeps < 1) throw ValidationError("lcp: max_sweeps must be >= 1");
    if (!(omega > 0.0 && omega < 2.0)) throw ValidationError("lcp: omega must be in (0,2)");
}

double lcp_residual(const StencilOperator& op, const ScalarField& q, const ScalarField& w) {
    const GridSpec& g = op.grid;
    const int nx = g.nx(), ny = g.ny();
    double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(static) if (g.size() > 4096)
    for (int iy = 0; iy < ny; ++iy) {
        if (g.dim == 2 && (iy == 0 || iy == ny - 1)) continue;
        for (int ix = 1; ix < nx - 1; ++ix) {
            const int i = g.index(ix, iy);
            double a = op.diag * w[i] + op.off[0] * (w[i - 1] + w[i + 1]);
            if (g.dim == 2) a += op.off[1] * (w[i - nx] + w[i + nx]);
            const double r = std::min(w[i], a + q[i]);
            worst = std::max(worst, std::fabs(r));
        }
    }
    return worst;
}

namespace {

// Projected update with a dead zone: values below kZeroSnap collapse to an
// exact 0.0, so inactive cells compare bitwise across steps and runs.
constexpr double kZeroSnap = 1e-13;

inline double psor_update(double wi, double q, double nbr_sum, double diag, double omega) {
    const double unconstrained = (-q - nbr_sum) / diag;
    const double v = std::max(0.0, wi + omega * (unconstrained - wi));
    return v < kZeroSnap ? 0.0 : v;
}

} // namespace

LcpResult solve_lcp(const LcpProblem& problem, const ScalarField& w_init) {
    problem.validate();
    const GridSpec& g = problem.op.grid;
    if (!g.same(w_init.grid)) throw GridMismatch("lcp: w_init grid differs");

    ScalarField w = w_init;
    const int nx = g.nx(), ny = g.ny();
    // clamp start to the admissible cone and pin boundary rows to 0
    for (auto& v : w.values) v = std::max(v, 0.0);
    for (int ix = 0; ix < nx; ++ix) {
        w.at(ix, 0) = 0.0;
        if (g.dim == 2) w.at(ix, ny - 1) = 0.0;
    }
    if (g.dim == 2)
        for (int iy = 0; iy < ny; ++iy) {
            w.at(0, iy) = 0.0;
            w.at(nx - 1, iy) = 0.0;
        }
    if (g.dim == 1) {
        w.at(0) = 0.0;
        w.at(nx - 1) = 0.0;
    }

    const double d = problem.op.diag, ox = problem.op.off[0], oy = problem.op.off[1];
    const double omega = problem.omega;
    const ScalarField& q = problem.q;

    LcpDiagnostics diag;
    const int iy_begin = g.dim == 2 ? 1 : 0;
    const int iy_end = g.dim == 2 ? ny - 1 : 1;

    auto sweep_lex = [&]() {
        for (int iy = iy_begin; iy < iy_end; ++iy)
            for (int ix = 1; ix < nx - 1; ++ix) {
                const int i = g.index(ix, iy);
                double nbr = ox * (w[i - 1] + w[i + 1]);
                if (g.dim == 2) nbr += oy * (w[i - nx] + w[i + nx]);
                w[i] = psor_update(w[i], q[i], nbr, d, omega);
            }
    };

    // Two-color sweep: nodes of one color only read the other color, so the
    // result is identical for any thread count.
    auto sweep_rb = [&](int color) {
#pragma omp parallel for schedule(static)
        for (int iy = iy_begin; iy < iy_end; ++iy) {
            const int start = 1 + ((iy + color) & 1);
            for (int ix = start; ix < nx - 1; ix += 2) {
                const int i = g.index(ix, iy);
                double nbr = ox * (w[i - 1] + w[i + 1]);
                if (g.dim == 2) nbr += oy * (w[i - nx] + w[i + nx]);
                w[i] = psor_update(w[i], q[i], nbr, d, omega);
            }
        }
    };

    for (int s = 1; s <= problem.max_sweeps; ++s) {
        if (problem.mode == SweepMode::Lexicographic) {
            sweep_lex();
        } else {
            sweep_rb(0);
            sweep_rb(1);
        }
        const double res = lcp_residual(problem.op, q, w);
        diag.residual_history.push_back(res);
        diag.sweeps = s;
        diag.final_residual = res;
        if (res <= problem.tolerance) {
            diag.converged = true;
            break;
        }
    }
    if (!diag.converged) {
        char msg[96];
        std::snprintf(msg, sizeof msg, "projected SOR exhausted %d sweeps, residual %.3e",
                      problem.max_sweeps, diag.final_residual);
        throw NonConvergence(msg, diag.final_residual);
    }

    return LcpResult{std::move(w), std::move(diag)};
}

} // namespace stopflow
