#include "stopflow/barrier_flow.hpp"

#include <algorithm>
#include <cmath>

#include "stopflow/residual_family.hpp"

namespace stopflow {

DensityField SpaceTimeFlow::eta_between(std::size_t k) const {
    if (k + 1 >= w_snaps.size()) throw ValidationError("eta_between: window out of range");
    const double span = snap_times[k + 1] - snap_times[k];
    DensityField eta(grid);
    const double sign = cost_type == CostType::TypeI ? 1.0 : -1.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const double v = 2.0 * sign * (w_snaps[k][i] - w_snaps[k + 1][i]) / span;
        if (v < -1e-9) throw NonConvergence("eta turned negative: " + std::to_string(v), -v);
        eta[i] = std::max(v, 0.0);
    }
    return eta;
}

NodeMask SpaceTimeFlow::active_at(std::size_t k) const {
    NodeMask m(grid);
    for (int iy = 0; iy < grid.ny(); ++iy)
        for (int ix = 0; ix < grid.nx(); ++ix)
            m.set(ix, iy, w_snaps[k].at(ix, iy) > eps);
    return m;
}

double SpaceTimeFlow::eta_time_mass() const {
    if (w_snaps.size() < 2) return 0.0;
    ScalarField first = w_snaps.front(), last = w_snaps.back();
    return 2.0 * std::fabs(integral(first) - integral(last));
}

namespace {

// crossing time of the eps level between (t0, v0) and (t1, v1)
double level_crossing(double t0, double v0, double t1, double v1, double eps) {
    const double dv = v0 - v1;
    if (dv == 0.0) return t1;
    double s = (v0 - eps) / dv;
    s = std::clamp(s, 0.0, 1.0);
    return t0 + s * (t1 - t0);
}

void check_frame_inactive(const ScalarField& w, double eps) {
    const GridSpec& g = w.grid;
    const int nx = g.nx(), ny = g.ny();
    auto hot = [&](int ix, int iy) {
        if (w.at(ix, iy) > eps) throw DomainTooSmall("active set reached the box frame");
    };
    if (g.dim == 1) {
        for (int r = 0; r < 2; ++r) {
            hot(r, 0);
            hot(nx - 1 - r, 0);
        }
        return;
    }
    for (int r = 0; r < 2; ++r) {
        for (int ix = 0; ix < nx; ++ix) {
            hot(ix, r);
            hot(ix, ny - 1 - r);
        }
        for (int iy = 0; iy < ny; ++iy) {
            hot(r, iy);
            hot(nx - 1 - r, iy);
        }
    }
}

} // namespace

SpaceTimeFlow evolve_type1(const ScalarField& w0, const DensityField& nu, double dt,
                           double t_end, const FlowOptions& opts) {
    if (!(dt > 0.0) || !(t_end > 0.0)) throw ValidationError("evolve_type1: dt, t_end > 0");
    if (!w0.grid.same(nu.grid)) throw GridMismatch("evolve_type1: w0/nu grids differ");
    const GridSpec& g = w0.grid;

    SpaceTimeFlow flow;
    flow.grid = g;
    flow.cost_type = CostType::TypeI;
    flow.dt = dt;
    flow.eps = opts.eps > 0.0 ? opts.eps : eps_active(g, opts.solver.lcp_tol);
    flow.absorb = nu;
    flow.source = DensityField::zeros(g);
    flow.stop_time = BarrierField::filled(g, kInf);
    flow.rho_accum = DensityField::zeros(g);

    const int total_steps = static_cast<int>(std::ceil(t_end / dt - 1e-12));
    const int stride = std::max(1, (total_steps + opts.max_snapshots - 1) / opts.max_snapshots);

    StencilOperator op = StencilOperator::implicit_heat(g, dt);
    ScalarField w = w0;
    for (auto& v : w.values) v = std::max(v, 0.0);

    // cells inactive from the start stop at time zero; absorption mass
    // assigned there (free-boundary ring cells) deposits immediately
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            if (w.at(ix, iy) <= flow.eps) {
                flow.stop_time.at(ix, iy) = 0.0;
                flow.rho_accum.at(ix, iy) = flow.absorb.at(ix, iy);
            }

    flow.snap_times.push_back(0.0);
    flow.w_snaps.push_back(w);

    int calm_steps = 0;
    double t = 0.0;
    for (int n = 0; n < total_steps; ++n) {
        ScalarField q(g);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] = -w[i] + 0.5 * dt * flow.absorb[i];

        LcpProblem step{op, std::move(q), opts.solver.lcp_tol, opts.solver.max_sweeps,
                        opts.solver.omega, opts.solver.mode};
        LcpResult sol;
        try {
            sol = solve_lcp(step, w);
        } catch (NonConvergence& e) {
            throw NonConvergence("type I step " + std::to_string(n + 1) + ": " + e.what(),
                                 e.final_residual);
        }
        flow.total_sweeps += sol.diagnostics.sweeps;
        const double t_next = t + dt;

        double wmax = 0.0;
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                const int i = g.index(ix, iy);
                const double prev = w[i], cur = sol.w[i];
                if (prev > flow.eps && cur <= flow.eps) {
                    flow.stop_time.at(ix, iy) = level_crossing(t, prev, t_next, cur, flow.eps);
                    flow.rho_accum.at(ix, iy) = flow.absorb.at(ix, iy);
                }
                wmax = std::max(wmax, cur);
            }

        w = std::move(sol.w);
        t = t_next;
        ++flow.steps;

        const bool on_stride = ((n + 1) % stride) == 0;
        calm_steps = wmax <= flow.eps ? calm_steps + 1 : 0;
        const bool done = calm_steps >= 3;
        if (on_stride || done || n + 1 == total_steps) {
            flow.snap_times.push_back(t);
            flow.w_snaps.push_back(w);
        }
        if (done) {
            flow.extinct = true;
            break;
        }
    }

    flow.t_final = t;
    flow.completed = flow.extinct;
    if (!flow.extinct && opts.require_extinction)
        throw NonExtinction("type I flow failed to extinguish by t_end = " +
                            std::to_string(t_end));
    return flow;
}

SpaceTimeFlow evolve_type2(const DensityField& mu_active, const DensityField& nu_active,
                           double dt, double t_end, const FlowOptions& opts) {
    if (!(dt > 0.0) || !(t_end > 0.0)) throw ValidationError("evolve_type2: dt, t_end > 0");
    if (!mu_active.grid.same(nu_active.grid))
        throw GridMismatch("evolve_type2: mu/nu grids differ");
    const GridSpec& g = mu_active.grid;

    SpaceTimeFlow flow;
    flow.grid = g;
    flow.cost_type = CostType::TypeII;
    flow.dt = dt;
    flow.eps = opts.eps > 0.0 ? opts.eps : eps_active(g, opts.solver.lcp_tol);
    flow.absorb = nu_active;
    flow.source = mu_active;
    flow.stop_time = BarrierField::filled(g, kInf);
    flow.rho_accum = DensityField::zeros(g);

    const int total_steps = static_cast<int>(std::ceil(t_end / dt - 1e-12));
    const int stride = std::max(1, (total_steps + opts.max_snapshots - 1) / opts.max_snapshots);

    StencilOperator op = StencilOperator::implicit_heat(g, dt);
    ScalarField w = ScalarField::zeros(g);
    std::vector<std::uint8_t> theta(w.size(), 0);

    flow.snap_times.push_back(0.0);
    flow.w_snaps.push_back(w);

    double t = 0.0;
    for (int n = 0; n < total_steps; ++n) {
        ScalarField w_next = w;
        std::vector<std::uint8_t> theta_cur = theta;
        bool settled = false;
        for (int it = 0; it < opts.max_indicator_iters; ++it) {
            ScalarField q(g);
            for (std::size_t i = 0; i < q.size(); ++i)
                q[i] = -w[i] - 0.5 * dt * flow.source[i] +
                       (theta_cur[i] ? 0.5 * dt * flow.absorb[i] : 0.0);
            LcpProblem step{op, std::move(q), opts.solver.lcp_tol, opts.solver.max_sweeps,
                            opts.solver.omega, opts.solver.mode};
            LcpResult sol;
            try {
                sol = solve_lcp(step, w_next);
            } catch (NonConvergence& e) {
                throw NonConvergence("type II step " + std::to_string(n + 1) + ": " + e.what(),
                                     e.final_residual);
            }
            flow.total_sweeps += sol.diagnostics.sweeps;
            w_next = std::move(sol.w);

            // melting is irreversible: the indicator only latches on, which
            // makes the fixed point monotone and finite
            bool changed = false;
            for (std::size_t i = 0; i < w_next.size(); ++i)
                if (!theta_cur[i] && w_next[i] > flow.eps) {
                    theta_cur[i] = 1;
                    changed = true;
                }
            if (!changed) {
                settled = true;
                break;
            }
        }
        // growth is structural for the melting flow; this only removes
        // sweep-tolerance noise
        for (std::size_t i = 0; i < w_next.size(); ++i)
            w_next[i] = std::max(w_next[i], w[i]);
        if (!settled)
            throw NonConvergence("type II indicator loop failed to settle at step " +
                                     std::to_string(n + 1),
                                 0.0);

        const double t_next = t + dt;
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                const int i = g.index(ix, iy);
                if (w[i] <= flow.eps && w_next[i] > flow.eps) {
                    // upward crossing: melt arrival
                    const double dv = w_next[i] - w[i];
                    double s = dv > 0.0 ? (flow.eps - w[i]) / dv : 1.0;
                    flow.stop_time.at(ix, iy) = t + std::clamp(s, 0.0, 1.0) * dt;
                    flow.rho_accum.at(ix, iy) = flow.absorb.at(ix, iy);
                }
            }

        check_frame_inactive(w_next, flow.eps);
        w = std::move(w_next);
        theta = std::move(theta_cur);
        t = t_next;
        ++flow.steps;

        if (((n + 1) % stride) == 0 || n + 1 == total_steps) {
            flow.snap_times.push_back(t);
            flow.w_snaps.push_back(w);
        }
    }

    flow.t_final = t;
    flow.completed = true;
    return flow;
}

BarrierField extract_barrier(const SpaceTimeFlow& flow) {
    if (!flow.completed) throw IncompleteFlow("extract_barrier: flow did not complete");
    const GridSpec& g = flow.grid;
    BarrierField s(g);
    if (flow.cost_type == CostType::TypeI) {
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                const double v = flow.stop_time.at(ix, iy);
                if (std::isinf(v))
                    throw IncompleteFlow("extract_barrier: active cell never extinguished");
                s.at(ix, iy) = v;
            }
    } else {
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix)
                s.at(ix, iy) = flow.stop_time.at(ix, iy); // +inf where never reached
    }
    return s;
}

double eulerian_residual(const SpaceTimeFlow& flow, const DensityField& mu) {
    const GridSpec& g = flow.grid;
    if (!g.same(mu.grid)) throw GridMismatch("eulerian_residual: mu grid differs");
    if (flow.w_snaps.size() < 2) return 0.0;

    const auto family = residual_test_family(g, std::max(flow.t_final, flow.dt));
    const double m_scale = std::max(mass(mu), 1e-12);
    const double hv = g.cell_volume();

    const std::size_t windows = flow.w_snaps.size() - 1;
    std::vector<DensityField> etas;
    etas.reserve(windows);
    for (std::size_t k = 0; k < windows; ++k) etas.push_back(flow.eta_between(k));

    double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(dynamic)
    for (std::size_t fi = 0; fi < family.size(); ++fi) {
        const auto& phi = family[fi];
        double defect = 0.0;
        // volume integral of eta (phi_t + lap phi / 2), window midpoints
        for (std::size_t k = 0; k < windows; ++k) {
            const double t0 = flow.snap_times[k], t1 = flow.snap_times[k + 1];
            if (!phi.time_support_overlaps(t0, t1)) continue;
            const double tm = 0.5 * (t0 + t1), span = t1 - t0;
            const DensityField& eta = etas[k];
            double acc = 0.0;
            for (int iy = 0; iy < g.ny(); ++iy)
                for (int ix = 0; ix < g.nx(); ++ix) {
                    const double e = eta.at(ix, iy);
                    if (e == 0.0) continue;
                    const double x = g.coord(0, ix);
                    const double y = g.dim == 2 ? g.coord(1, iy) : 0.0;
                    acc += e * (phi.dt(x, y, tm) + 0.5 * phi.laplacian(x, y, tm)) *
                           g.weight(ix, iy);
                }
            defect += acc * span * hv;
        }
        // stopped mass: rho is absorb at the recorded crossing times
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                const double r = flow.rho_accum.at(ix, iy);
                if (r == 0.0) continue;
                const double ts = flow.stop_time.at(ix, iy);
                const double x = g.coord(0, ix);
                const double y = g.dim == 2 ? g.coord(1, iy) : 0.0;
                defect -= r * phi.value(x, y, ts) * g.weight(ix, iy) * hv;
            }
        // initial data and, for runs truncated while eta is alive, the
        // terminal trace (approximated by the last window average)
        const DensityField& eta_T = etas.back();
        const double T = flow.snap_times.back();
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                const double x = g.coord(0, ix);
                const double y = g.dim == 2 ? g.coord(1, iy) : 0.0;
                const double wgt = g.weight(ix, iy) * hv;
                const double m = mu.at(ix, iy);
                if (m != 0.0) defect += m * phi.value(x, y, 0.0) * wgt;
                const double eT = eta_T.at(ix, iy);
                if (eT != 0.0) defect -= eT * phi.value(x, y, T) * wgt;
            }

        const double scale =
            m_scale * (phi.max_abs() + phi.max_abs_dt() + 0.5 * phi.max_abs_laplacian());
        worst = std::max(worst, std::fabs(defect) / scale);
    }
    return worst;
}

} // namespace stopflow
