#include "stopflow/stefan.hpp"

#include <algorithm>
#include <cmath>

#include "stopflow/residual_family.hpp"

namespace stopflow {

EtaSeries flow_eta_series(const SpaceTimeFlow& flow) {
    EtaSeries s;
    s.grid = flow.grid;
    s.edges = flow.snap_times;
    for (std::size_t k = 0; k + 1 < flow.w_snaps.size(); ++k)
        s.eta.push_back(flow.eta_between(k));
    s.eta_terminal = s.eta.empty() ? DensityField::zeros(flow.grid) : s.eta.back();
    return s;
}

namespace {

inline double beta_of(double e, double nu) { return std::max(e - nu, 0.0); }

// nodewise solve of e + C*beta(e) = b: linear below nu, affine above
inline double node_solve(double b, double nu, double C) {
    if (b <= nu) return b;
    return (b + C * nu) / (1.0 + C);
}

} // namespace

St2Result st2_enthalpy_solve(const DensityField& mu, const DensityField& nu_weight,
                             double dt, double t_end, const St2Options& opts) {
    if (!(dt > 0.0) || !(t_end > 0.0)) throw ValidationError("st2: dt, t_end > 0");
    if (!mu.grid.same(nu_weight.grid)) throw GridMismatch("st2: mu/nu grids differ");
    const GridSpec& g = mu.grid;
    const int nx = g.nx(), ny = g.ny();

    St2Result res;
    res.grid = g;
    res.dt = dt;
    res.melted = NodeMask(g);
    res.melt_time = BarrierField::filled(g, kInf);

    std::array<double, 2> c{0.5 * dt / (g.h(0) * g.h(0)),
                            g.dim == 2 ? 0.5 * dt / (g.h(1) * g.h(1)) : 0.0};
    const double C = 2.0 * (c[0] + c[1]);

    DensityField e = mu;
    std::vector<double> beta(e.size());
    auto refresh_beta = [&](const DensityField& field) {
        for (std::size_t i = 0; i < field.size(); ++i) beta[i] = beta_of(field[i], nu_weight[i]);
    };

    auto eta_field = [&](const DensityField& field) {
        DensityField out(g);
        for (std::size_t i = 0; i < field.size(); ++i) out[i] = beta_of(field[i], nu_weight[i]);
        return out;
    };

    auto latch = [&](double t_now, double t_prev, const DensityField& e_prev) {
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const int i = g.index(ix, iy);
                const double eta = beta_of(e[i], nu_weight[i]);
                if (eta > opts.eps && !res.melted.at(ix, iy)) {
                    res.melted.set(ix, iy, true);
                    const double eta_prev = beta_of(e_prev[i], nu_weight[i]);
                    const double dv = eta - eta_prev;
                    double frac = dv > 0.0 ? (opts.eps - eta_prev) / dv : 1.0;
                    res.melt_time.at(ix, iy) = t_prev + std::clamp(frac, 0.0, 1.0) * (t_now - t_prev);
                }
            }
    };

    const int total_steps = static_cast<int>(std::ceil(t_end / dt - 1e-12));
    const int stride = std::max(1, (total_steps + opts.max_snapshots - 1) / opts.max_snapshots);

    res.series.grid = g;
    res.series.edges.push_back(0.0);
    std::vector<DensityField> eta_snaps;
    eta_snaps.push_back(eta_field(e));
    latch(0.0, 0.0, e);

    const int iy_begin = g.dim == 2 ? 1 : 0;
    const int iy_end = g.dim == 2 ? ny - 1 : 1;

    double t = 0.0;
    for (int n = 0; n < total_steps; ++n) {
        const DensityField e_prev = e;
        refresh_beta(e);

        bool converged = false;
        int it = 0;
        for (; it < opts.max_gs_iters; ++it) {
            double max_delta = 0.0;
            auto update_node = [&](int ix, int iy) {
                const int i = g.index(ix, iy);
                double nbr = c[0] * (beta[i - 1] + beta[i + 1]);
                if (g.dim == 2) nbr += c[1] * (beta[i - nx] + beta[i + nx]);
                const double b = e_prev[i] + nbr;
                const double enew = node_solve(b, nu_weight[i], C);
                max_delta = std::max(max_delta, std::fabs(enew - e[i]));
                e[i] = enew;
                beta[i] = beta_of(enew, nu_weight[i]);
            };
            if (opts.mode == SweepMode::Lexicographic) {
                for (int iy = iy_begin; iy < iy_end; ++iy)
                    for (int ix = 1; ix < nx - 1; ++ix) update_node(ix, iy);
            } else {
                for (int color = 0; color < 2; ++color) {
                    double local_max = max_delta;
#pragma omp parallel for reduction(max : local_max) schedule(static)
                    for (int iy = iy_begin; iy < iy_end; ++iy) {
                        const int start = 1 + ((iy + color) & 1);
                        for (int ix = start; ix < nx - 1; ix += 2) {
                            const int i = g.index(ix, iy);
                            double nbr = c[0] * (beta[i - 1] + beta[i + 1]);
                            if (g.dim == 2) nbr += c[1] * (beta[i - nx] + beta[i + nx]);
                            const double b = e_prev[i] + nbr;
                            const double enew = node_solve(b, nu_weight[i], C);
                            local_max = std::max(local_max, std::fabs(enew - e[i]));
                            e[i] = enew;
                            beta[i] = beta_of(enew, nu_weight[i]);
                        }
                    }
                    max_delta = local_max;
                }
            }
            ++res.total_sweeps;
            if (max_delta <= opts.gs_tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw NonConvergence("st2 enthalpy sweeps failed to settle at step " +
                                     std::to_string(n + 1),
                                 0.0);

        const double t_next = t + dt;
        latch(t_next, t, e_prev);

        // growing melted set must stay clear of the box frame
        for (int r = 0; r < 2; ++r) {
            if (g.dim == 1) {
                if (res.melted.at(r, 0) || res.melted.at(nx - 1 - r, 0))
                    throw DomainTooSmall("melted set reached the box frame");
            } else {
                for (int ix = 0; ix < nx; ++ix)
                    if (res.melted.at(ix, r) || res.melted.at(ix, ny - 1 - r))
                        throw DomainTooSmall("melted set reached the box frame");
                for (int iy = 0; iy < ny; ++iy)
                    if (res.melted.at(r, iy) || res.melted.at(nx - 1 - r, iy))
                        throw DomainTooSmall("melted set reached the box frame");
            }
        }

        t = t_next;
        ++res.steps;
        if (((n + 1) % stride) == 0 || n + 1 == total_steps) {
            res.series.edges.push_back(t);
            eta_snaps.push_back(eta_field(e));
        }
    }

    res.t_final = t;
    res.e_final = e;
    DensityField eta_end = eta_field(e);
    for (double v : eta_end.values) res.max_eta_final = std::max(res.max_eta_final, v);

    // interval fields: average of the bracketing snapshots
    for (std::size_t k = 0; k + 1 < eta_snaps.size(); ++k) {
        DensityField avg(g);
        for (std::size_t i = 0; i < avg.size(); ++i)
            avg[i] = 0.5 * (eta_snaps[k][i] + eta_snaps[k + 1][i]);
        res.series.eta.push_back(std::move(avg));
    }
    return res;
}

St2Result st2_long_time(const DensityField& mu, const DensityField& nu_weight, double dt,
                        double t0, const St2Options& opts) {
    double mu_max = 0.0;
    for (double v : mu.values) mu_max = std::max(mu_max, v);
    std::int64_t prev_count = -1;
    for (double T = t0; T <= 4096.0 * t0; T *= 2.0) {
        St2Result r = st2_enthalpy_solve(mu, nu_weight, dt, T, opts);
        const std::int64_t count = r.melted.count();
        if (count == prev_count && r.max_eta_final <= 1e-3 * std::max(mu_max, 1e-12))
            return r;
        prev_count = count;
    }
    throw NonConvergence("st2_long_time: melted set did not settle", 0.0);
}

double stefan_weak_residual(const EtaSeries& series, const DensityField& nu_weight,
                            const DensityField& eta0, const NodeMask& E0,
                            const BarrierField& transition_time, StefanVariant variant) {
    const GridSpec& g = series.grid;
    if (!g.same(nu_weight.grid) || !g.same(eta0.grid) || !g.same(transition_time.grid))
        throw GridMismatch("stefan_weak_residual: grid mismatch");
    if (series.eta.empty()) return 0.0;

    const double T = series.edges.back();
    const auto family = residual_test_family(g, std::max(T, 1e-9));
    const double hv = g.cell_volume();
    const double m_scale = std::max(mass(eta0) + mass(nu_weight), 1e-12);

    double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(dynamic)
    for (std::size_t fi = 0; fi < family.size(); ++fi) {
        const auto& phi = family[fi];
        double defect = 0.0;
        // int int eta (phi_t + lap phi / 2)
        for (std::size_t k = 0; k < series.eta.size(); ++k) {
            const double t0 = series.edges[k], t1 = series.edges[k + 1];
            if (!phi.time_support_overlaps(t0, t1)) continue;
            const double tm = 0.5 * (t0 + t1), span = t1 - t0;
            const DensityField& eta = series.eta[k];
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
        // sign of the latent term: g = eta + sigma nu chi_{eta>0}
        const double sigma = variant == StefanVariant::St1 ? -1.0 : 1.0;
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                const double x = g.coord(0, ix);
                const double y = g.dim == 2 ? g.coord(1, iy) : 0.0;
                const double wgt = g.weight(ix, iy) * hv;
                const double nu = nu_weight.at(ix, iy);
                const double tt = transition_time.at(ix, iy);

                // sigma nu int_0^T chi phi_t dt, exact through the
                // per-cell transition time
                if (nu != 0.0) {
                    if (variant == StefanVariant::St1) {
                        // chi = 1 on [0, min(s,T))
                        if (E0.at(ix, iy)) {
                            const double ts = std::min(tt, T);
                            defect += sigma * nu *
                                      (phi.value(x, y, ts) - phi.value(x, y, 0.0)) * wgt;
                        }
                    } else {
                        // chi = 1 on [melt, T]
                        if (tt <= T)
                            defect += sigma * nu *
                                      (phi.value(x, y, T) - phi.value(x, y, tt)) * wgt;
                    }
                }

                // terminal and initial traces of g
                const bool active_T = variant == StefanVariant::St1 ? (E0.at(ix, iy) && tt > T)
                                                                    : (tt <= T);
                const double etaT =
                    series.eta_terminal.values.empty() ? 0.0 : series.eta_terminal.at(ix, iy);
                const double gT = etaT + (active_T ? sigma * nu : 0.0);
                defect -= gT * phi.value(x, y, T) * wgt;
                const double g0 = eta0.at(ix, iy) + (E0.at(ix, iy) ? sigma * nu : 0.0);
                defect += g0 * phi.value(x, y, 0.0) * wgt;
            }

        const double scale =
            m_scale * (phi.max_abs() + phi.max_abs_dt() + 0.5 * phi.max_abs_laplacian());
        worst = std::max(worst, std::fabs(defect) / scale);
    }
    return worst;
}

St1Bundle assemble_st1_solution(const ProblemSpec& spec, double dt, double t_end,
                                const FlowOptions& flow_opts) {
    if (spec.cost_type != CostType::TypeI)
        throw ValidationError("assemble_st1_solution expects a type I problem");

    St1Bundle b;
    b.target = solve_free_target(spec);
    const GridSpec& g = spec.grid;

    DensityField nu_active = b.target.active_target();
    DensityField mu_active(g);
    for (std::size_t i = 0; i < mu_active.size(); ++i)
        mu_active[i] = std::max(spec.mu[i] - b.target.instant_mass[i], 0.0);

    FlowOptions fo = flow_opts;
    if (fo.eps <= 0.0) fo.eps = b.target.eps;
    fo.solver = spec.solver;
    b.flow = evolve_type1(b.target.w0, nu_active, dt, t_end, fo);
    b.s = extract_barrier(b.flow);
    b.series = flow_eta_series(b.flow);

    b.report.mass_mu = mass(spec.mu);
    b.report.mass_nu = mass(b.target.nu);
    b.report.mass_rho = mass(b.flow.rho_accum);
    b.report.eta_time_mass = b.flow.eta_time_mass();
    ScalarField w0pos = b.target.w0;
    for (auto& v : w0pos.values) v = std::max(v, 0.0);
    b.report.twice_w0_integral = 2.0 * integral(w0pos);
    double ext = 0.0;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            if (b.target.E.at(ix, iy)) ext = std::max(ext, b.s.at(ix, iy));
    b.report.extinction_time = ext;
    b.report.eulerian_defect = eulerian_residual(b.flow, mu_active);
    b.report.stefan_defect = stefan_weak_residual(b.series, nu_active, mu_active,
                                                  b.target.E, b.flow.stop_time,
                                                  StefanVariant::St1);
    b.report.subharmonic_pass = subharmonic_order_check(spec.mu, b.target.nu).pass;

    // f = chi_{K^c} runs: K = {f = 0} containing supp mu. The target must
    // vanish on K and the active set must persist exactly on K.
    NodeMask K(g);
    bool has_K = false, mu_inside_K = true;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix) {
            const bool zero_f = spec.f.at(ix, iy) == 0.0;
            K.set(ix, iy, zero_f);
            if (zero_f) has_K = true;
            if (!zero_f && spec.mu.at(ix, iy) > 0.0) mu_inside_K = false;
        }
    if (has_K && mu_inside_K) {
        double nu_on_K = 0.0;
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix)
                if (K.at(ix, iy)) nu_on_K = std::max(nu_on_K, b.target.nu.at(ix, iy));
        b.report.nu_on_K = nu_on_K;

        // persistent active set: intersection of snapshot active sets up to
        // a horizon where the amplitude over K still dominates eps
        auto cap_gap = [&](double frac) {
            double t_cap = frac * b.flow.t_final;
            NodeMask inter(g, true);
            for (std::size_t k = 0; k < b.flow.w_snaps.size(); ++k) {
                if (b.flow.snap_times[k] > t_cap) break;
                double max_on_K = 0.0;
                for (int iy = 0; iy < g.ny(); ++iy)
                    for (int ix = 0; ix < g.nx(); ++ix)
                        if (K.at(ix, iy))
                            max_on_K = std::max(max_on_K, b.flow.w_snaps[k].at(ix, iy));
                if (max_on_K < 10.0 * b.flow.eps) break;
                NodeMask act = b.flow.active_at(k);
                for (std::size_t i = 0; i < inter.values.size(); ++i)
                    inter.values[i] = inter.values[i] && act.values[i];
            }
            return mask_hausdorff(inter, K);
        };
        b.report.K_gap_h1 = cap_gap(0.35);
        b.report.K_gap_h2 = cap_gap(0.7);
    }
    return b;
}

} // namespace stopflow
