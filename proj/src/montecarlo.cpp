#include "stopflow/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stopflow {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

} // namespace

ParticleRng::ParticleRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t particle) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = a ^ (stream * 0xD6E8FEB86659FD93ULL);
    a = splitmix64(s);
    s = a ^ (particle * 0xA5A5A5A5A5A5A5A5ULL + 0x0123456789ABCDEFULL);
    state_ = splitmix64(s);
}

std::uint64_t ParticleRng::next_u64() { return splitmix64(state_); }

double ParticleRng::next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double ParticleRng::next_gauss() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(kTwoPi * u2);
    has_cached_ = true;
    return r * std::cos(kTwoPi * u2);
}

namespace {

// node cell around node i: [x_i - h/2, x_i + h/2] clipped to the box
inline std::pair<double, double> node_cell(const GridSpec& g, int axis, int i) {
    const double h = g.h(axis), x = g.coord(axis, i);
    return {std::max(x - 0.5 * h, g.lo[axis]), std::min(x + 0.5 * h, g.hi[axis])};
}

inline int nearest_node(const GridSpec& g, int axis, double x) {
    const int i = static_cast<int>(std::lround((x - g.lo[axis]) / g.h(axis)));
    return std::clamp(i, 0, g.n[axis] - 1);
}

} // namespace

std::vector<std::array<double, 2>> sample_initial(const DensityField& mu, int n,
                                                  std::uint64_t seed) {
    const GridSpec& g = mu.grid;
    const double total = mass(mu);
    if (!(total > 0.0)) throw ValidationError("sample_initial: mu has zero mass");
    if (n < 1) throw ValidationError("sample_initial: need at least one particle");

    // per-cell masses with the same trapezoid weights the quadrature uses
    std::vector<double> cell_mass(static_cast<std::size_t>(g.size()));
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            cell_mass[g.index(ix, iy)] = mu.at(ix, iy) * g.weight(ix, iy);

    std::vector<std::array<double, 2>> pts(static_cast<std::size_t>(n));

    if (g.dim == 1) {
        std::vector<double> cdf(cell_mass.size());
        std::partial_sum(cell_mass.begin(), cell_mass.end(), cdf.begin());
        const double norm = cdf.back();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            ParticleRng rng(seed, 1, static_cast<std::uint64_t>(i));
            const double u = rng.next_unit() * norm;
            const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
            const int cell = static_cast<int>(it - cdf.begin());
            const auto [a, b] = node_cell(g, 0, std::min(cell, g.nx() - 1));
            pts[i] = {a + rng.next_unit() * (b - a), 0.0};
        }
        return pts;
    }

    // 2D: Vose alias table over cells
    const std::size_t m = cell_mass.size();
    const double total_w = std::accumulate(cell_mass.begin(), cell_mass.end(), 0.0);
    std::vector<double> prob(m);
    std::vector<std::int64_t> alias(m, 0);
    {
        std::vector<double> scaled(m);
        for (std::size_t i = 0; i < m; ++i) scaled[i] = cell_mass[i] * m / total_w;
        std::vector<std::int64_t> small, large;
        for (std::size_t i = 0; i < m; ++i)
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::int64_t>(i));
        while (!small.empty() && !large.empty()) {
            const auto s = small.back();
            small.pop_back();
            const auto l = large.back();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (auto l : large) prob[l] = 1.0;
        for (auto s : small) prob[s] = 1.0;
    }

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        ParticleRng rng(seed, 1, static_cast<std::uint64_t>(i));
        const std::uint64_t r = rng.next_u64();
        std::size_t cell = static_cast<std::size_t>(r % m);
        if (rng.next_unit() > prob[cell]) cell = static_cast<std::size_t>(alias[cell]);
        const int iy = static_cast<int>(cell) / g.nx();
        const int ix = static_cast<int>(cell) % g.nx();
        const auto [ax, bx] = node_cell(g, 0, ix);
        const auto [ay, by] = node_cell(g, 1, iy);
        pts[i] = {ax + rng.next_unit() * (bx - ax), ay + rng.next_unit() * (by - ay)};
    }
    return pts;
}

ParticleEnsemble simulate_stop(const std::vector<std::array<double, 2>>& starts,
                               const BarrierField& s, CostType cost_type,
                               const DensityField* instant_stop_prob, double dt_mc,
                               std::uint64_t seed, double mass_mu, const McOptions& opts) {
    if (!(dt_mc > 0.0)) throw ValidationError("simulate_stop: dt_mc must be positive");
    if (cost_type == CostType::TypeII && instant_stop_prob == nullptr)
        throw ValidationError("simulate_stop: type II needs instant_stop_prob");
    const GridSpec& g = s.grid;
    const int n = static_cast<int>(starts.size());
    const std::size_t cells = static_cast<std::size_t>(g.size());

    ParticleEnsemble ens;
    ens.n = n;
    ens.seed = seed;
    ens.dt_mc = dt_mc;
    ens.cost_type = cost_type;
    ens.mass_mu = mass_mu;
    ens.grid = g;
    ens.start = starts;
    ens.stop.resize(n);
    ens.tau.resize(n);
    ens.cost_integral.assign(n, 0.0);
    ens.stop_counts.assign(cells, 0);

    // snapshot times snapped onto the step grid
    std::vector<std::int64_t> snap_steps;
    for (double t : opts.snapshot_times) {
        const auto k = static_cast<std::int64_t>(std::llround(t / dt_mc));
        snap_steps.push_back(std::max<std::int64_t>(k, 0));
        ens.snapshot_times.push_back(k * dt_mc);
    }
    ens.alive_counts.assign(snap_steps.size(), std::vector<std::int64_t>(cells, 0));

    const std::int64_t max_steps = static_cast<std::int64_t>(opts.t_max / dt_mc) + 1;
    const double sqrt_dt = std::sqrt(dt_mc);
    const double sign = cost_type == CostType::TypeI ? 1.0 : -1.0;
    const double scan_range = 5.0 * sqrt_dt + s.grid.h(0);
    bool escaped = false;
    bool timed_out = false;

    // 1D: signed distance from x0 to the stopping region {sign (t - s) >= 0}
    // walking in one direction along the piecewise-linear barrier; +inf if
    // none within the scan range
    auto wall_distance_1d = [&](double x0, double t_level, int dir) {
        const GridSpec& gb = s.grid;
        const double h = gb.h(0);
        auto gval = [&](double sx) {
            return std::isinf(sx) ? (cost_type == CostType::TypeI ? -kInf : kInf)
                                  : sign * (t_level - sx);
        };
        double a = x0;
        double ga = gval(interp_eval(s, {x0, 0.0}));
        if (ga >= 0.0) return 0.0;
        // next node in direction dir
        int i = static_cast<int>(std::floor((x0 - gb.lo[0]) / h)) + (dir > 0 ? 1 : 0);
        while (true) {
            i = std::clamp(i, 0, gb.nx() - 1);
            const double b = gb.coord(0, i);
            if (std::fabs(b - x0) > scan_range) return kInf;
            const double gb_v = gval(s.at(i));
            if (gb_v >= 0.0) {
                if (std::isinf(gb_v)) return std::fabs(b - x0); // hard wall at the node
                const double dg = gb_v - ga;
                const double xi = dg > 0.0 ? a + (b - a) * (-ga / dg) : b;
                return std::fabs(xi - x0);
            }
            if (i == 0 || i == gb.nx() - 1) return kInf;
            a = b;
            ga = gb_v;
            i += dir;
        }
    };

#pragma omp parallel for schedule(static) reduction(|| : escaped, timed_out)
    for (int i = 0; i < n; ++i) {
        if (escaped || timed_out) continue;
        ParticleRng rng(seed, 2, static_cast<std::uint64_t>(i));
        std::array<double, 2> x = starts[i];

        // instant stop at t = 0: type I wherever the rule starts at zero,
        // type II by the supplied randomization
        bool stopped = false;
        if (cost_type == CostType::TypeI) {
            if (interp_eval(s, x) <= 0.0) stopped = true;
        } else {
            ScalarField p(instant_stop_prob->grid);
            // cheap nodewise lookup: probabilities are cell quantities
            const int ix = nearest_node(g, 0, x[0]);
            const int iy = g.dim == 2 ? nearest_node(g, 1, x[1]) : 0;
            const double pr = instant_stop_prob->at(ix, iy);
            if (rng.next_unit() <= pr) stopped = true;
        }
        if (stopped) {
            ens.stop[i] = x;
            ens.tau[i] = 0.0;
        }

        // t = 0 snapshots
        for (std::size_t k = 0; k < snap_steps.size(); ++k)
            if (snap_steps[k] == 0 && !stopped) {
                const int ix = nearest_node(g, 0, x[0]);
                const int iy = g.dim == 2 ? nearest_node(g, 1, x[1]) : 0;
#pragma omp atomic
                ens.alive_counts[k][g.index(ix, iy)] += 1;
            }
        if (stopped) {
            const int ix = nearest_node(g, 0, x[0]);
            const int iy = g.dim == 2 ? nearest_node(g, 1, x[1]) : 0;
#pragma omp atomic
            ens.stop_counts[g.index(ix, iy)] += 1;
            continue;
        }

        double t = 0.0;
        // gap(t) = sign * (t - s(X_t)): stopping means gap >= 0
        double gap = sign * (0.0 - interp_eval(s, x));
        std::int64_t step = 0;
        while (true) {
            if (++step > max_steps) {
                timed_out = true;
                break;
            }
            if (opts.record_cost) ens.cost_integral[i] += opts.lagrangian.eval(t) * dt_mc;

            std::array<double, 2> xn = x;
            xn[0] += sqrt_dt * rng.next_gauss();
            if (g.dim == 2) xn[1] += sqrt_dt * rng.next_gauss();
            const double tn = t + dt_mc;
            if (!g.contains(xn)) {
                escaped = true;
                break;
            }
            const double sval = interp_eval(s, xn);
            const double gap_n = sign * (tn - sval);

            bool crossed = gap_n >= 0.0;
            double frac = 1.0;     // stop time, as a fraction of the step
            double frac_pos = 1.0; // stop position, lerp parameter
            if (crossed) {
                if (std::isinf(sval)) {
                    frac = cost_type == CostType::TypeI ? 1.0 : 0.0;
                } else {
                    const double denom = gap_n - gap;
                    frac = denom > 0.0 ? (0.0 - gap) / denom : 1.0;
                    frac = std::clamp(frac, 0.0, 1.0);
                }
                frac_pos = frac;
            }

            // Paths can graze the stopping region between checks; without a
            // bridge correction the stopped law loses an O(sqrt(dt)) band
            // along every steep piece of the barrier.
            std::array<double, 2> wall_stop{0.0, 0.0};
            bool wall_stopped = false;
            if (!crossed && g.dim == 1) {
                // hidden excursion to the spatial stopping set {gap >= 0}:
                // bridge on the distance process, each endpoint measured
                // against the wall at its own time
                for (int dir : {+1, -1}) {
                    const double d0 = wall_distance_1d(x[0], t, dir);
                    if (std::isinf(d0) || d0 == 0.0) continue;
                    const double d1 = wall_distance_1d(xn[0], tn, dir);
                    if (std::isinf(d1)) continue;
                    const double p = std::exp(-2.0 * d0 * d1 / dt_mc);
                    if (rng.next_unit() < p) {
                        crossed = true;
                        wall_stopped = true;
                        frac = d0 / (d0 + d1);
                        wall_stop = {x[0] + dir * d0, 0.0};
                        break;
                    }
                }
            } else if (!crossed && !std::isinf(sval)) {
                // 2D fallback: bridge on the gap process with the local
                // slope over two half-segments
                const std::array<double, 2> xm{0.5 * (x[0] + xn[0]), 0.5 * (x[1] + xn[1])};
                const double sm = interp_eval(s, xm);
                const double gap_m = std::isinf(sm) ? (cost_type == CostType::TypeI ? -kInf : 0.0)
                                                    : sign * (t + 0.5 * dt_mc - sm);
                if (gap_m >= 0.0) {
                    crossed = true;
                    const double denom = gap_m - gap;
                    frac = 0.5 * std::clamp(denom > 0.0 ? -gap / denom : 1.0, 0.0, 1.0);
                    frac_pos = frac;
                } else {
                    double seg2 = (xn[0] - x[0]) * (xn[0] - x[0]) +
                                  (xn[1] - x[1]) * (xn[1] - x[1]);
                    const double s_cur = t - sign * gap;
                    auto bridge_hit = [&](double g0, double g1, double dsq) {
                        if (!(seg2 > 0.0) || std::isinf(g0) || std::isinf(g1)) return false;
                        const double var = 2.0 * dsq * dt_mc / seg2;
                        if (!(var > 0.0)) return false;
                        return rng.next_unit() < std::exp(-2.0 * g0 * g1 / var);
                    };
                    const double a = sm - s_cur, b = sval - sm;
                    if (bridge_hit(gap, gap_m, a * a)) {
                        crossed = true;
                        frac = 0.5 * (gap / (gap + gap_m));
                        frac_pos = frac;
                    } else if (bridge_hit(gap_m, gap_n, b * b)) {
                        crossed = true;
                        frac = 0.5 + 0.5 * (gap_m / (gap_m + gap_n));
                        frac_pos = frac;
                    }
                }
            }

            if (crossed) {
                ens.tau[i] = t + frac * dt_mc;
                std::array<double, 2> xs;
                if (wall_stopped) {
                    xs = wall_stop;
                } else {
                    xs = {x[0] + frac_pos * (xn[0] - x[0]),
                          g.dim == 2 ? x[1] + frac_pos * (xn[1] - x[1]) : 0.0};
                }
                for (int a = 0; a < g.dim; ++a)
                    xs[a] = std::clamp(xs[a], g.lo[a], g.hi[a]);
                ens.stop[i] = xs;
                const int ix = nearest_node(g, 0, ens.stop[i][0]);
                const int iy = g.dim == 2 ? nearest_node(g, 1, ens.stop[i][1]) : 0;
#pragma omp atomic
                ens.stop_counts[g.index(ix, iy)] += 1;
                break;
            }

            x = xn;
            t = tn;
            gap = gap_n;
            for (std::size_t k = 0; k < snap_steps.size(); ++k)
                if (snap_steps[k] == step) {
                    const int ix = nearest_node(g, 0, x[0]);
                    const int iy = g.dim == 2 ? nearest_node(g, 1, x[1]) : 0;
#pragma omp atomic
                    ens.alive_counts[k][g.index(ix, iy)] += 1;
                }
        }
    }

    if (escaped) throw BoxEscape("particle left the grid box; enlarge the domain");
    if (timed_out) throw NonExtinction("particles still alive at t_max");
    return ens;
}

EmpiricalMeasures empirical_measures(const ParticleEnsemble& ens, const GridSpec& grid) {
    EmpiricalMeasures em;
    const double hv = grid.cell_volume();
    auto normalize = [&](const std::vector<std::int64_t>& counts) {
        DensityField f(grid);
        for (int iy = 0; iy < grid.ny(); ++iy)
            for (int ix = 0; ix < grid.nx(); ++ix) {
                const int i = grid.index(ix, iy);
                const double vol = hv * grid.weight(ix, iy);
                f[i] = ens.mass_mu * static_cast<double>(counts[i]) /
                       (static_cast<double>(ens.n) * vol);
            }
        return f;
    };

    // the stopped measure re-bins from the stored stop points, so any
    // histogram resolution over the same box works
    std::vector<std::int64_t> stops(static_cast<std::size_t>(grid.size()), 0);
    for (int i = 0; i < ens.n; ++i) {
        const int ix = nearest_node(grid, 0, ens.stop[i][0]);
        const int iy = grid.dim == 2 ? nearest_node(grid, 1, ens.stop[i][1]) : 0;
        stops[grid.index(ix, iy)] += 1;
    }
    em.nu_hat = normalize(stops);

    // occupation snapshots only exist on the simulation grid
    if (grid.same(ens.grid)) {
        em.times = ens.snapshot_times;
        for (const auto& c : ens.alive_counts) em.eta_hat.push_back(normalize(c));
    } else if (!ens.alive_counts.empty() && !ens.snapshot_times.empty()) {
        // callers wanting eta histograms must use the simulation grid
        em.times.clear();
    }
    return em;
}

double cost_eval(const std::vector<double>& edges, const std::vector<DensityField>& eta,
                 const Lagrangian& lagrangian) {
    if (eta.empty()) return 0.0;
    const GridSpec& g = eta.front().grid;
    const double hv = g.cell_volume();
    double total = 0.0;
    for (std::size_t k = 0; k < eta.size(); ++k) {
        const double span = edges[k + 1] - edges[k];
        const double tm = 0.5 * (edges[k] + edges[k + 1]);
        const double L = lagrangian.eval(tm);
        double acc = 0.0;
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix)
                acc += eta[k].at(ix, iy) * g.weight(ix, iy);
        total += span * L * acc * hv;
    }
    return total;
}

double cost_eval(const ParticleEnsemble& ens) {
    double s = 0.0;
    for (double c : ens.cost_integral) s += c; // fixed order: reproducible
    return ens.mass_mu * s / static_cast<double>(ens.n);
}

double wasserstein1_1d(std::vector<double> sample, const DensityField& reference) {
    if (reference.grid.dim != 1) throw ValidationError("wasserstein1_1d: 1D only");
    if (sample.empty()) return 0.0;
    std::sort(sample.begin(), sample.end());
    const GridSpec& g = reference.grid;

    // piecewise-constant density over node cells -> piecewise-linear CDF
    std::vector<double> cell_lo(g.nx()), cell_hi(g.nx()), cum(g.nx() + 1, 0.0);
    for (int i = 0; i < g.nx(); ++i) {
        auto [a, b] = node_cell(g, 0, i);
        cell_lo[i] = a;
        cell_hi[i] = b;
        cum[i + 1] = cum[i] + reference.at(i) * (b - a);
    }
    const double total = cum.back();
    if (!(total > 0.0)) throw ValidationError("wasserstein1_1d: reference has zero mass");

    const int n = static_cast<int>(sample.size());
    double acc = 0.0;
    int cell = 0;
    for (int i = 0; i < n; ++i) {
        const double target = (i + 0.5) / n * total;
        while (cell + 1 < g.nx() && cum[cell + 1] < target) ++cell;
        const double dm = cum[cell + 1] - cum[cell];
        const double frac = dm > 0.0 ? (target - cum[cell]) / dm : 0.5;
        const double q = cell_lo[cell] + frac * (cell_hi[cell] - cell_lo[cell]);
        acc += std::fabs(sample[i] - q);
    }
    return acc / n;
}

} // namespace stopflow
