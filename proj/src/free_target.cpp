#include "stopflow/free_target.hpp"

#include <algorithm>
#include <cmath>

namespace stopflow {

Lagrangian Lagrangian::from_table(std::vector<std::pair<double, double>> t) {
    Lagrangian l;
    l.kind = Kind::Table;
    l.table = std::move(t);
    return l;
}

double Lagrangian::eval(double t) const {
    switch (kind) {
        case Kind::TimeLinear:
            return t;
        case Kind::ExpDecay:
            return std::exp(-t);
        case Kind::Table: {
            if (t <= table.front().first) return table.front().second;
            if (t >= table.back().first) return table.back().second;
            auto it = std::upper_bound(table.begin(), table.end(), t,
                                       [](double v, const auto& e) { return v < e.first; });
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double s = (t - lo.first) / (hi.first - lo.first);
            return lo.second + s * (hi.second - lo.second);
        }
    }
    return 0.0;
}

void Lagrangian::validate(CostType type) const {
    if (kind != Kind::Table) return;
    if (table.size() < 2) throw ValidationError("lagrangian table needs >= 2 entries");
    for (std::size_t i = 0; i + 1 < table.size(); ++i) {
        if (!(table[i].first < table[i + 1].first))
            throw ValidationError("lagrangian table times must increase");
        const double dv = table[i + 1].second - table[i].second;
        if (type == CostType::TypeI && !(dv > 0.0))
            throw ValidationError("type I lagrangian must strictly increase in t");
        if (type == CostType::TypeII && !(dv < 0.0))
            throw ValidationError("type II lagrangian must strictly decrease in t");
    }
    for (const auto& e : table)
        if (e.second < 0.0) throw ValidationError("lagrangian must be nonnegative");
}

double eps_active(const GridSpec& grid, double lcp_tol) {
    const double h = grid.h_min();
    return 10.0 * lcp_tol / (h * h);
}

namespace {

// mu must vanish on the outer two rings; the box truncates free space, so
// data touching it is a setup error, not a solver condition.
void require_support_margin(const DensityField& mu, int margin) {
    const GridSpec& g = mu.grid;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix) {
            const bool inner = ix >= margin && ix < g.nx() - margin &&
                               (g.dim == 1 || (iy >= margin && iy < g.ny() - margin));
            if (!inner && mu.at(ix, iy) != 0.0)
                throw ValidationError("mu must be supported >= 2 cells inside the box");
        }
}

void require_active_margin(const NodeMask& active, int margin) {
    const GridSpec& g = active.grid;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix) {
            const bool inner = ix >= margin && ix < g.nx() - margin &&
                               (g.dim == 1 || (iy >= margin && iy < g.ny() - margin));
            if (!inner && active.at(ix, iy))
                throw DomainTooSmall("free boundary reaches the box; enlarge the domain");
        }
}

struct TargetAssembly {
    ScalarField w0;
    DensityField nu;
    NodeMask positive; // exact LCP activity {w0 > 0}
    LcpDiagnostics lcp;
    double rescale = 1.0;
};

// One obstacle solve plus the target assembly nu = f on {w0>0}, mu off it,
// with the stencil flux of w0 credited to the free-boundary ring. The flux
// credit makes the discrete mass identity exact up to solver tolerance.
TargetAssembly assemble_target(const GridSpec& grid, const DensityField& mu,
                               const DensityField& f, const SolverParams& sp) {
    StencilOperator lap = StencilOperator::neg_laplacian(grid);
    ScalarField q(grid);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = f[i] - mu[i];

    LcpProblem prob{lap, q, sp.lcp_tol, sp.max_sweeps, sp.omega, sp.mode};
    LcpResult sol = solve_lcp(prob, ScalarField::zeros(grid));

    TargetAssembly out;
    out.w0 = std::move(sol.w);
    out.lcp = std::move(sol.diagnostics);

    out.positive = NodeMask(grid);
    for (int iy = 0; iy < grid.ny(); ++iy)
        for (int ix = 0; ix < grid.nx(); ++ix)
            out.positive.set(ix, iy, out.w0.at(ix, iy) > 0.0);
    // Dirichlet truncation is only valid with the free boundary interior;
    // check before the mass assembly, which would silently leak otherwise.
    require_active_margin(out.positive, 2);

    const ScalarField lap_w = apply(lap, out.w0);
    DensityField nu(grid);
    for (int iy = 0; iy < grid.ny(); ++iy)
        for (int ix = 0; ix < grid.nx(); ++ix) {
            const int i = grid.index(ix, iy);
            if (out.positive.at(ix, iy)) {
                nu[i] = f[i];
                continue;
            }
            nu[i] = mu[i];
            bool ring = false;
            if (ix > 0 && out.positive.at(ix - 1, iy)) ring = true;
            if (ix + 1 < grid.nx() && out.positive.at(ix + 1, iy)) ring = true;
            if (grid.dim == 2) {
                if (iy > 0 && out.positive.at(ix, iy - 1)) ring = true;
                if (iy + 1 < grid.ny() && out.positive.at(ix, iy + 1)) ring = true;
            }
            if (ring) {
                // fractional-cell mass: the stencil flux of the positive
                // neighbors; apply() returns -Lap_h w0, hence the sign
                nu[i] += std::max(-lap_w[i], 0.0);
            }
            nu[i] = std::clamp(nu[i], 0.0, std::max(f[i], mu[i]));
        }

    const double m_mu = mass(mu);
    const double m_nu = mass(nu);
    if (!(m_nu > 0.0)) throw NonConvergence("target assembly produced zero mass", 0.0);
    out.rescale = m_mu / m_nu;
    if (std::fabs(out.rescale - 1.0) > 1e-6)
        throw NonConvergence("target mass defect beyond rescale budget: factor " +
                                 std::to_string(out.rescale),
                             std::fabs(out.rescale - 1.0));
    for (auto& v : nu.values) v *= out.rescale;
    out.nu = std::move(nu);
    return out;
}

} // namespace

void ProblemSpec::validate() const {
    grid.validate();
    if (!grid.same(mu.grid) || !grid.same(f.grid))
        throw GridMismatch("problem spec: mu/f grid mismatch");
    mu.validate();
    f.validate();
    lagrangian.validate(cost_type);
    if (!(mass(mu) > 0.0)) throw ValidationError("mu must have positive mass");
    for (double v : f.values)
        if (v > f_cap) throw ValidationError("f exceeds the configured cap");
    require_support_margin(mu, 2);
    if (!(solver.lcp_tol > 0.0)) throw ValidationError("lcp tolerance must be positive");
}

DensityField FreeTargetResult::active_target() const {
    DensityField a(nu.grid);
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = std::max(nu[i] - instant_mass[i], 0.0);
    return a;
}

FreeTargetResult solve_free_target(const ProblemSpec& spec) {
    spec.validate();
    const GridSpec& g = spec.grid;

    TargetAssembly main = assemble_target(g, spec.mu, spec.f, spec.solver);
    require_active_margin(main.positive, 2);

    FreeTargetResult res;
    res.eps = eps_active(g, spec.solver.lcp_tol);
    res.w0 = std::move(main.w0);
    res.lcp = std::move(main.lcp);
    res.mass_rescale = main.rescale;
    res.nu = std::move(main.nu);

    res.E = NodeMask(g);
    res.F = NodeMask(g);
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix) {
            const bool act = res.w0.at(ix, iy) > res.eps;
            res.E.set(ix, iy, act);
            res.F.set(ix, iy, !act && spec.mu.at(ix, iy) > 0.0);
        }

    // instant-stop portion: type I keeps mu wherever the flow never starts;
    // type II drains f ^ mu everywhere at t = 0
    res.instant_mass = DensityField(g);
    if (spec.cost_type == CostType::TypeI) {
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix)
                if (!main.positive.at(ix, iy))
                    res.instant_mass.at(ix, iy) = spec.mu.at(ix, iy);
    } else {
        for (std::size_t i = 0; i < res.instant_mass.size(); ++i)
            res.instant_mass[i] = std::min(spec.f[i], spec.mu[i]);
    }

    if (spec.check_universality) {
        // split route: remove the instantly drained part f ^ mu from both
        // sides and solve again; the targets must coincide
        DensityField mu_t(g), f_t(g);
        for (std::size_t i = 0; i < mu_t.size(); ++i) {
            const double m = std::min(spec.f[i], spec.mu[i]);
            mu_t[i] = spec.mu[i] - m;
            f_t[i] = spec.f[i] - m;
        }
        const double split_mass = mass(mu_t);
        double gap = 0.0;
        if (split_mass > 0.0) {
            TargetAssembly split = assemble_target(g, mu_t, f_t, spec.solver);
            for (std::size_t i = 0; i < split.nu.size(); ++i) {
                const double combined = split.nu[i] + std::min(spec.f[i], spec.mu[i]);
                gap = std::max(gap, std::fabs(combined - res.nu[i]));
            }
        } else {
            // mu <= f everywhere: everything stops instantly, nu == mu
            for (std::size_t i = 0; i < res.nu.size(); ++i)
                gap = std::max(gap, std::fabs(res.nu[i] - spec.mu[i]));
        }
        res.universality_gap = gap;
        if (gap > 1e-6 * (1.0 + spec.f_cap))
            throw NonConvergence("type I/II target decompositions disagree: gap " +
                                     std::to_string(gap),
                                 gap);
    }

    return res;
}

namespace {

double weighted_integral(const DensityField& d, const std::function<double(double, double)>& phi) {
    const GridSpec& g = d.grid;
    const double hv = g.cell_volume();
    double s = 0.0;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            s += phi(g.coord(0, ix), g.dim == 2 ? g.coord(1, iy) : 0.0) *
                 d.at(ix, iy) * g.weight(ix, iy);
    return s * hv;
}

double phi_scale(const GridSpec& g, const std::function<double(double, double)>& phi) {
    double m = 0.0;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            m = std::max(m, std::fabs(phi(g.coord(0, ix), g.dim == 2 ? g.coord(1, iy) : 0.0)));
    return m;
}

} // namespace

SubharmonicReport subharmonic_order_check(const DensityField& mu, const DensityField& nu,
                                          int test_family_size, double tol) {
    if (!mu.grid.same(nu.grid)) throw GridMismatch("subharmonic check: grid mismatch");
    const GridSpec& g = mu.grid;
    const double m_mu = mass(mu), m_nu = mass(nu);
    if (std::fabs(m_mu - m_nu) > 1e-6 * std::max(1.0, m_mu))
        throw ValidationError("subharmonic check: masses differ");

    struct Phi {
        std::string name;
        std::function<double(double, double)> fn;
    };
    std::vector<Phi> family;

    const int k = std::max(2, test_family_size);
    for (int a = 0; a < k; ++a) {
        const double cx = g.lo[0] + (a + 0.5) * (g.hi[0] - g.lo[0]) / k;
        if (g.dim == 1) {
            family.push_back({"|x-(" + std::to_string(cx) + ")|^2",
                              [cx](double x, double) { return (x - cx) * (x - cx); }});
        } else {
            const double cy = g.lo[1] + (a + 0.5) * (g.hi[1] - g.lo[1]) / k;
            family.push_back({"|x-c|^2 c=(" + std::to_string(cx) + "," + std::to_string(cy) + ")",
                              [cx, cy](double x, double y) {
                                  return (x - cx) * (x - cx) + (y - cy) * (y - cy);
                              }});
        }
    }

    const std::vector<std::array<double, 2>> dirs =
        g.dim == 1 ? std::vector<std::array<double, 2>>{{1.0, 0.0}, {-1.0, 0.0}}
                   : std::vector<std::array<double, 2>>{
                         {1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0},
                         {0.7071067811865476, 0.7071067811865476},
                         {-0.7071067811865476, 0.7071067811865476}};
    for (const auto& dir : dirs)
        for (double kmag : {0.5, 2.0}) {
            const double kx = kmag * dir[0], ky = kmag * dir[1];
            family.push_back({"exp(k.x) k=(" + std::to_string(kx) + "," + std::to_string(ky) + ")",
                              [kx, ky](double x, double y) { return std::exp(kx * x + ky * y); }});
        }
    for (const auto& dir : dirs)
        for (double b : {-1.0, 0.0, 1.0})
            family.push_back({"hinge k=(" + std::to_string(dir[0]) + "," + std::to_string(dir[1]) +
                                  ") b=" + std::to_string(b),
                              [dir, b](double x, double y) {
                                  return std::max(0.0, dir[0] * x + dir[1] * y + b);
                              }});

    SubharmonicReport rep;
    rep.min_normalized_gap = kInf;
    rep.pass = true;
    for (const auto& phi : family) {
        SubharmonicEntry e;
        e.phi = phi.name;
        e.gap = weighted_integral(nu, phi.fn) - weighted_integral(mu, phi.fn);
        e.scale = std::max(phi_scale(g, phi.fn), 1e-300);
        e.pass = e.gap >= -tol * e.scale;
        rep.min_normalized_gap = std::min(rep.min_normalized_gap, e.gap / e.scale);
        rep.pass = rep.pass && e.pass;
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

} // namespace stopflow
