#include "stopflow/grid.hpp"

#include <algorithm>
#include <cmath>

namespace stopflow {

GridSpec GridSpec::line(double lo, double hi, int n) {
    GridSpec g;
    g.dim = 1;
    g.lo = {lo, 0.0};
    g.hi = {hi, 1.0};
    g.n = {n, 1};
    g.validate();
    return g;
}

GridSpec GridSpec::box(double lo0, double hi0, int n0, double lo1, double hi1, int n1) {
    GridSpec g;
    g.dim = 2;
    g.lo = {lo0, lo1};
    g.hi = {hi0, hi1};
    g.n = {n0, n1};
    g.validate();
    return g;
}

void GridSpec::validate() const {
    if (dim != 1 && dim != 2) throw ValidationError("grid dim must be 1 or 2");
    for (int a = 0; a < dim; ++a) {
        if (n[a] < 3) throw ValidationError("grid needs at least 3 nodes per axis");
        if (!(lo[a] < hi[a])) throw ValidationError("grid lo must be < hi");
        if (!(h(a) > 0.0) || !std::isfinite(h(a))) throw ValidationError("grid spacing must be positive finite");
    }
}

bool GridSpec::same(const GridSpec& o) const {
    if (dim != o.dim) return false;
    for (int a = 0; a < dim; ++a)
        if (lo[a] != o.lo[a] || hi[a] != o.hi[a] || n[a] != o.n[a]) return false;
    return true;
}

bool GridSpec::contains(const std::array<double, 2>& x) const {
    for (int a = 0; a < dim; ++a)
        if (x[a] < lo[a] || x[a] > hi[a]) return false;
    return true;
}

DensityField DensityField::from_fn(const GridSpec& g,
                                   const std::function<double(double, double)>& fn) {
    DensityField f(g);
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            f.at(ix, iy) = fn(g.coord(0, ix), g.dim == 2 ? g.coord(1, iy) : 0.0);
    f.validate();
    return f;
}

void DensityField::validate() const {
    for (double v : values)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ValidationError("density field must be finite and nonnegative");
}

ScalarField ScalarField::from_fn(const GridSpec& g,
                                 const std::function<double(double, double)>& fn) {
    ScalarField f(g);
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            f.at(ix, iy) = fn(g.coord(0, ix), g.dim == 2 ? g.coord(1, iy) : 0.0);
    f.validate();
    return f;
}

void ScalarField::validate() const {
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("scalar field must be finite");
}

void BarrierField::validate() const {
    for (double v : values)
        if (std::isnan(v) || v < 0.0) throw ValidationError("barrier values must be in [0, +inf]");
}

std::int64_t NodeMask::count() const {
    std::int64_t c = 0;
    for (auto b : values) c += b;
    return c;
}

double mass(const DensityField& f) {
    const GridSpec& g = f.grid;
    const double hv = g.cell_volume();
    double s = 0.0;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            s += f.at(ix, iy) * g.weight(ix, iy);
    return s * hv;
}

double integral(const ScalarField& f) {
    const GridSpec& g = f.grid;
    const double hv = g.cell_volume();
    double s = 0.0;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            s += f.at(ix, iy) * g.weight(ix, iy);
    return s * hv;
}

double l1_pos_diff(const DensityField& a, const DensityField& b) {
    if (!a.grid.same(b.grid)) throw GridMismatch("l1_pos_diff: fields on different grids");
    const GridSpec& g = a.grid;
    const double hv = g.cell_volume();
    double s = 0.0;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            s += std::max(a.at(ix, iy) - b.at(ix, iy), 0.0) * g.weight(ix, iy);
    return s * hv;
}

double tv_norm(const DensityField& f) {
    const GridSpec& g = f.grid;
    double s = 0.0;
    const double hx = g.h(0);
    if (g.dim == 1) {
        for (int ix = 0; ix + 1 < g.nx(); ++ix)
            s += std::fabs(f.at(ix + 1) - f.at(ix));
        return s; // h^(d-1) = 1
    }
    const double hy = g.h(1);
    double sx = 0.0, sy = 0.0;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix + 1 < g.nx(); ++ix)
            sx += std::fabs(f.at(ix + 1, iy) - f.at(ix, iy));
    for (int iy = 0; iy + 1 < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix)
            sy += std::fabs(f.at(ix, iy + 1) - f.at(ix, iy));
    return sx * hy + sy * hx;
}

namespace {

template <typename Field>
double interp_impl(const Field& f, const std::array<double, 2>& x, bool inf_conservative) {
    const GridSpec& g = f.grid;
    if (!g.contains(x)) throw ValidationError("interp_eval: point outside grid box");

    auto locate = [&](int axis) {
        const double t = (x[axis] - g.lo[axis]) / g.h(axis);
        int i = static_cast<int>(std::floor(t));
        i = std::clamp(i, 0, g.n[axis] - 2);
        double frac = t - i;
        frac = std::clamp(frac, 0.0, 1.0);
        return std::pair<int, double>(i, frac);
    };

    auto [ix, fx] = locate(0);
    if (g.dim == 1) {
        const double a = f.at(ix), b = f.at(ix + 1);
        if (inf_conservative && (std::isinf(a) || std::isinf(b))) return kInf;
        return a * (1.0 - fx) + b * fx;
    }
    auto [iy, fy] = locate(1);
    const double c00 = f.at(ix, iy), c10 = f.at(ix + 1, iy);
    const double c01 = f.at(ix, iy + 1), c11 = f.at(ix + 1, iy + 1);
    if (inf_conservative &&
        (std::isinf(c00) || std::isinf(c10) || std::isinf(c01) || std::isinf(c11)))
        return kInf;
    return (c00 * (1.0 - fx) + c10 * fx) * (1.0 - fy) +
           (c01 * (1.0 - fx) + c11 * fx) * fy;
}

} // namespace

double interp_eval(const ScalarField& f, const std::array<double, 2>& x) {
    return interp_impl(f, x, false);
}

double interp_eval(const BarrierField& f, const std::array<double, 2>& x) {
    return interp_impl(f, x, true);
}

NodeMask mask_boundary(const NodeMask& m) {
    const GridSpec& g = m.grid;
    NodeMask b(g);
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix) {
            if (!m.at(ix, iy)) continue;
            bool edge = ix == 0 || ix == g.nx() - 1 || (g.dim == 2 && (iy == 0 || iy == g.ny() - 1));
            bool off = edge;
            if (!off && ix > 0 && !m.at(ix - 1, iy)) off = true;
            if (!off && ix + 1 < g.nx() && !m.at(ix + 1, iy)) off = true;
            if (g.dim == 2) {
                if (!off && iy > 0 && !m.at(ix, iy - 1)) off = true;
                if (!off && iy + 1 < g.ny() && !m.at(ix, iy + 1)) off = true;
            }
            if (off) b.set(ix, iy, true);
        }
    return b;
}

double mask_hausdorff(const NodeMask& a, const NodeMask& b) {
    if (!a.grid.same(b.grid)) throw GridMismatch("mask_hausdorff: masks on different grids");
    const GridSpec& g = a.grid;

    auto points_of = [&](const NodeMask& m) {
        std::vector<std::array<double, 2>> p;
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix)
                if (m.at(ix, iy))
                    p.push_back({g.coord(0, ix), g.dim == 2 ? g.coord(1, iy) : 0.0});
        return p;
    };

    const auto ca = a.count(), cb = b.count();
    if (ca == 0 && cb == 0) return 0.0;
    if (ca == 0 || cb == 0) return kInf;

    // Points inside both sets contribute distance 0, so only the set
    // difference matters, and the nearest node of the other set is on
    // its discrete boundary.
    auto one_sided = [&](const NodeMask& from, const NodeMask& to) {
        std::vector<std::array<double, 2>> diff;
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix)
                if (from.at(ix, iy) && !to.at(ix, iy))
                    diff.push_back({g.coord(0, ix), g.dim == 2 ? g.coord(1, iy) : 0.0});
        if (diff.empty()) return 0.0;
        const auto ring = points_of(mask_boundary(to));
        double worst = 0.0;
        for (const auto& p : diff) {
            double best = kInf;
            for (const auto& q : ring) {
                const double dx = p[0] - q[0], dy = p[1] - q[1];
                best = std::min(best, dx * dx + dy * dy);
            }
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(one_sided(a, b), one_sided(b, a));
}

DensityField restrict_to(const DensityField& fine, const GridSpec& coarse) {
    const GridSpec& g = fine.grid;
    if (g.dim != coarse.dim) throw GridMismatch("restrict_to: dimension mismatch");
    for (int a = 0; a < g.dim; ++a)
        if (g.lo[a] != coarse.lo[a] || g.hi[a] != coarse.hi[a])
            throw GridMismatch("restrict_to: boxes differ");

    DensityField out(coarse);
    const double hv_f = g.cell_volume();
    auto nearest = [&](int axis, double x) {
        const int i = static_cast<int>(std::lround((x - coarse.lo[axis]) / coarse.h(axis)));
        return std::clamp(i, 0, coarse.n[axis] - 1);
    };
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix) {
            const double m = fine.at(ix, iy) * g.weight(ix, iy) * hv_f;
            if (m == 0.0) continue;
            const int cx = nearest(0, g.coord(0, ix));
            const int cy = g.dim == 2 ? nearest(1, g.coord(1, iy)) : 0;
            out.at(cx, cy) += m;
        }
    const double hv_c = coarse.cell_volume();
    for (int iy = 0; iy < coarse.ny(); ++iy)
        for (int ix = 0; ix < coarse.nx(); ++ix)
            out.at(ix, iy) /= hv_c * coarse.weight(ix, iy);
    return out;
}

} // namespace stopflow
