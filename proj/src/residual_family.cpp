#include "stopflow/residual_family.hpp"

#include <cmath>

namespace stopflow {

namespace {

// B(u) = (1-u^2)^3 on |u|<1, else 0
inline double bump(double u) {
    const double s = 1.0 - u * u;
    return s > 0.0 ? s * s * s : 0.0;
}
inline double bump_d1(double u) {
    const double s = 1.0 - u * u;
    return s > 0.0 ? -6.0 * u * s * s : 0.0;
}
inline double bump_d2(double u) {
    const double s = 1.0 - u * u;
    return s > 0.0 ? s * (30.0 * u * u - 6.0) : 0.0;
}

constexpr double kBumpD1Max = 1.7173002066537117; // max |B'| = (6/sqrt(5))(4/5)^2
constexpr double kBumpD2Max = 6.0;                // max |B''| at u = 0

} // namespace

double SpaceTimeTestFn::value(double x, double y, double t) const {
    double v = bump((x - center[0]) / width[0]) * bump((t - t_center) / t_width);
    if (dim == 2) v *= bump((y - center[1]) / width[1]);
    return v;
}

double SpaceTimeTestFn::dt(double x, double y, double t) const {
    double v = bump((x - center[0]) / width[0]) * bump_d1((t - t_center) / t_width) / t_width;
    if (dim == 2) v *= bump((y - center[1]) / width[1]);
    return v;
}

double SpaceTimeTestFn::laplacian(double x, double y, double t) const {
    const double bt = bump((t - t_center) / t_width);
    const double ux = (x - center[0]) / width[0];
    if (dim == 1) return bump_d2(ux) / (width[0] * width[0]) * bt;
    const double uy = (y - center[1]) / width[1];
    const double bx = bump(ux), by = bump(uy);
    return bt * (bump_d2(ux) / (width[0] * width[0]) * by +
                 bump_d2(uy) / (width[1] * width[1]) * bx);
}

double SpaceTimeTestFn::max_abs_dt() const { return kBumpD1Max / t_width; }

double SpaceTimeTestFn::max_abs_laplacian() const {
    double m = kBumpD2Max / (width[0] * width[0]);
    if (dim == 2) m += kBumpD2Max / (width[1] * width[1]);
    return m;
}

bool SpaceTimeTestFn::time_support_overlaps(double t0, double t1) const {
    return t_center - t_width < t1 && t_center + t_width > t0;
}

std::vector<SpaceTimeTestFn> residual_test_family(const GridSpec& grid, double t_horizon) {
    std::vector<SpaceTimeTestFn> fam;
    const double T = std::max(t_horizon, 1e-9);

    // time windows: one anchored at t=0, two interior
    struct TW {
        double c, w;
    };
    const std::array<TW, 3> tw{TW{0.0, 0.6 * T}, TW{0.45 * T, 0.45 * T}, TW{0.8 * T, 0.35 * T}};

    const int centers_per_axis = grid.dim == 1 ? 5 : 3;
    for (int scale = 0; scale < 3; ++scale) {
        for (int a = 0; a < centers_per_axis; ++a) {
            const double cx =
                grid.lo[0] + (a + 0.5) * (grid.hi[0] - grid.lo[0]) / centers_per_axis;
            const double wx = (grid.hi[0] - grid.lo[0]) / 4.0 / (1 << scale);
            const int bcount = grid.dim == 1 ? 1 : centers_per_axis;
            for (int b = 0; b < bcount; ++b) {
                SpaceTimeTestFn fn;
                fn.dim = grid.dim;
                fn.center[0] = cx;
                fn.width[0] = wx;
                if (grid.dim == 2) {
                    fn.center[1] =
                        grid.lo[1] + (b + 0.5) * (grid.hi[1] - grid.lo[1]) / centers_per_axis;
                    fn.width[1] = (grid.hi[1] - grid.lo[1]) / 4.0 / (1 << scale);
                }
                for (const auto& t : tw) {
                    SpaceTimeTestFn f = fn;
                    f.t_center = t.c;
                    f.t_width = t.w;
                    f.name = "bump s" + std::to_string(scale) + " c" + std::to_string(a) +
                             (grid.dim == 2 ? "," + std::to_string(b) : "") + " t" +
                             std::to_string(t.c);
                    fam.push_back(std::move(f));
                }
            }
        }
    }
    return fam;
}

} // namespace stopflow
