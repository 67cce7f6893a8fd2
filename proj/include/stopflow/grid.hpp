#ifndef STOPFLOW_GRID_HPP
#define STOPFLOW_GRID_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "stopflow/errors.hpp"

namespace stopflow {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Uniform node-centered Cartesian grid in d = 1 or 2. Nodes sit at
// lo + i*h with h = (hi-lo)/(n-1), so lo and hi are both nodes.
struct GridSpec {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    std::array<int, 2> n{2, 1};

    static GridSpec line(double lo, double hi, int n);
    static GridSpec box(double lo0, double hi0, int n0, double lo1, double hi1, int n1);

    double h(int axis) const { return (hi[axis] - lo[axis]) / (n[axis] - 1); }
    double h_min() const { return dim == 1 ? h(0) : std::min(h(0), h(1)); }
    // node-cell volume element h0 (1D) or h0*h1 (2D), before trapezoid weights
    double cell_volume() const { return dim == 1 ? h(0) : h(0) * h(1); }

    int nx() const { return n[0]; }
    int ny() const { return dim == 2 ? n[1] : 1; }
    std::int64_t size() const { return std::int64_t(nx()) * ny(); }

    int index(int ix, int iy = 0) const { return iy * nx() + ix; }
    double coord(int axis, int i) const { return lo[axis] + i * h(axis); }

    // 0.5 per boundary axis index (trapezoid quadrature weight)
    double weight(int ix, int iy = 0) const {
        double w = (ix == 0 || ix == nx() - 1) ? 0.5 : 1.0;
        if (dim == 2) w *= (iy == 0 || iy == ny() - 1) ? 0.5 : 1.0;
        return w;
    }

    bool same(const GridSpec& o) const;
    bool contains(const std::array<double, 2>& x) const;

    void validate() const;
};

namespace detail {
// Shared storage for grid functions. Value checking differs per field type.
struct FieldStorage {
    GridSpec grid;
    std::vector<double> values;

    FieldStorage() = default;
    explicit FieldStorage(const GridSpec& g, double fill = 0.0)
        : grid(g), values(static_cast<std::size_t>(g.size()), fill) {}

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double& at(int ix, int iy = 0) { return values[grid.index(ix, iy)]; }
    double at(int ix, int iy = 0) const { return values[grid.index(ix, iy)]; }
    std::size_t size() const { return values.size(); }
};
} // namespace detail

// Nonnegative grid density (mass per unit volume).
struct DensityField : detail::FieldStorage {
    using detail::FieldStorage::FieldStorage;

    static DensityField zeros(const GridSpec& g) { return DensityField(g, 0.0); }
    // fn is sampled at nodes; negative samples are rejected
    static DensityField from_fn(const GridSpec& g,
                                const std::function<double(double, double)>& fn);
    void validate() const; // all finite, >= 0
};

// Signed grid function (potential differences, LCP unknowns).
struct ScalarField : detail::FieldStorage {
    using detail::FieldStorage::FieldStorage;

    static ScalarField zeros(const GridSpec& g) { return ScalarField(g, 0.0); }
    static ScalarField from_fn(const GridSpec& g,
                               const std::function<double(double, double)>& fn);
    void validate() const; // all finite
};

// Stopping rule s(x) with values in [0, +inf]; +inf marks unreachable nodes.
struct BarrierField : detail::FieldStorage {
    using detail::FieldStorage::FieldStorage;

    static BarrierField zeros(const GridSpec& g) { return BarrierField(g, 0.0); }
    static BarrierField filled(const GridSpec& g, double v) { return BarrierField(g, v); }
    void validate() const; // >= 0, not NaN (+inf allowed)
};

// Boolean node mask (saturated set E, instant-stop set F, ...).
struct NodeMask {
    GridSpec grid;
    std::vector<std::uint8_t> values;

    NodeMask() = default;
    explicit NodeMask(const GridSpec& g, bool fill = false)
        : grid(g), values(static_cast<std::size_t>(g.size()), fill ? 1 : 0) {}

    bool at(int ix, int iy = 0) const { return values[grid.index(ix, iy)] != 0; }
    void set(int ix, int iy, bool b) { values[grid.index(ix, iy)] = b ? 1 : 0; }
    std::int64_t count() const;
};

// --- quadrature and norms -------------------------------------------------

// Trapezoid-weighted total mass: sum v_i * w_i * h^d.
double mass(const DensityField& f);
// Same quadrature applied to a signed field (used for potential integrals).
double integral(const ScalarField& f);

// || (a-b)_+ ||_L1 over the common grid.
double l1_pos_diff(const DensityField& a, const DensityField& b);

// Anisotropic discrete total variation: sum over axes of |forward diff| * h^(d-1).
double tv_norm(const DensityField& f);

// Multilinear interpolation at x (grid box only). Barrier variant is
// conservative: any +inf corner of the containing cell gives +inf.
double interp_eval(const ScalarField& f, const std::array<double, 2>& x);
double interp_eval(const BarrierField& f, const std::array<double, 2>& x);

// Hausdorff distance between two node masks, in physical units (Euclidean
// over node coordinates). Empty-vs-empty is 0, empty-vs-nonempty is +inf.
double mask_hausdorff(const NodeMask& a, const NodeMask& b);

// Mass-preserving aggregation onto a coarser grid over the same box: each
// fine node cell's mass lands on the nearest coarse node.
DensityField restrict_to(const DensityField& fine, const GridSpec& coarse);

// Nodes of the discrete boundary of a mask: in the mask with a face
// neighbor outside (or on the grid edge).
NodeMask mask_boundary(const NodeMask& m);

} // namespace stopflow

#endif
