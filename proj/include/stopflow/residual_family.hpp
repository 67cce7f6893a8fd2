#ifndef STOPFLOW_RESIDUAL_FAMILY_HPP
#define STOPFLOW_RESIDUAL_FAMILY_HPP

#include <string>
#include <vector>

#include "stopflow/grid.hpp"

namespace stopflow {

// Bump version whenever the family changes; reports embed it so residual
// numbers stay comparable across runs.
constexpr int kResidualFamilyVersion = 1;

// Smooth compactly supported space-time test function: a tensor product of
// (1-u^2)^3 bumps in each space axis and in time. C^2, which is all the
// weak forms need.
struct SpaceTimeTestFn {
    std::string name;
    std::array<double, 2> center{0.0, 0.0};
    std::array<double, 2> width{1.0, 1.0};
    double t_center = 0.0;
    double t_width = 1.0;
    int dim = 1;

    double value(double x, double y, double t) const;
    double dt(double x, double y, double t) const;
    double laplacian(double x, double y, double t) const;

    // analytic sup-norm bounds used to normalize defects
    double max_abs() const { return 1.0; }
    double max_abs_dt() const;
    double max_abs_laplacian() const;

    bool time_support_overlaps(double t0, double t1) const;
};

// Fixed family: spatial bump centers on a coarse sublattice of the box at
// three widths, crossed with three time windows over [0, t_horizon]
// (one of them anchored at t = 0 so the initial term is exercised).
std::vector<SpaceTimeTestFn> residual_test_family(const GridSpec& grid, double t_horizon);

} // namespace stopflow

#endif
