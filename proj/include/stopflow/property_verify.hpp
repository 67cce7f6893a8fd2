#ifndef STOPFLOW_PROPERTY_VERIFY_HPP
#define STOPFLOW_PROPERTY_VERIFY_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stopflow/free_target.hpp"
#include "stopflow/grid.hpp"

namespace stopflow {

// Seeded random test instances: a handful of bumps with uniform amplitudes,
// mass-normalized, kept well inside the box so free boundaries stay interior.
struct InstanceGenerator {
    std::uint64_t seed = 1;
    int dim = 1;
    int bumps = 2;
    enum class Shape { Boxes, Cosine } shape = Shape::Boxes;
    double amp_lo = 0.6;
    double amp_hi = 3.0;
    enum class FMode { One, Delta, ChiKc } f_mode = FMode::One;
    double delta = 0.5;
    double h = 1.0 / 32.0;

    GridSpec make_grid() const;
    DensityField make_mu(std::uint64_t trial) const;          // normalized to mass 1
    DensityField add_bumps(const DensityField& base, std::uint64_t trial) const;
    DensityField make_f(const GridSpec& grid) const;
};

struct TrialRecord {
    std::string inputs;
    std::map<std::string, double> measured;
    double bound = 0.0;
    bool pass = false;
    bool nonvacuous = false; // the bounded quantity was strictly positive
    std::string error;       // solver failure, recorded as a failed trial
};

struct TheoremReport {
    std::string theorem;
    std::uint64_t seed = 0;
    std::string slack_formula;
    std::vector<TrialRecord> trials;
    bool pass = false;
    int nonvacuous_count = 0;

    void finalize(); // aggregates pass and the non-vacuity count
};

struct VerifyParams {
    double h = 1.0 / 32.0;
    double dt = 1.0 / 32.0;
    int mc_particles = 200000;
    SolverParams solver;
};

// nu and s comparisons under mu1 <= mu2 (ordered pairs, type I)
TheoremReport check_monotonicity(std::uint64_t seed, int trials,
                                 const VerifyParams& params = {});

// L1 contraction over unordered pairs and the BV bound for constant f
TheoremReport check_contraction_bv(std::uint64_t seed, int trials,
                                   const VerifyParams& params = {});

// agreement of the two target decompositions and the long-time melted set,
// plus interior saturation
TheoremReport check_universality_and_saturation(std::uint64_t seed, int trials,
                                                const VerifyParams& params = {});

// PDE vs Monte Carlo on the closed-form 1D benchmark
TheoremReport check_mc_consistency(std::uint64_t seed, const VerifyParams& params = {});

} // namespace stopflow

#endif
