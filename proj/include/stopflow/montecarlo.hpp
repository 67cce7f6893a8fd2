#ifndef STOPFLOW_MONTECARLO_HPP
#define STOPFLOW_MONTECARLO_HPP

#include <cstdint>
#include <vector>

#include "stopflow/free_target.hpp"
#include "stopflow/grid.hpp"

namespace stopflow {

// Counter-based per-particle stream: state derived from
// (seed, stream tag, particle index) by splitmix64 mixing, so ensembles are
// identical under any scheduling.
class ParticleRng {
public:
    ParticleRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t particle);

    std::uint64_t next_u64();
    double next_unit(); // (0, 1]
    double next_gauss();

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// W_0 ~ mu: 1D inverse CDF over node cells, 2D alias-method cell pick, both
// with uniform jitter inside the chosen cell. Deterministic in (seed, n).
std::vector<std::array<double, 2>> sample_initial(const DensityField& mu, int n,
                                                  std::uint64_t seed);

struct McOptions {
    double t_max = 1e6;                 // hard guard; exceeding it is an error
    std::vector<double> snapshot_times; // occupation histograms, rounded to step grid
    Lagrangian lagrangian = Lagrangian::time_linear();
    bool record_cost = true;
};

struct ParticleEnsemble {
    int n = 0;
    std::uint64_t seed = 0;
    double dt_mc = 0.0;
    CostType cost_type = CostType::TypeI;
    double mass_mu = 0.0;
    GridSpec grid; // histogram grid (the barrier grid)

    std::vector<std::array<double, 2>> start;
    std::vector<std::array<double, 2>> stop;
    std::vector<double> tau;
    std::vector<double> cost_integral; // sum of L(X, t) dt_mc over steps before tau

    std::vector<double> snapshot_times;
    std::vector<std::vector<std::int64_t>> alive_counts; // per snapshot, per node cell
    std::vector<std::int64_t> stop_counts;               // per node cell
};

// Brownian particles with exact Gaussian increments, stopped at the
// barrier: type I at the first step time with t >= s(X), type II (clock
// starting at dt_mc) with t <= s(X); crossings are refined linearly in t.
// instant_stop_prob (type II) is the probability of stopping at t = 0.
ParticleEnsemble simulate_stop(const std::vector<std::array<double, 2>>& starts,
                               const BarrierField& s, CostType cost_type,
                               const DensityField* instant_stop_prob, double dt_mc,
                               std::uint64_t seed, double mass_mu,
                               const McOptions& opts = {});

struct EmpiricalMeasures {
    DensityField nu_hat;
    std::vector<double> times;
    std::vector<DensityField> eta_hat;
};

// Histograms normalized so mass(nu_hat) equals mass_mu exactly.
EmpiricalMeasures empirical_measures(const ParticleEnsemble& ens, const GridSpec& grid);

// Eulerian cost: sum over windows of span * sum L(x, t_mid) eta h^d.
double cost_eval(const std::vector<double>& edges, const std::vector<DensityField>& eta,
                 const Lagrangian& lagrangian);
// Monte Carlo cost: (mass_mu / N) * sum of per-particle cost integrals.
double cost_eval(const ParticleEnsemble& ens);

// W1 distance between the (1D) stopped sample and the normalized reference
// density, via sorted-sample vs quantile matching.
double wasserstein1_1d(std::vector<double> sample, const DensityField& reference);

} // namespace stopflow

#endif
