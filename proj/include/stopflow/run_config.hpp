#ifndef STOPFLOW_RUN_CONFIG_HPP
#define STOPFLOW_RUN_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "stopflow/free_target.hpp"
#include "stopflow/grid.hpp"

namespace stopflow {

using Json = nlohmann::ordered_json;

// --- field builders shared by presets, tests and the verify harness ------

// box indicator with cell-coverage averaging at the edges: discrete mass is
// exactly height * volume(box)
DensityField box_bump(const GridSpec& g, const std::array<double, 2>& lo,
                      const std::array<double, 2>& hi, double height);
// ball indicator, 4x4 subsampled coverage per node cell
DensityField ball_bump(const GridSpec& g, const std::array<double, 2>& center, double radius,
                       double height);
DensityField cos_bump(const GridSpec& g, const std::array<double, 2>& center,
                      const std::array<double, 2>& halfwidth, double height);

// the closed-form 1D test case: mu = 2 on [-1,1], f = 1, box [-4,4]
struct Benchmark1d {
    ProblemSpec spec;
    // exact continuum answers
    static double w0_exact(double x);
    static double nu_exact(double x); // chi_{[-2,2]}
};
Benchmark1d make_benchmark1d(double h);

// 2D radial example: mu = 4 chi_{B1}, f = 1, box [-4,4]^2
ProblemSpec make_ball2d(double h, const SolverParams& solver = {});

// --- run configuration ----------------------------------------------------

struct NumericsConfig {
    double dt = 1.0 / 64.0;
    double t_end = 8.0;
    double lcp_tol = 1e-10;
    int max_sweeps = 200000;
    double omega = 1.5;
    bool parallel_sweeps = false;
    int max_snapshots = 200;

    SolverParams solver() const;
};

struct McConfig {
    int n_particles = 10000;
    double dt_mc = 1.0 / 1024.0;
    std::uint64_t seed = 42;
    std::vector<double> snapshot_times;
};

struct RunConfig {
    // problem
    GridSpec grid;
    DensityField mu;
    DensityField f;
    CostType cost_type = CostType::TypeI;
    Lagrangian lagrangian = Lagrangian::time_linear();
    NumericsConfig numerics;
    McConfig mc;
    std::string out_dir;
    // simulate-only: barrier source (file) or constant level
    std::optional<std::string> barrier_file;
    std::optional<double> barrier_constant;
    std::optional<std::string> solve_dir; // simulate: artifacts of a solve run
    std::string config_hash;

    ProblemSpec problem_spec() const;
};

// Parses and schema-validates a config document; unknown keys are rejected.
RunConfig parse_run_config(const Json& doc);
RunConfig load_run_config(const std::string& path);

std::uint64_t fnv1a64(const std::string& data);
std::string hash_hex(const std::string& data);

} // namespace stopflow

#endif
