#include "stopflow/cli_commands.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "stopflow/barrier_flow.hpp"
#include "stopflow/field_io.hpp"
#include "stopflow/montecarlo.hpp"
#include "stopflow/property_verify.hpp"
#include "stopflow/residual_family.hpp"
#include "stopflow/run_config.hpp"
#include "stopflow/stefan.hpp"
#include "stopflow/version.hpp"

namespace stopflow {

namespace fs = std::filesystem;

namespace {

Json runtime_metadata(const std::string& config_hash) {
    Json m;
    m["version"] = kVersion;
    m["config_hash"] = config_hash;
#ifdef _OPENMP
    m["threads"] = omp_get_max_threads();
#else
    m["threads"] = 1;
#endif
    const char* env = std::getenv("OMP_NUM_THREADS");
    m["omp_num_threads_env"] = env ? env : "";
    m["residual_family_version"] = kResidualFamilyVersion;
    return m;
}

void write_json(const fs::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

// refuse to overwrite artifacts that came from a different config
void guard_out_dir(const fs::path& dir, const std::string& config_hash) {
    const fs::path marker = dir / "config_hash.txt";
    if (fs::exists(marker)) {
        std::ifstream in(marker);
        std::string existing;
        in >> existing;
        if (!existing.empty() && existing != config_hash)
            throw ValidationError("output dir " + dir.string() +
                                  " holds artifacts of a different config (hash " + existing +
                                  "); refusing to overwrite");
    }
    fs::create_directories(dir);
    std::ofstream out(marker);
    out << config_hash << '\n';
}

int classify(const Error& e) {
    return dynamic_cast<const ValidationError*>(&e) != nullptr ||
                   dynamic_cast<const GridMismatch*>(&e) != nullptr
               ? 2
               : 3;
}

void dump_eta_series(const fs::path& dir, const EtaSeries& series, Json& manifest) {
    const std::size_t max_files = 24;
    const std::size_t stride = std::max<std::size_t>(1, series.eta.size() / max_files);
    Json entries = Json::array();
    for (std::size_t k = 0; k < series.eta.size(); k += stride) {
        char name[32];
        std::snprintf(name, sizeof name, "eta_%04zu.csv", k);
        write_field_csv((dir / name).string(), series.eta[k]);
        Json e;
        e["t_mid"] = 0.5 * (series.edges[k] + series.edges[k + 1]);
        e["t_lo"] = series.edges[k];
        e["t_hi"] = series.edges[k + 1];
        e["file"] = name;
        entries.push_back(e);
    }
    manifest["snapshots"] = entries;
}

DensityField instant_stop_probability(const ProblemSpec& spec) {
    DensityField p(spec.grid);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double mu = spec.mu[i];
        p[i] = mu > 0.0 ? std::min(spec.f[i], mu) / mu : 0.0;
    }
    return p;
}

} // namespace

int cmd_solve(const std::string& config_path, const std::optional<std::string>& out_dir) {
    RunConfig rc;
    fs::path dir;
    try {
        rc = load_run_config(config_path);
        dir = out_dir.value_or(rc.out_dir);
        if (dir.empty()) throw ValidationError("no output directory configured");
        guard_out_dir(dir, rc.config_hash);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    Json report = runtime_metadata(rc.config_hash);
    report["command"] = "solve";
    report["cost_type"] = rc.cost_type == CostType::TypeI ? "type1" : "type2";
    report["dt"] = rc.numerics.dt;
    report["t_end"] = rc.numerics.t_end;
    report["error"] = nullptr;

    try {
        ProblemSpec spec = rc.problem_spec();
        const double dt = rc.numerics.dt, t_end = rc.numerics.t_end;

        if (rc.cost_type == CostType::TypeI) {
            FlowOptions fo;
            fo.solver = spec.solver;
            fo.max_snapshots = rc.numerics.max_snapshots;
            St1Bundle bundle = assemble_st1_solution(spec, dt, t_end, fo);

            write_field_csv((dir / "w0.csv").string(), bundle.target.w0);
            write_field_csv((dir / "nu.csv").string(), bundle.target.nu);
            write_mask_csv((dir / "E.csv").string(), bundle.target.E);
            write_mask_csv((dir / "F.csv").string(), bundle.target.F);
            write_field_csv((dir / "s.csv").string(), bundle.s);
            write_field_csv((dir / "instant_mass.csv").string(), bundle.target.instant_mass);

            Json manifest = runtime_metadata(rc.config_hash);
            dump_eta_series(dir, bundle.series, manifest);
            write_json(dir / "manifest.json", manifest);

            report["mass_mu"] = bundle.report.mass_mu;
            report["mass_nu"] = bundle.report.mass_nu;
            report["mass_rho"] = bundle.report.mass_rho;
            report["mass_rescale"] = bundle.target.mass_rescale;
            report["eps_active"] = bundle.target.eps;
            report["universality_gap"] = bundle.target.universality_gap;
            report["extinction_time"] = bundle.report.extinction_time;
            report["eta_time_mass"] = bundle.report.eta_time_mass;
            report["twice_w0_integral"] = bundle.report.twice_w0_integral;
            report["eulerian_defect"] = bundle.report.eulerian_defect;
            report["stefan_defect"] = bundle.report.stefan_defect;
            report["subharmonic_pass"] = bundle.report.subharmonic_pass;
            report["lcp_sweeps"] = bundle.target.lcp.sweeps;
            report["lcp_residual"] = bundle.target.lcp.final_residual;
            report["flow_steps"] = bundle.flow.steps;
            report["flow_sweeps"] = bundle.flow.total_sweeps;
            report["cost_eulerian"] =
                cost_eval(bundle.series.edges, bundle.series.eta, spec.lagrangian);
            if (bundle.report.nu_on_K) report["nu_on_K"] = *bundle.report.nu_on_K;
            if (bundle.report.K_gap_h1) report["K_gap_h1"] = *bundle.report.K_gap_h1;
            if (bundle.report.K_gap_h2) report["K_gap_h2"] = *bundle.report.K_gap_h2;
        } else {
            FreeTargetResult ft = solve_free_target(spec);
            DensityField mu_act(spec.grid), nu_act = ft.active_target();
            for (std::size_t i = 0; i < mu_act.size(); ++i)
                mu_act[i] = std::max(spec.mu[i] - ft.instant_mass[i], 0.0);

            FlowOptions fo;
            fo.solver = spec.solver;
            fo.max_snapshots = rc.numerics.max_snapshots;
            fo.eps = ft.eps;
            SpaceTimeFlow flow = evolve_type2(mu_act, nu_act, dt, t_end, fo);
            BarrierField s = extract_barrier(flow);
            EtaSeries series = flow_eta_series(flow);

            write_field_csv((dir / "w0.csv").string(), ft.w0);
            write_field_csv((dir / "nu.csv").string(), ft.nu);
            write_mask_csv((dir / "E.csv").string(), ft.E);
            write_field_csv((dir / "s.csv").string(), s);
            write_field_csv((dir / "instant_mass.csv").string(), ft.instant_mass);
            write_field_csv((dir / "instant_prob.csv").string(),
                            instant_stop_probability(spec));

            Json manifest = runtime_metadata(rc.config_hash);
            dump_eta_series(dir, series, manifest);
            write_json(dir / "manifest.json", manifest);

            double gap = 0.0;
            const ScalarField& wT = flow.w_snaps.back();
            for (std::size_t i = 0; i < wT.size(); ++i)
                gap = std::max(gap, std::fabs(wT[i] - ft.w0[i]));

            report["mass_mu"] = mass(spec.mu);
            report["mass_nu"] = mass(ft.nu);
            report["mass_rho"] = mass(flow.rho_accum);
            report["mass_rescale"] = ft.mass_rescale;
            report["eps_active"] = ft.eps;
            report["universality_gap"] = ft.universality_gap;
            report["w_vs_w0_gap"] = gap;
            report["eulerian_defect"] = eulerian_residual(flow, mu_act);
            report["flow_steps"] = flow.steps;
            report["flow_sweeps"] = flow.total_sweeps;
            report["cost_eulerian"] = cost_eval(series.edges, series.eta, spec.lagrangian);
        }
    } catch (const Error& e) {
        report["error"] = e.name();
        report["error_detail"] = e.what();
        write_json(dir / "report.json", report);
        std::cerr << "error: " << e.what() << '\n';
        return classify(e);
    }

    write_json(dir / "report.json", report);
    return 0;
}

int cmd_simulate(const std::string& config_path, const std::optional<std::string>& out_dir,
                 std::optional<std::uint64_t> seed) {
    RunConfig rc;
    fs::path dir;
    BarrierField s;
    std::optional<DensityField> instant_prob;
    std::optional<DensityField> nu_ref;
    Json solve_report;
    try {
        rc = load_run_config(config_path);
        if (seed) rc.mc.seed = *seed;
        dir = out_dir.value_or(rc.out_dir);
        if (dir.empty()) throw ValidationError("no output directory configured");

        if (rc.solve_dir) {
            const fs::path sd = *rc.solve_dir;
            if (!fs::exists(sd / "s.csv"))
                throw ValidationError("barrier artifact missing: " + (sd / "s.csv").string());
            s = read_barrier_csv((sd / "s.csv").string());
            if (fs::exists(sd / "nu.csv")) nu_ref = read_density_csv((sd / "nu.csv").string());
            if (rc.cost_type == CostType::TypeII) {
                if (!fs::exists(sd / "instant_prob.csv"))
                    throw ValidationError("type II simulation needs instant_prob.csv");
                instant_prob = read_density_csv((sd / "instant_prob.csv").string());
            }
            if (fs::exists(sd / "report.json")) {
                std::ifstream in(sd / "report.json");
                solve_report = Json::parse(in, nullptr, false);
            }
        } else if (rc.barrier_file) {
            if (!fs::exists(*rc.barrier_file))
                throw ValidationError("barrier artifact missing: " + *rc.barrier_file);
            s = read_barrier_csv(*rc.barrier_file);
        } else if (rc.barrier_constant) {
            s = BarrierField::filled(rc.grid, *rc.barrier_constant);
        } else {
            throw ValidationError("simulate needs 'barrier' or 'solve_dir'");
        }
        if (!s.grid.same(rc.grid))
            throw ValidationError("barrier grid differs from the problem grid");
        if (rc.cost_type == CostType::TypeII && !instant_prob)
            instant_prob = DensityField::zeros(rc.grid);
        guard_out_dir(dir, rc.config_hash);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    Json report = runtime_metadata(rc.config_hash);
    report["command"] = "simulate";
    report["seed"] = rc.mc.seed;
    report["n_particles"] = rc.mc.n_particles;
    report["dt_mc"] = rc.mc.dt_mc;
    report["error"] = nullptr;

    try {
        auto starts = sample_initial(rc.mu, rc.mc.n_particles, rc.mc.seed);
        McOptions mo;
        mo.snapshot_times = rc.mc.snapshot_times;
        mo.lagrangian = rc.lagrangian;
        double s_max = 0.0;
        for (double v : s.values)
            if (!std::isinf(v)) s_max = std::max(s_max, v);
        mo.t_max = std::max(4.0 * s_max + 1.0, 16.0);

        ParticleEnsemble ens =
            simulate_stop(starts, s, rc.cost_type,
                          instant_prob ? &*instant_prob : nullptr, rc.mc.dt_mc, rc.mc.seed,
                          mass(rc.mu), mo);
        EmpiricalMeasures em = empirical_measures(ens, rc.grid);

        // ensemble summary: one row per particle
        {
            std::ofstream out(dir / "ensemble.csv");
            out << (rc.grid.dim == 1 ? "# start,stop,tau\n" : "# x0,y0,x1,y1,tau\n");
            for (int i = 0; i < ens.n; ++i) {
                if (rc.grid.dim == 1)
                    out << format_double(ens.start[i][0]) << ',' << format_double(ens.stop[i][0])
                        << ',' << format_double(ens.tau[i]) << '\n';
                else
                    out << format_double(ens.start[i][0]) << ',' << format_double(ens.start[i][1])
                        << ',' << format_double(ens.stop[i][0]) << ','
                        << format_double(ens.stop[i][1]) << ',' << format_double(ens.tau[i])
                        << '\n';
            }
        }
        write_field_csv((dir / "nu_hat.csv").string(), em.nu_hat);
        for (std::size_t k = 0; k < em.eta_hat.size(); ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "eta_hat_%04zu.csv", k);
            write_field_csv((dir / name).string(), em.eta_hat[k]);
        }

        report["mass_nu_hat"] = mass(em.nu_hat);
        report["cost_mc"] = cost_eval(ens);

        Json consistency;
        consistency["n"] = ens.n;
        if (nu_ref) {
            // compare densities on 1/16 cells; finer histograms drown in
            // per-cell counting noise
            GridSpec cmp;
            const int nc0 = static_cast<int>((rc.grid.hi[0] - rc.grid.lo[0]) * 16) + 1;
            if (rc.grid.dim == 1)
                cmp = GridSpec::line(rc.grid.lo[0], rc.grid.hi[0], nc0);
            else
                cmp = GridSpec::box(rc.grid.lo[0], rc.grid.hi[0], nc0, rc.grid.lo[1],
                                    rc.grid.hi[1],
                                    static_cast<int>((rc.grid.hi[1] - rc.grid.lo[1]) * 16) + 1);
            EmpiricalMeasures em_cmp = empirical_measures(ens, cmp);
            DensityField ref_cmp = restrict_to(*nu_ref, cmp);
            const double l1 =
                l1_pos_diff(em_cmp.nu_hat, ref_cmp) + l1_pos_diff(ref_cmp, em_cmp.nu_hat);
            consistency["l1_nu_hat_vs_nu"] = l1;
            consistency["l1_grid_h"] = cmp.h(0);
            bool pass = l1 <= 0.05;
            if (rc.grid.dim == 1) {
                std::vector<double> xs(ens.stop.size());
                for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = ens.stop[i][0];
                const double w1 = wasserstein1_1d(xs, *nu_ref);
                consistency["w1"] = w1;
                pass = pass && w1 <= 0.03;
            }
            if (solve_report.is_object() && solve_report.contains("cost_eulerian") &&
                solve_report.contains("dt")) {
                const double cost_e = solve_report["cost_eulerian"].get<double>();
                const double dt_pde = solve_report["dt"].get<double>();
                const double h = rc.grid.h_min();
                double mean = 0.0;
                for (double c : ens.cost_integral) mean += c;
                mean /= ens.n;
                double var = 0.0;
                for (double c : ens.cost_integral) var += (c - mean) * (c - mean);
                var /= std::max(ens.n - 1, 1);
                const double sigma_hat = ens.mass_mu * std::sqrt(var / ens.n);
                const double gap = std::fabs(cost_e - cost_eval(ens));
                consistency["cost_eulerian"] = cost_e;
                consistency["cost_gap"] = gap;
                consistency["sigma_hat"] = sigma_hat;
                const double budget = 3.0 * (sigma_hat + h + dt_pde);
                consistency["cost_budget"] = budget;
                pass = pass && gap <= budget;

                // stop-on-barrier residual fraction
                const double slack = rc.mc.dt_mc + 4.0 * h + dt_pde;
                std::int64_t ok = 0;
                for (int i = 0; i < ens.n; ++i) {
                    const double sv = interp_eval(s, ens.stop[i]);
                    const double res = std::isinf(sv) ? 0.0 : std::fabs(ens.tau[i] - sv);
                    if (res <= slack) ++ok;
                }
                const double frac = static_cast<double>(ok) / ens.n;
                consistency["stop_on_barrier_frac"] = frac;
                consistency["stop_slack"] = slack;
                pass = pass && frac >= 0.999;
            }
            consistency["pass"] = pass;
        }
        report["consistency"] = consistency;
        write_json(dir / "consistency.json", consistency);
    } catch (const Error& e) {
        report["error"] = e.name();
        report["error_detail"] = e.what();
        write_json(dir / "report.json", report);
        std::cerr << "error: " << e.what() << '\n';
        return classify(e);
    }

    write_json(dir / "report.json", report);
    return 0;
}

namespace {

Json report_to_json(const TheoremReport& r) {
    Json j;
    j["theorem"] = r.theorem;
    j["seed"] = r.seed;
    j["slack"] = r.slack_formula;
    Json trials = Json::array();
    for (const auto& t : r.trials) {
        Json tj;
        tj["inputs"] = t.inputs;
        Json m;
        for (const auto& [k, v] : t.measured) m[k] = v;
        tj["measured"] = m;
        tj["bound"] = t.bound;
        tj["pass"] = t.pass;
        tj["nonvacuous"] = t.nonvacuous;
        if (!t.error.empty()) tj["error"] = t.error;
        trials.push_back(tj);
    }
    j["trials"] = trials;
    j["nonvacuous_count"] = r.nonvacuous_count;
    j["pass"] = r.pass;
    return j;
}

// explicit pair configs may only strengthen the generated instances; the
// ordered-pair precondition is enforced here
void check_pair_config(const Json& doc) {
    if (!doc.contains("pair")) return;
    const Json& p = doc.at("pair");
    for (const auto& key : {"dim", "box", "h", "mu1", "mu2"})
        if (!p.contains(key)) throw ValidationError("pair config missing " + std::string(key));
    Json pb;
    pb["problem"] = {{"dim", p.at("dim")},
                     {"box", p.at("box")},
                     {"h", p.at("h")},
                     {"mu", p.at("mu1")},
                     {"f", {{"mode", "constant"}, {"value", 1.0}}}};
    RunConfig c1 = parse_run_config(pb);
    pb["problem"]["mu"] = p.at("mu2");
    RunConfig c2 = parse_run_config(pb);
    for (std::size_t i = 0; i < c1.mu.size(); ++i)
        if (c1.mu[i] > c2.mu[i] + 1e-12)
            throw ValidationError("pair config violates mu1 <= mu2");
}

} // namespace

int cmd_verify(const std::string& suite, std::uint64_t seed, int trials,
               const std::optional<std::string>& out_dir,
               const std::optional<std::string>& config_path) {
    const std::set<std::string> known{"monotonicity", "contraction_bv",
                                      "universality_saturation", "mc_consistency", "all"};
    if (!known.count(suite)) {
        std::cerr << "error: unknown suite '" << suite << "'\n";
        return 2;
    }
    try {
        if (config_path) {
            std::ifstream in(*config_path);
            if (!in) throw ValidationError("cannot open config " + *config_path);
            Json doc = Json::parse(in);
            check_pair_config(doc);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    VerifyParams params;
    Json out = Json::array();
    bool all_pass = true;
    auto run = [&](const std::string& name) {
        TheoremReport r;
        if (name == "monotonicity")
            r = check_monotonicity(seed, trials, params);
        else if (name == "contraction_bv")
            r = check_contraction_bv(seed, trials, params);
        else if (name == "universality_saturation")
            r = check_universality_and_saturation(seed, std::min(trials, 10), params);
        else
            r = check_mc_consistency(seed, params);
        all_pass = all_pass && r.pass;
        out.push_back(report_to_json(r));
        std::cout << (r.pass ? "PASS " : "FAIL ") << name << " (" << r.trials.size()
                  << " trials, " << r.nonvacuous_count << " nonvacuous)\n";
    };

    if (suite == "all") {
        run("monotonicity");
        run("contraction_bv");
        run("universality_saturation");
        run("mc_consistency");
    } else {
        run(suite);
    }

    Json doc = runtime_metadata("");
    doc["command"] = "verify";
    doc["seed"] = seed;
    doc["suites"] = out;
    doc["pass"] = all_pass;
    if (out_dir) {
        fs::create_directories(*out_dir);
        write_json(fs::path(*out_dir) / "verify_report.json", doc);
    } else {
        std::cout << doc.dump(2) << '\n';
    }
    return all_pass ? 0 : 1;
}

int cmd_export(const std::string& in_path, const std::optional<std::string>& out_path,
               bool summary) {
    try {
        RawField rf = read_field_csv(in_path);
        if (out_path) write_field_csv(*out_path, rf.grid, rf.values);
        if (summary) {
            Json j;
            j["dim"] = rf.grid.dim;
            j["n"] = {rf.grid.n[0], rf.grid.n[1]};
            j["lo"] = {rf.grid.lo[0], rf.grid.lo[1]};
            j["hi"] = {rf.grid.hi[0], rf.grid.hi[1]};
            double mn = kInf, mx = -kInf;
            for (double v : rf.values) {
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            j["min"] = mn;
            j["max"] = mx;
            bool nonneg = mn >= 0.0;
            if (nonneg && !std::isinf(mx)) {
                DensityField d(rf.grid);
                d.values = rf.values;
                j["mass"] = mass(d);
            }
            std::cout << j.dump(2) << '\n';
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace stopflow
