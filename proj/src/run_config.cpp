#include "stopflow/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "stopflow/field_io.hpp"

namespace stopflow {

DensityField box_bump(const GridSpec& g, const std::array<double, 2>& lo,
                      const std::array<double, 2>& hi, double height) {
    DensityField f(g);
    auto coverage = [&](int axis, int i) {
        const double h = g.h(axis), x = g.coord(axis, i);
        const double a = std::max(x - 0.5 * h, lo[axis]);
        const double b = std::min(x + 0.5 * h, hi[axis]);
        return std::max(b - a, 0.0) / h;
    };
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix) {
            double v = coverage(0, ix);
            if (g.dim == 2) v *= coverage(1, iy);
            f.at(ix, iy) = height * v;
        }
    return f;
}

DensityField ball_bump(const GridSpec& g, const std::array<double, 2>& center, double radius,
                       double height) {
    DensityField f(g);
    const double r2 = radius * radius;
    const int sub = 4;
    for (int iy = 0; iy < g.ny(); ++iy)
        for (int ix = 0; ix < g.nx(); ++ix) {
            if (g.dim == 1) {
                const double d = g.coord(0, ix) - center[0];
                int hits = 0;
                for (int a = 0; a < sub; ++a) {
                    const double x = d + ((a + 0.5) / sub - 0.5) * g.h(0);
                    if (x * x <= r2) ++hits;
                }
                f.at(ix, iy) = height * hits / sub;
            } else {
                int hits = 0;
                for (int a = 0; a < sub; ++a)
                    for (int b = 0; b < sub; ++b) {
                        const double x =
                            g.coord(0, ix) + ((a + 0.5) / sub - 0.5) * g.h(0) - center[0];
                        const double y =
                            g.coord(1, iy) + ((b + 0.5) / sub - 0.5) * g.h(1) - center[1];
                        if (x * x + y * y <= r2) ++hits;
                    }
                f.at(ix, iy) = height * hits / (sub * sub);
            }
        }
    return f;
}

DensityField cos_bump(const GridSpec& g, const std::array<double, 2>& center,
                      const std::array<double, 2>& halfwidth, double height) {
    constexpr double pi = 3.14159265358979323846;
    return DensityField::from_fn(g, [&](double x, double y) {
        const double ux = (x - center[0]) / halfwidth[0];
        double v = std::fabs(ux) < 1.0 ? 0.5 * (1.0 + std::cos(pi * ux)) : 0.0;
        if (g.dim == 2) {
            const double uy = (y - center[1]) / halfwidth[1];
            v *= std::fabs(uy) < 1.0 ? 0.5 * (1.0 + std::cos(pi * uy)) : 0.0;
        }
        return height * v;
    });
}

double Benchmark1d::w0_exact(double x) {
    const double a = std::fabs(x);
    if (a <= 1.0) return 1.0 - 0.5 * x * x;
    if (a <= 2.0) return 0.5 * (2.0 - a) * (2.0 - a);
    return 0.0;
}

double Benchmark1d::nu_exact(double x) { return std::fabs(x) <= 2.0 ? 1.0 : 0.0; }

Benchmark1d make_benchmark1d(double h) {
    const int n = static_cast<int>(std::lround(8.0 / h)) + 1;
    const GridSpec g = GridSpec::line(-4.0, 4.0, n);
    Benchmark1d b;
    b.spec.grid = g;
    b.spec.mu = box_bump(g, {-1.0, 0.0}, {1.0, 0.0}, 2.0);
    b.spec.f = DensityField(g, 1.0);
    b.spec.cost_type = CostType::TypeI;
    return b;
}

ProblemSpec make_ball2d(double h, const SolverParams& solver) {
    const int n = static_cast<int>(std::lround(8.0 / h)) + 1;
    const GridSpec g = GridSpec::box(-4.0, 4.0, n, -4.0, 4.0, n);
    ProblemSpec spec;
    spec.grid = g;
    spec.mu = ball_bump(g, {0.0, 0.0}, 1.0, 4.0);
    spec.f = DensityField(g, 1.0);
    spec.cost_type = CostType::TypeI;
    spec.solver = solver;
    return spec;
}

SolverParams NumericsConfig::solver() const {
    SolverParams sp;
    sp.lcp_tol = lcp_tol;
    sp.max_sweeps = max_sweeps;
    sp.omega = omega;
    sp.mode = parallel_sweeps ? SweepMode::RedBlack : SweepMode::Lexicographic;
    return sp;
}

ProblemSpec RunConfig::problem_spec() const {
    ProblemSpec spec;
    spec.grid = grid;
    spec.mu = mu;
    spec.f = f;
    spec.cost_type = cost_type;
    spec.lagrangian = lagrangian;
    spec.solver = numerics.solver();
    return spec;
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hash_hex(const std::string& data) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

namespace {

void require_keys(const Json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            throw ValidationError(where + ": unknown key '" + item.key() + "'");
}

double num(const Json& j, const std::string& where) {
    if (!j.is_number()) throw ValidationError(where + ": expected a number");
    return j.get<double>();
}

std::array<double, 2> point(const Json& j, int dim, const std::string& where) {
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw ValidationError(where + ": expected an array of length dim");
    std::array<double, 2> p{0.0, 0.0};
    for (int a = 0; a < dim; ++a) p[a] = num(j[a], where);
    return p;
}

DensityField parse_density(const Json& j, const GridSpec& g, const std::string& where);

DensityField parse_one_bump(const Json& j, const GridSpec& g, const std::string& where) {
    require_keys(j, where,
                 {"preset", "center", "halfwidth", "radius", "height", "file", "sum"});
    if (j.contains("file")) {
        DensityField f = read_density_csv(j.at("file").get<std::string>());
        if (!f.grid.same(g)) throw ValidationError(where + ": field file grid mismatch");
        return f;
    }
    const std::string preset = j.value("preset", "");
    const double height = j.contains("height") ? num(j.at("height"), where) : 1.0;
    if (preset == "box") {
        const auto c = point(j.at("center"), g.dim, where + ".center");
        const auto w = point(j.at("halfwidth"), g.dim, where + ".halfwidth");
        return box_bump(g, {c[0] - w[0], c[1] - w[1]}, {c[0] + w[0], c[1] + w[1]}, height);
    }
    if (preset == "ball") {
        const auto c = point(j.at("center"), g.dim, where + ".center");
        return ball_bump(g, c, num(j.at("radius"), where + ".radius"), height);
    }
    if (preset == "cos") {
        const auto c = point(j.at("center"), g.dim, where + ".center");
        const auto w = point(j.at("halfwidth"), g.dim, where + ".halfwidth");
        return cos_bump(g, c, w, height);
    }
    throw ValidationError(where + ": unknown preset '" + preset + "'");
}

DensityField parse_density(const Json& j, const GridSpec& g, const std::string& where) {
    if (j.is_object() && j.contains("sum")) {
        require_keys(j, where, {"sum"});
        DensityField acc = DensityField::zeros(g);
        for (const auto& item : j.at("sum")) {
            DensityField part = parse_one_bump(item, g, where + ".sum[]");
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += part[i];
        }
        return acc;
    }
    return parse_one_bump(j, g, where);
}

DensityField parse_f(const Json& j, const GridSpec& g) {
    require_keys(j, "f", {"mode", "value", "radius", "center"});
    const std::string mode = j.value("mode", "constant");
    if (mode == "constant") {
        const double v = num(j.at("value"), "f.value");
        if (v < 0.0) throw ValidationError("f.value must be >= 0");
        return DensityField(g, v);
    }
    if (mode == "complement_of_ball") {
        const double v = j.contains("value") ? num(j.at("value"), "f.value") : 1.0;
        const double r = num(j.at("radius"), "f.radius");
        std::array<double, 2> c{0.0, 0.0};
        if (j.contains("center")) c = point(j.at("center"), g.dim, "f.center");
        DensityField f(g, v);
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                const double dx = g.coord(0, ix) - c[0];
                const double dy = g.dim == 2 ? g.coord(1, iy) - c[1] : 0.0;
                if (dx * dx + dy * dy <= r * r) f.at(ix, iy) = 0.0;
            }
        return f;
    }
    throw ValidationError("f.mode must be 'constant' or 'complement_of_ball'");
}

} // namespace

RunConfig parse_run_config(const Json& doc) {
    require_keys(doc, "config",
                 {"problem", "numerics", "mc", "output", "barrier", "solve_dir"});
    if (!doc.contains("problem")) throw ValidationError("config: missing 'problem'");
    const Json& p = doc.at("problem");
    require_keys(p, "problem", {"dim", "box", "h", "mu", "f", "cost_type", "lagrangian"});

    RunConfig rc;
    const int dim = p.contains("dim") ? p.at("dim").get<int>() : 1;
    const double h = num(p.at("h"), "problem.h");
    const Json& box = p.at("box");
    if (!box.is_array() || static_cast<int>(box.size()) != dim)
        throw ValidationError("problem.box: expected dim entries of [lo, hi]");
    auto axis_n = [&](int a) {
        const double lo = num(box[a][0], "box.lo"), hi = num(box[a][1], "box.hi");
        const double span = hi - lo;
        const double n_real = span / h + 1.0;
        const int n = static_cast<int>(std::lround(n_real));
        if (std::fabs(n_real - n) > 1e-9)
            throw ValidationError("problem.box span must be an integer multiple of h");
        return std::tuple<double, double, int>(lo, hi, n);
    };
    if (dim == 1) {
        auto [lo, hi, n] = axis_n(0);
        rc.grid = GridSpec::line(lo, hi, n);
    } else if (dim == 2) {
        auto [lo0, hi0, n0] = axis_n(0);
        auto [lo1, hi1, n1] = axis_n(1);
        rc.grid = GridSpec::box(lo0, hi0, n0, lo1, hi1, n1);
    } else {
        throw ValidationError("problem.dim must be 1 or 2");
    }

    rc.mu = parse_density(p.at("mu"), rc.grid, "mu");
    rc.f = parse_f(p.at("f"), rc.grid);

    const std::string ct = p.value("cost_type", "type1");
    if (ct == "type1")
        rc.cost_type = CostType::TypeI;
    else if (ct == "type2")
        rc.cost_type = CostType::TypeII;
    else
        throw ValidationError("problem.cost_type must be 'type1' or 'type2'");

    if (p.contains("lagrangian")) {
        const Json& l = p.at("lagrangian");
        if (l.is_string()) {
            const std::string s = l.get<std::string>();
            if (s == "time")
                rc.lagrangian = Lagrangian::time_linear();
            else if (s == "exp")
                rc.lagrangian = Lagrangian::exp_decay();
            else
                throw ValidationError("lagrangian must be 'time', 'exp' or a table");
        } else {
            require_keys(l, "lagrangian", {"table"});
            std::vector<std::pair<double, double>> tab;
            for (const auto& e : l.at("table"))
                tab.emplace_back(num(e[0], "lagrangian.table.t"),
                                 num(e[1], "lagrangian.table.v"));
            rc.lagrangian = Lagrangian::from_table(std::move(tab));
        }
    } else {
        rc.lagrangian = rc.cost_type == CostType::TypeI ? Lagrangian::time_linear()
                                                        : Lagrangian::exp_decay();
    }
    rc.lagrangian.validate(rc.cost_type);

    if (doc.contains("numerics")) {
        const Json& n = doc.at("numerics");
        require_keys(n, "numerics",
                     {"dt", "t_end", "lcp_tol", "max_sweeps", "omega", "parallel_sweeps",
                      "max_snapshots"});
        if (n.contains("dt")) rc.numerics.dt = num(n.at("dt"), "numerics.dt");
        if (n.contains("t_end")) rc.numerics.t_end = num(n.at("t_end"), "numerics.t_end");
        if (n.contains("lcp_tol")) rc.numerics.lcp_tol = num(n.at("lcp_tol"), "lcp_tol");
        if (n.contains("max_sweeps")) rc.numerics.max_sweeps = n.at("max_sweeps").get<int>();
        if (n.contains("omega")) rc.numerics.omega = num(n.at("omega"), "omega");
        if (n.contains("parallel_sweeps"))
            rc.numerics.parallel_sweeps = n.at("parallel_sweeps").get<bool>();
        if (n.contains("max_snapshots"))
            rc.numerics.max_snapshots = n.at("max_snapshots").get<int>();
        if (!(rc.numerics.dt > 0.0) || !(rc.numerics.t_end > 0.0))
            throw ValidationError("numerics.dt and t_end must be positive");
    }

    if (doc.contains("mc")) {
        const Json& m = doc.at("mc");
        require_keys(m, "mc", {"n_particles", "dt_mc", "seed", "snapshot_times"});
        if (m.contains("n_particles")) rc.mc.n_particles = m.at("n_particles").get<int>();
        if (m.contains("dt_mc")) rc.mc.dt_mc = num(m.at("dt_mc"), "mc.dt_mc");
        if (m.contains("seed")) rc.mc.seed = m.at("seed").get<std::uint64_t>();
        if (m.contains("snapshot_times"))
            for (const auto& t : m.at("snapshot_times"))
                rc.mc.snapshot_times.push_back(num(t, "mc.snapshot_times"));
        if (rc.mc.n_particles < 1) throw ValidationError("mc.n_particles must be >= 1");
        if (!(rc.mc.dt_mc > 0.0)) throw ValidationError("mc.dt_mc must be positive");
    }

    if (doc.contains("output")) {
        const Json& o = doc.at("output");
        require_keys(o, "output", {"dir"});
        rc.out_dir = o.value("dir", "");
    }

    if (doc.contains("barrier")) {
        const Json& b = doc.at("barrier");
        require_keys(b, "barrier", {"file", "constant"});
        if (b.contains("file")) rc.barrier_file = b.at("file").get<std::string>();
        if (b.contains("constant")) rc.barrier_constant = num(b.at("constant"), "barrier");
        if (rc.barrier_file && rc.barrier_constant)
            throw ValidationError("barrier: give either 'file' or 'constant'");
    }
    if (doc.contains("solve_dir")) rc.solve_dir = doc.at("solve_dir").get<std::string>();

    rc.config_hash = hash_hex(doc.dump());
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("config parse error: ") + e.what());
    }
    return parse_run_config(doc);
}

} // namespace stopflow
