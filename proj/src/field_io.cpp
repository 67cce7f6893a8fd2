#include "stopflow/field_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stopflow {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_field_csv(const std::string& path, const GridSpec& grid,
                     const std::vector<double>& values) {
    if (static_cast<std::int64_t>(values.size()) != grid.size())
        throw ValidationError("write_field_csv: value count does not match grid");
    std::ofstream out(path);
    if (!out) throw ValidationError("write_field_csv: cannot open " + path);
    out << "# " << grid.dim << ',' << grid.n[0];
    if (grid.dim == 2) out << ',' << grid.n[1];
    out << ',' << format_double(grid.lo[0]) << ',' << format_double(grid.hi[0]);
    if (grid.dim == 2)
        out << ',' << format_double(grid.lo[1]) << ',' << format_double(grid.hi[1]);
    out << '\n';
    for (int iy = 0; iy < grid.ny(); ++iy)
        for (int ix = 0; ix < grid.nx(); ++ix) {
            out << format_double(grid.coord(0, ix));
            if (grid.dim == 2) out << ',' << format_double(grid.coord(1, iy));
            out << ',' << format_double(values[grid.index(ix, iy)]) << '\n';
        }
    if (!out) throw ValidationError("write_field_csv: write failed for " + path);
}

namespace {

double parse_value(const std::string& tok) {
    if (tok == "inf") return kInf;
    try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("field csv: bad numeric token '" + tok + "'");
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> toks;
    std::stringstream ss(line);
    std::string t;
    while (std::getline(ss, t, ',')) toks.push_back(t);
    return toks;
}

} // namespace

RawField read_field_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_field_csv: cannot open " + path);
    std::string header;
    if (!std::getline(in, header) || header.size() < 2 || header[0] != '#')
        throw ValidationError("read_field_csv: missing header in " + path);
    auto toks = split_csv(header.substr(header.find('#') + 1));
    for (auto& t : toks) {
        while (!t.empty() && t.front() == ' ') t.erase(t.begin());
    }
    if (toks.empty()) throw ValidationError("read_field_csv: empty header");
    const int dim = static_cast<int>(parse_value(toks[0]));
    RawField rf;
    if (dim == 1) {
        if (toks.size() != 4) throw ValidationError("read_field_csv: bad 1d header");
        rf.grid = GridSpec::line(parse_value(toks[2]), parse_value(toks[3]),
                                 static_cast<int>(parse_value(toks[1])));
    } else if (dim == 2) {
        if (toks.size() != 7) throw ValidationError("read_field_csv: bad 2d header");
        rf.grid = GridSpec::box(parse_value(toks[3]), parse_value(toks[4]),
                                static_cast<int>(parse_value(toks[1])),
                                parse_value(toks[5]), parse_value(toks[6]),
                                static_cast<int>(parse_value(toks[2])));
    } else {
        throw ValidationError("read_field_csv: dim must be 1 or 2");
    }
    rf.values.reserve(static_cast<std::size_t>(rf.grid.size()));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = split_csv(line);
        if (static_cast<int>(row.size()) != rf.grid.dim + 1)
            throw ValidationError("read_field_csv: bad row '" + line + "'");
        rf.values.push_back(parse_value(row.back()));
    }
    if (static_cast<std::int64_t>(rf.values.size()) != rf.grid.size())
        throw ValidationError("read_field_csv: node count mismatch in " + path);
    return rf;
}

void write_field_csv(const std::string& path, const DensityField& f) {
    write_field_csv(path, f.grid, f.values);
}
void write_field_csv(const std::string& path, const ScalarField& f) {
    write_field_csv(path, f.grid, f.values);
}
void write_field_csv(const std::string& path, const BarrierField& f) {
    write_field_csv(path, f.grid, f.values);
}
void write_mask_csv(const std::string& path, const NodeMask& m) {
    std::vector<double> v(m.values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = m.values[i] ? 1.0 : 0.0;
    write_field_csv(path, m.grid, v);
}

DensityField read_density_csv(const std::string& path) {
    RawField rf = read_field_csv(path);
    DensityField f(rf.grid);
    f.values = std::move(rf.values);
    f.validate();
    return f;
}

ScalarField read_scalar_csv(const std::string& path) {
    RawField rf = read_field_csv(path);
    ScalarField f(rf.grid);
    f.values = std::move(rf.values);
    f.validate();
    return f;
}

BarrierField read_barrier_csv(const std::string& path) {
    RawField rf = read_field_csv(path);
    BarrierField f(rf.grid);
    f.values = std::move(rf.values);
    f.validate();
    return f;
}

NodeMask read_mask_csv(const std::string& path) {
    RawField rf = read_field_csv(path);
    NodeMask m(rf.grid);
    for (std::size_t i = 0; i < rf.values.size(); ++i) m.values[i] = rf.values[i] != 0.0;
    return m;
}

} // namespace stopflow
