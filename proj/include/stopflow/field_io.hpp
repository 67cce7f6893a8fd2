#ifndef STOPFLOW_FIELD_IO_HPP
#define STOPFLOW_FIELD_IO_HPP

#include <string>

#include "stopflow/grid.hpp"

namespace stopflow {

// Field CSV format shared by every exporter:
//   # dim,n1[,n2],lo1,hi1[,lo2,hi2]
//   x[,y],value        one row per node, row-major (x fastest)
// Doubles are printed with 17 significant digits so a written file
// re-imports bitwise equal; +inf is serialized as the literal "inf".

void write_field_csv(const std::string& path, const GridSpec& grid,
                     const std::vector<double>& values);

struct RawField {
    GridSpec grid;
    std::vector<double> values;
};

RawField read_field_csv(const std::string& path);

void write_field_csv(const std::string& path, const DensityField& f);
void write_field_csv(const std::string& path, const ScalarField& f);
void write_field_csv(const std::string& path, const BarrierField& f);
void write_mask_csv(const std::string& path, const NodeMask& m);

DensityField read_density_csv(const std::string& path);
ScalarField read_scalar_csv(const std::string& path);
BarrierField read_barrier_csv(const std::string& path);
NodeMask read_mask_csv(const std::string& path);

// 17-significant-digit formatting used for all numeric CSV/JSON output
std::string format_double(double v);

} // namespace stopflow

#endif
