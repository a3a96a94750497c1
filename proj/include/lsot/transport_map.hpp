#pragma once

#include "lsot/core.hpp"

#include <functional>
#include <iosfwd>
#include <optional>

namespace lsot {

enum class MapProvenance { closed_form_gaussian, quantile_1d, radial, entropic_grid, entropic_sample };

const char* to_string(MapProvenance p);
bool is_entropic(MapProvenance p);

/// Map values on a tensor lattice. Nodes sit at lower + i * (upper - lower) / (shape - 1).
struct GridLattice {
    int dim = 0;
    Vec lower, upper;
    std::vector<int> shape;
    std::vector<double> values;  // row-major over nodes, `dim` values per node

    std::size_t node_count() const;
    Vec node(const std::vector<int>& idx) const;
    Vec value(std::size_t flat) const;
    std::size_t flat(const std::vector<int>& idx) const;
    double spacing(int axis) const { return (upper[axis] - lower[axis]) / (shape[axis] - 1); }
};

void write_lattice(std::ostream& os, const GridLattice& g);
GridLattice read_lattice(std::istream& is);

struct TransportMap {
    int dim = 0;
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jacobian;     // empty when unavailable
    std::function<double(const Vec&)> laplacian; // analytic trace of the Jacobian, optional
    std::function<Vec(const Vec&)> inverse;      // optional
    MapProvenance provenance = MapProvenance::closed_form_gaussian;
    std::optional<double> entropic_epsilon;
    std::optional<GridLattice> grid;
    bool debiased = false;
    std::string note;

    bool has_jacobian() const { return static_cast<bool>(jacobian); }
    double trace_at(const Vec& x) const;
};

// Multilinear interpolation of lattice values and of stencil Jacobians
// (centered inside, one-sided on the faces).
TransportMap map_from_lattice(GridLattice g, MapProvenance provenance, std::optional<double> epsilon);

TransportMap identity_map(int dim);

} // namespace lsot
