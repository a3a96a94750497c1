#include "lsot/transport_map.hpp"

#include <charconv>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>

namespace lsot {

const char* to_string(MapProvenance p)
{
    switch (p) {
    case MapProvenance::closed_form_gaussian: return "closed_form_gaussian";
    case MapProvenance::quantile_1d: return "quantile_1d";
    case MapProvenance::radial: return "radial";
    case MapProvenance::entropic_grid: return "entropic_grid";
    case MapProvenance::entropic_sample: return "entropic_sample";
    }
    return "unknown";
}

bool is_entropic(MapProvenance p)
{
    return p == MapProvenance::entropic_grid || p == MapProvenance::entropic_sample;
}

std::size_t GridLattice::node_count() const
{
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    return n;
}

std::size_t GridLattice::flat(const std::vector<int>& idx) const
{
    std::size_t f = 0;
    for (int d = 0; d < dim; ++d) f = f * shape[d] + idx[d];
    return f;
}

Vec GridLattice::node(const std::vector<int>& idx) const
{
    Vec x(dim);
    for (int d = 0; d < dim; ++d) x[d] = lower[d] + idx[d] * spacing(d);
    return x;
}

Vec GridLattice::value(std::size_t flat_index) const
{
    Vec v(dim);
    for (int d = 0; d < dim; ++d) v[d] = values[flat_index * dim + d];
    return v;
}

namespace {

std::string shortest(double v)
{
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& s)
{
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc()) throw InvalidInput("lattice: cannot parse number '" + s + "'");
    return v;
}

} // namespace

void write_lattice(std::ostream& os, const GridLattice& g)
{
    os << "lsot-lattice 1\n";
    os << "dim " << g.dim << "\n";
    os << "lower";
    for (int d = 0; d < g.dim; ++d) os << ' ' << shortest(g.lower[d]);
    os << "\nupper";
    for (int d = 0; d < g.dim; ++d) os << ' ' << shortest(g.upper[d]);
    os << "\nshape";
    for (int s : g.shape) os << ' ' << s;
    os << "\nvalues\n";
    const std::size_t nodes = g.node_count();
    for (std::size_t i = 0; i < nodes; ++i) {
        for (int d = 0; d < g.dim; ++d) os << (d ? " " : "") << shortest(g.values[i * g.dim + d]);
        os << '\n';
    }
}

GridLattice read_lattice(std::istream& is)
{
    std::string tag;
    int version = 0;
    is >> tag >> version;
    if (tag != "lsot-lattice" || version != 1) throw InvalidInput("lattice: bad header");
    GridLattice g;
    is >> tag >> g.dim;
    if (tag != "dim" || g.dim < 1) throw InvalidInput("lattice: bad dim line");
    g.lower.resize(g.dim);
    g.upper.resize(g.dim);
    g.shape.resize(g.dim);
    std::string tok;
    is >> tag;
    for (int d = 0; d < g.dim; ++d) {
        is >> tok;
        g.lower[d] = parse_double(tok);
    }
    is >> tag;
    for (int d = 0; d < g.dim; ++d) {
        is >> tok;
        g.upper[d] = parse_double(tok);
    }
    is >> tag;
    for (int d = 0; d < g.dim; ++d) is >> g.shape[d];
    is >> tag;
    if (!is || tag != "values") throw InvalidInput("lattice: truncated header");
    const std::size_t count = g.node_count() * g.dim;
    g.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!(is >> tok)) throw InvalidInput("lattice: truncated body");
        g.values[i] = parse_double(tok);
    }
    return g;
}

double TransportMap::trace_at(const Vec& x) const
{
    if (laplacian) return laplacian(x);
    if (!jacobian) throw InvalidInput("trace_at: map has no Jacobian");
    return jacobian(x).trace();
}

namespace {

struct LatticeData {
    GridLattice g;
    std::vector<Mat> jac;  // per node
};

// Locate the cell and local coordinates of x, clamped to the lattice.
void locate(const GridLattice& g, const Vec& x, std::vector<int>& cell, std::vector<double>& frac)
{
    cell.resize(g.dim);
    frac.resize(g.dim);
    for (int d = 0; d < g.dim; ++d) {
        const double h = g.spacing(d);
        double u = (x[d] - g.lower[d]) / h;
        u = std::clamp(u, 0.0, static_cast<double>(g.shape[d] - 1));
        int i = static_cast<int>(std::floor(u));
        if (i >= g.shape[d] - 1) i = g.shape[d] - 2;
        cell[d] = i;
        frac[d] = u - i;
    }
}

template <class Get, class T>
T multilinear(const GridLattice& g, const Vec& x, Get get, T zero)
{
    std::vector<int> cell;
    std::vector<double> frac;
    locate(g, x, cell, frac);
    T acc = zero;
    const int corners = 1 << g.dim;
    std::vector<int> idx(g.dim);
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        for (int d = 0; d < g.dim; ++d) {
            const int bit = (c >> d) & 1;
            idx[d] = cell[d] + bit;
            w *= bit ? frac[d] : 1.0 - frac[d];
        }
        if (w == 0.0) continue;
        acc += w * get(g.flat(idx));
    }
    return acc;
}

std::vector<Mat> stencil_jacobians(const GridLattice& g)
{
    const std::size_t nodes = g.node_count();
    std::vector<Mat> out(nodes, Mat::Zero(g.dim, g.dim));
    std::vector<int> idx(g.dim, 0);
    for (std::size_t f = 0; f < nodes; ++f) {
        for (int d = 0; d < g.dim; ++d) {
            std::vector<int> lo = idx, hi = idx;
            double span;
            if (idx[d] == 0) {
                hi[d] = 1;
                span = g.spacing(d);
            } else if (idx[d] == g.shape[d] - 1) {
                lo[d] = idx[d] - 1;
                span = g.spacing(d);
            } else {
                lo[d] = idx[d] - 1;
                hi[d] = idx[d] + 1;
                span = 2.0 * g.spacing(d);
            }
            out[f].col(d) = (g.value(g.flat(hi)) - g.value(g.flat(lo))) / span;
        }
        for (int d = g.dim - 1; d >= 0; --d) {
            if (++idx[d] < g.shape[d]) break;
            idx[d] = 0;
        }
    }
    return out;
}

} // namespace

TransportMap map_from_lattice(GridLattice g, MapProvenance provenance, std::optional<double> epsilon)
{
    for (int d = 0; d < g.dim; ++d)
        if (g.shape[d] < 2) throw InvalidInput("map_from_lattice: need at least two nodes per axis");
    if (g.values.size() != g.node_count() * g.dim) throw InvalidInput("map_from_lattice: value count mismatch");
    auto data = std::make_shared<LatticeData>();
    data->jac = stencil_jacobians(g);
    data->g = std::move(g);
    TransportMap m;
    m.dim = data->g.dim;
    m.eval = [data](const Vec& x) -> Vec {
        return multilinear(data->g, x, [&](std::size_t f) { return data->g.value(f); },
                           Vec(Vec::Zero(data->g.dim)));
    };
    m.jacobian = [data](const Vec& x) -> Mat {
        return multilinear(data->g, x, [&](std::size_t f) -> const Mat& { return data->jac[f]; },
                           Mat(Mat::Zero(data->g.dim, data->g.dim)));
    };
    m.provenance = provenance;
    m.entropic_epsilon = epsilon;
    m.grid = data->g;
    return m;
}

TransportMap identity_map(int dim)
{
    TransportMap m;
    m.dim = dim;
    m.eval = [](const Vec& x) { return x; };
    m.jacobian = [dim](const Vec&) -> Mat { return Mat::Identity(dim, dim); };
    m.laplacian = [dim](const Vec&) { return static_cast<double>(dim); };
    m.inverse = [](const Vec& x) { return x; };
    m.provenance = MapProvenance::closed_form_gaussian;
    return m;
}

} // namespace lsot
