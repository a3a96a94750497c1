#pragma once

#include "lsot/measures.hpp"
#include "lsot/transport_map.hpp"

#include <functional>
#include <optional>

namespace lsot {

// T(x) = m_nu + A (x - m_mu), A the unique SPD matrix with A Sigma_mu A = Sigma_nu.
TransportMap solve_gaussian(const Density& mu, const Density& nu);
TransportMap gaussian_map(const GaussianParams& mu, const GaussianParams& nu);

struct QuantileOptions {
    int cells = 4096;  // cumulative table resolution on each density's box
    int order = 8;     // Gauss-Legendre nodes per cell
};

// Monotone rearrangement G^{-1} o F in one dimension. Both densities are taken
// normalized on their own boxes.
TransportMap solve_quantile_1d(const Density& mu, const Density& nu, const QuantileOptions& opt = {});

using RadialProfile = std::function<double(double)>;

struct RadialOptions {
    int nodes = 2048;
    int order = 8;
    double r_min = 1e-6;                // first log-spaced node
    std::optional<double> r_max;        // default: half-diagonal of each density's box
    std::optional<Vec> center;          // default: origin
    double angular_tol = 1e-8;          // relative spread of log densities on spheres
};

// Radial Brenier map t(r) x / r from cumulative-mass matching. Profiles are
// unnormalized densities as functions of the radius.
TransportMap solve_radial(const Density& mu, const Density& nu, const RadialProfile& profile_mu,
                          const RadialProfile& profile_nu, const RadialOptions& opt = {});

struct EntropicOptions {
    int max_iter = 20000;
    double tol = 1e-7;       // L1 marginal error
    bool debias = true;      // subtract the mu -> mu drift at the same epsilon
    int grid_points = 0;     // per axis; 0 takes box.grid_points_per_axis
};

// Log-domain alternating scaling on a tensor grid (n <= 2) with barycentric projection.
TransportMap solve_entropic_grid(const Density& mu, const Density& nu, const TruncationBox& box, double epsilon,
                                 const EntropicOptions& opt = {});

// One solve per epsilon (decreasing), each warm-started from the previous potentials.
std::vector<TransportMap> solve_entropic_schedule(const Density& mu, const Density& nu, const TruncationBox& box,
                                                  const std::vector<double>& epsilons,
                                                  const EntropicOptions& opt = {});

struct SampleOptions {
    int max_iter = 5000;
    double tol = 1e-6;
    bool debias = true;
    std::vector<double> mu_weights;  // empty = uniform
    std::vector<double> nu_weights;
};

// Entropic plan between weighted point clouds. The returned map evaluates the
// barycentric projection at any x; no Jacobian.
TransportMap solve_entropic_sample(const PointSet& mu_samples, const PointSet& nu_samples, double epsilon,
                                   const SampleOptions& opt = {});

struct DivergenceEstimate {
    PointSet points;                  // fit points that produced a value
    std::vector<double> values;
    std::vector<std::size_t> excluded;  // indices into the requested fit points
    std::vector<std::string> reasons;
    int neighbors = 0;
};

// Divergence of T at each fit point from an affine least-squares fit over its
// k nearest neighbours in `cloud`.
DivergenceEstimate estimate_divergence(const TransportMap& T, const PointSet& fit_points, const PointSet& cloud,
                                       int k);

struct MongeAmpereResidual {
    double sup_abs_log_residual = 0.0;
    PointSet probe_set;
    std::vector<double> per_probe;
};

// log rho_mu(x) - log rho_nu(T x) - log det J(x), with both densities normalized.
MongeAmpereResidual monge_ampere_residual(const TransportMap& T, const Density& mu, const Density& nu,
                                          const PointSet& probes);

// Interior lattice nodes at least `margin` cells from every face.
PointSet interior_nodes(const GridLattice& g, int margin = 1);

} // namespace lsot
