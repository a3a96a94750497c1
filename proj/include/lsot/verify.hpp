#pragma once

#include "lsot/certificate.hpp"
#include "lsot/measures.hpp"
#include "lsot/quadrature.hpp"
#include "lsot/transport_map.hpp"

namespace lsot {

// 0 for exact provenances, 5% entropic grid, 10% entropic sample.
double default_slack(MapProvenance p);

struct ProbeOptions {
    int grid_per_axis = 17;      // tensor part (n <= 2 only)
    std::size_t random = 1000;   // mu-distributed part
    std::uint64_t seed = 1;
    int margin = 1;              // lattice cells excluded at the faces (grid maps)
    // Keep probes with pdf >= mass_floor * peak pdf. Negative selects 1e-3 for
    // entropic maps, 1e-8 for quantile and radial maps, 0 for closed forms.
    double mass_floor = -1.0;
};

// Exact for Gaussians, grid inversion for n <= 2, random-walk Metropolis above.
PointSet sample_density(const Density& d, std::size_t count, std::uint64_t seed);

PointSet default_probes(const TransportMap& T, const Density& mu, const ProbeOptions& opt = {});

// alpha from the source certificate, kappa from the target certificate.
ConvexityCertificate pair_certificate(const Density& mu, const Density& nu);

// n sqrt(alpha / kappa) against the max of tr J.
BoundCertificate check_trace_bound(const TransportMap& T, const ConvexityCertificate& cert, const PointSet& probes);
// Same rhs against the max operator norm of J.
BoundCertificate check_lipschitz_bound(const TransportMap& T, const ConvexityCertificate& cert,
                                       const PointSet& probes);
// (alpha / kappa)^{n/2} against the max of det J.
BoundCertificate check_determinant_bound(const TransportMap& T, const ConvexityCertificate& cert,
                                         const PointSet& probes);
// (int (tr J)^{2(p+1)} dmu)^{1/(p+1)} against n^2 alpha / kappa. `q` carries dx weights.
BoundCertificate check_lp_moment_bound(const TransportMap& T, const ConvexityCertificate& cert, const Density& mu,
                                       int p, const Quadrature& q);
std::vector<BoundCertificate> check_lp_chain(const TransportMap& T, const ConvexityCertificate& cert,
                                             const Density& mu, const Quadrature& q,
                                             const std::vector<int>& ps = {1, 2, 4});

// Folds certificates computed at decreasing epsilons into one carrying the trend;
// the verdict follows the entropic policy.
BoundCertificate with_trend(const std::vector<BoundCertificate>& per_epsilon);

// Mean and covariance of T_# mu from `q` (dx weights against the normalized mu)
// against nu's, as the max absolute entry error.
BoundCertificate check_pushforward_moments(const TransportMap& T, const Density& mu, const GaussianParams& nu,
                                           const Quadrature& q, double tol);

// min over random probe pairs of <T x - T y, x - y>, claimed >= -tol.
BoundCertificate check_cyclical_monotonicity(const TransportMap& T, const PointSet& probes, std::size_t pairs,
                                             std::uint64_t seed, double tol);

// sup |log rho_mu - log rho_nu(T) - log det J| against tol.
BoundCertificate check_monge_ampere(const TransportMap& T, const Density& mu, const Density& nu,
                                    const PointSet& probes, double tol);

} // namespace lsot
