#pragma once

#include "lsot/certificate.hpp"
#include "lsot/measures.hpp"
#include "lsot/transport_map.hpp"

namespace lsot {

enum class SphereKind { two_point_1d, uniform_angle_2d, randomized_orthogonal_nd };
const char* to_string(SphereKind k);

struct SphereRule {
    int dim = 0;
    PointSet nodes;  // unit vectors
    std::vector<double> weights;
    SphereKind kind = SphereKind::two_point_1d;
    std::uint64_t seed = 0;
};

// Default rule per dimension: two points in 1-D, 64 angles in 2-D, random frames above.
SphereRule sphere_rule(int dim, int frames = 32, std::uint64_t seed = 0, int angles = 64);

// Spherical mean of f(x + eps y) - f(x).
double delta_epsilon(const ScalarField& f, const Vec& x, double epsilon, const SphereRule& rule);

struct DeltaLimitReport {
    std::vector<double> epsilons;
    std::vector<double> errors;  // |Delta_eps f / eps^2 - Lap f / (2n)|
    double order = 0.0;          // least-squares log-log slope
    bool exact = false;          // every error below the noise floor
    bool non_monotone = false;
    BoundCertificate certificate;
};

DeltaLimitReport delta_epsilon_limit_check(const ScalarField& f, double laplacian, const Vec& x,
                                           const std::vector<double>& epsilons, const SphereRule& rule,
                                           double noise_floor = 1e-11);

// Delta_eps f <= (ell / n)(eps^2 / 2) over every (x, eps) pair.
BoundCertificate check_delta_epsilon_bound(const ScalarField& f, double ell, const PointSet& xs,
                                           const std::vector<double>& epsilons, const SphereRule& rule,
                                           double tol = 1e-12);

struct MapStatistics {
    double trace_jacobian = 0.0;
    double det_jacobian = 0.0;
    double op_norm = 0.0;
    double frobenius_dist_to_identity = 0.0;
    double min_eigenvalue = 0.0;
    double asymmetry = 0.0;  // Frobenius norm of the antisymmetric part
};

MapStatistics map_statistics(const TransportMap& T, const Vec& x);
MapStatistics matrix_statistics(const Mat& J);

} // namespace lsot
