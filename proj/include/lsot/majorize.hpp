#pragma once

#include "lsot/certificate.hpp"
#include "lsot/measures.hpp"
#include "lsot/quadrature.hpp"
#include "lsot/transport_map.hpp"

#include <functional>

namespace lsot {

struct ConvexFunction {
    std::string name;
    std::function<double(double)> phi;  // on [0, inf), phi(0) = 0
};

struct ConvexTestFamily {
    std::vector<ConvexFunction> members;
    std::string name;

    // Midpoint convexity on log-spaced abscissas up to `scale`; throws InvalidInput naming the member.
    void validate(double scale) const;
};

// x log x, x^2, x^{3/2}, (x - c sup)_+ for c in {0.1, 0.5, 1}, max(x - 1, 0)^2.
ConvexTestFamily default_family(double sup);

// int phi(rho) dx with `q` carrying dx weights over rho's box.
double convex_integral(const Density& rho, const std::function<double(double)>& phi, const Quadrature& q);

/// x -> (1 - t) x + t T(x) for t in [0, 1].
struct Geodesic {
    TransportMap base_map;
    std::vector<double> times;

    TransportMap interpolant(double t) const;
};

// int phi(rho_t) for rho_t = (T_t)_# mu, evaluated in source coordinates:
// int phi(rho_mu / det J_t) det J_t dx against `q`.
double pushforward_integral(const Density& mu, const TransportMap& Tt, const std::function<double(double)>& phi,
                            const Quadrature& q, double t = 1.0);

struct MajorizationOptions {
    double tolerance = 1e-10;   // absolute allowance on each family member
    bool use_map = true;        // nu side through the pushforward of mu; else nu's density
};

BoundCertificate majorization_check(const Density& mu, const Density& nu, const TransportMap* map,
                                    const ConvexityCertificate& cert, const ConvexTestFamily& family,
                                    const Quadrature& q, const MajorizationOptions& opt = {});

struct GeodesicOptions {
    double tolerance = 1e-6;
    bool per_time_trace = false;  // also certify tr D T_t <= n at the probes for every t
    PointSet probes;
};

struct GeodesicResult {
    BoundCertificate certificate;
    std::vector<BoundCertificate> per_time_trace;
    std::vector<std::vector<double>> values;  // [member][time]
};

// `trace_certificate`, when given, must have passed; otherwise the verdict is inconclusive.
GeodesicResult geodesic_monotonicity_check(const Density& mu, const Geodesic& geo, const ConvexTestFamily& family,
                                           const Quadrature& q, const BoundCertificate* trace_certificate = nullptr,
                                           const GeodesicOptions& opt = {});

// int rho log rho (negative differential entropy).
double entropy(const Density& rho, const Quadrature& q);

struct EntropyReport {
    double h_mu = 0.0;
    double h_nu = 0.0;
    double gap = 0.0;            // h_nu - h_mu
    double stability_rhs = 0.0;  // (1 / 2n^2) int |DT - I|_F^2 dmu
    std::string method;
};

struct EntropyStability {
    EntropyReport report;
    BoundCertificate certificate;
};

EntropyStability entropy_stability_check(const Density& mu, const Density& nu, const TransportMap& T,
                                         const ConvexityCertificate& cert, const Quadrature& q_mu,
                                         const Quadrature& q_nu, double tol = 1e-8);

struct SampleEntropy {
    double estimate = 0.0;  // of int rho log rho
    double ci_low = 0.0;
    double ci_high = 0.0;
    int k = 0;
    std::size_t samples = 0;
    std::string note;
};

// Kozachenko-Leonenko k-NN estimate with a seeded bootstrap interval over points.
SampleEntropy knn_entropy(const PointSet& samples, int k = 4, int bootstrap = 200, std::uint64_t seed = 3,
                          double level = 0.95);

} // namespace lsot
