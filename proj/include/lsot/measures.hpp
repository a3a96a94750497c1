#pragma once

#include "lsot/core.hpp"
#include "lsot/polynomial.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <optional>

namespace lsot {

enum class SupportNote { full_space, restricted };
enum class CertProvenance { analytic, sampled };

const char* to_string(SupportNote s);
const char* to_string(CertProvenance p);

struct ConvexityCertificate {
    std::optional<double> alpha;  // Delta V <= alpha * n
    std::optional<double> kappa;  // Hess W >= kappa * Id
    CertProvenance provenance = CertProvenance::analytic;
    PointSet probes;
    double empirical_alpha = std::numeric_limits<double>::quiet_NaN();
    double empirical_kappa = std::numeric_limits<double>::quiet_NaN();
    double declared_slack = 0.0;

    static ConvexityCertificate analytic(std::optional<double> alpha, std::optional<double> kappa);
};

struct GaussianParams {
    Vec mean;
    Mat cov;
};

using ScalarField = std::function<double(const Vec&)>;
using VectorField = std::function<Vec(const Vec&)>;
using MatrixField = std::function<Mat(const Vec&)>;

/// Everything needed to build a Density. Unset optional evaluators fall back to
/// finite differences.
struct DensityParts {
    int dim = 0;
    ScalarField log_density;
    VectorField grad_log;
    MatrixField hess_log;
    bool normalized = false;
    std::optional<double> log_partition;  // log of the integral of exp(log_density)
    SupportNote support = SupportNote::full_space;
    std::optional<TruncationBox> box;
    std::optional<GaussianParams> gaussian;
    std::optional<PolyGaussianMixture> closed_form;  // exp(log_density) as a mixture
    std::optional<ConvexityCertificate> certificate;
    // Distance to a singular set (excluded from certificate probing); absent means none.
    ScalarField singular_distance;
    nlohmann::json spec;
};

/// Immutable probability density on R^n. Copies share state; evaluators are
/// safe to call concurrently.
class Density {
public:
    Density() = default;
    static Density make(DensityParts parts);

    int dim() const;
    double log_density(const Vec& x) const;
    Vec grad_log(const Vec& x) const;
    Mat hess_log(const Vec& x) const;
    bool has_analytic_grad() const;
    bool has_analytic_hess() const;

    bool normalized() const;
    std::optional<double> log_partition() const;
    // Known partition or a quadrature estimate over the natural box (cached).
    double log_partition_or_compute() const;
    double normalized_log_density(const Vec& x) const;
    double pdf(const Vec& x) const { return std::exp(normalized_log_density(x)); }

    SupportNote support() const;
    const TruncationBox& box() const;
    const std::optional<GaussianParams>& gaussian() const;
    const std::optional<PolyGaussianMixture>& closed_form() const;
    const std::optional<ConvexityCertificate>& certificate() const;
    double singular_distance(const Vec& x) const;
    bool has_singular_set() const;
    const nlohmann::json& spec() const;

    Density with_certificate(ConvexityCertificate cert) const;
    Density with_box(TruncationBox box) const;
    // Same density flagged normalized, with the computed partition folded into log_density.
    Density normalized_copy() const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

Vec fd_gradient(const ScalarField& f, const Vec& x);
Mat fd_hessian_from_gradient(const VectorField& g, const Vec& x);
Mat fd_hessian(const ScalarField& f, const Vec& x);

// Log of the integral of exp(log_f) over the box: tensor Gauss-Legendre for n <= 2,
// stratified Monte Carlo above.
double log_integral(const ScalarField& log_f, const TruncationBox& box, std::uint64_t seed = 7);

Density gaussian(const Vec& mean, const Mat& cov);
Density from_mixture(const PolyGaussianMixture& mix, const TruncationBox& box,
                     std::optional<ConvexityCertificate> cert, nlohmann::json spec = {});

struct Weight {
    ScalarField value;      // w(x) > 0
    VectorField grad_log;   // optional
    MatrixField hess_log;   // optional
    std::string name;
};

// Unnormalized density w * base. With an analytic certificate, w must be positive at every probe.
Density weighted_gaussian(const Weight& w, const Density& base, std::optional<ConvexityCertificate> cert,
                          const PointSet& probes = {});

/// Sampled certificate: alpha = max(Delta V)/n, kappa = min eigenvalue of Hess V over a
/// tensor probe grid with about `probes` points, skipping the singular tube.
ConvexityCertificate estimate_certificate(const Density& d, const TruncationBox& box, int probes,
                                          double delta_diag = 1e-2, int refine = 0);

// Combine an analytic and a sampled certificate. Analytic values win; a sampled
// violation of an analytic claim throws CertificateConflict.
ConvexityCertificate reconcile(const ConvexityCertificate& analytic, const ConvexityCertificate& sampled,
                               double tol = 1e-8);

nlohmann::json to_json(const ConvexityCertificate& c);

} // namespace lsot
