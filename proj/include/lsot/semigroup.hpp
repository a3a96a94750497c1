#pragma once

#include "lsot/certificate.hpp"
#include "lsot/measures.hpp"
#include "lsot/polynomial.hpp"

#include <optional>

namespace lsot {

enum class SemigroupKind { ornstein_uhlenbeck, heat };
enum class EvalMethod { closed_form_quadratic, gauss_hermite, monte_carlo, identity };

const char* to_string(SemigroupKind k);
const char* to_string(EvalMethod m);

/// Nonnegative function f on R^n fed to the semigroups. Derivatives are optional;
/// without them the quadrature branch differentiates through the Gaussian weight.
struct SemigroupFunction {
    int dim = 0;
    ScalarField value;
    VectorField grad;  // of f, not log f
    MatrixField hess;
    std::optional<PolyGaussianMixture> closed_form;
    std::string name;

    static SemigroupFunction from_mixture(const PolyGaussianMixture& m, std::string name);
    static SemigroupFunction constant(int dim, double c = 1.0);
    // f(x) = exp(-x^T A x / 2 + b^T x + c)
    static SemigroupFunction quadratic_exponent(const Mat& A, const Vec& b, double c, std::string name);
    // f = rho (the density itself, normalized)
    static SemigroupFunction from_density(const Density& rho);
    // f = d mu / d gamma for the standard Gaussian gamma
    static SemigroupFunction relative_to_gaussian(const Density& mu);
};

struct SemigroupEvaluation {
    double value = 0.0;
    double log_value = 0.0;
    Vec grad_log;
    Mat hess_log;
    EvalMethod method = EvalMethod::closed_form_quadratic;
    int quadrature_order = 0;
    double error_estimate = 0.0;
};

struct ApplyOptions {
    int gh_order = 64;
    int max_gh_order = 256;
    double rel_tol = 1e-8;
    std::size_t mc_samples = 1 << 15;
    double mc_rel_tol = 0.05;
    std::uint64_t seed = 1;
    bool allow_closed_form = true;
    bool want_hess = true;
};

SemigroupEvaluation apply(SemigroupKind kind, const SemigroupFunction& f, double t, const Vec& x,
                          const ApplyOptions& opt = {});

// Pure Gaussian average E f(center + sigma Y) by quadrature/Monte Carlo (no closed form).
SemigroupEvaluation gaussian_average(const SemigroupFunction& f, const Vec& center, double sigma, double chain,
                                     const ApplyOptions& opt);

/// Closed-form evaluator reused across many points at a fixed t.
class PreparedSemigroup {
public:
    PreparedSemigroup(SemigroupKind kind, const PolyGaussianMixture& f, double t);
    SemigroupEvaluation eval(const Vec& x, bool want_hess = true) const;
    double t() const { return t_; }
    // x -> P_t f(x) as a mixture.
    const PolyGaussianMixture& mixture() const { return smoothed_; }

private:
    double t_;
    PolyGaussianMixture smoothed_;
};

enum class SmoothingClass { unconditional, log_concave, log_convex, log_subharmonic };
const char* to_string(SmoothingClass c);

// Closed-form right-hand side of the relevant smoothing inequality.
double smoothing_rhs(SemigroupKind kind, SmoothingClass cls, double c, double t, int n);

// Largest admissible t for the log-concave upper bound (infinity when unrestricted).
double log_concave_window(SemigroupKind kind, double c);

BoundCertificate check_smoothing_bounds(SemigroupKind kind, const SemigroupFunction& f, double c,
                                        SmoothingClass cls, double t, const PointSet& probes,
                                        const ApplyOptions& opt = {});

struct MollifiedPair {
    int k = 1;
    Density source_k;
    Density target_k;
    double kappa_k = 0.0;
};

double mollified_kappa(double kappa, int k);

MollifiedPair mollify(const Density& mu, const Density& nu, double alpha, double kappa, int k,
                      const ApplyOptions& opt = {});

BoundCertificate covariance_identity_check(const SemigroupFunction& f, double t, const Vec& x,
                                           std::size_t samples = 1 << 15, const ApplyOptions& opt = {});

} // namespace lsot
