#pragma once

#include "lsot/brenier.hpp"
#include "lsot/certificate.hpp"
#include "lsot/measures.hpp"
#include "lsot/polynomial.hpp"

#include <complex>
#include <optional>

namespace lsot {

// ---- Fock space growth ---------------------------------------------------

struct FockInstance {
    double p = 2.0;
    double sigma = 1.0;
    ComplexPolynomial f;       // rescaled so that |f|_{p,sigma} = 1
    double input_norm = 0.0;   // norm before rescaling
    Density mu;                // |f|^p gamma_{sigma/p}
    Density nu;                // gamma_{sigma/p}
    ConvexityCertificate certificate;
    std::string name;
};

// |f|_{p,sigma}^p = int |f|^p dgamma_{sigma/p}, gamma_s = N(0, s Id_2). Single complex variable.
double fock_norm(const ComplexPolynomial& f, double p, double sigma);

FockInstance build_fock_instance(double p, double sigma, const ComplexPolynomial& f, std::string name = "fock");

// |f(z)| <= e^{|z|^2 / (2 sigma)}, as max of log|f(z)| - |z|^2/(2 sigma) against 0.
BoundCertificate fock_growth_check(const FockInstance& inst, const std::vector<std::complex<double>>& zs);

std::vector<FockInstance> builtin_fock_instances();

// ---- log-subharmonic growth ---------------------------------------------

struct LshInstance {
    int n = 2;
    double beta = 0.0;       // Delta log f >= -beta n
    std::string name;
    ScalarField log_f;       // log of f with int f dgamma = 1
    Density mu;              // f dgamma
    Density nu;              // gamma
    ConvexityCertificate certificate;  // alpha = beta + 1, kappa = 1
};

enum class LshKind { radial_square, gaussian_ratio, hyperbolic, cosh_pair, radial_fourth };

LshInstance build_lsh_instance(LshKind kind, int n, double parameter);

// f(x) <= (beta + 1)^{n/2} e^{|x|^2/2}, in log form against 0.
BoundCertificate lsh_growth_check(const LshInstance& inst, const PointSet& xs);

std::vector<LshInstance> builtin_lsh_instances();

std::vector<std::complex<double>> complex_probes(std::size_t count, double radius, std::uint64_t seed);
PointSet ball_probes(int n, std::size_t count, double radius, std::uint64_t seed);

// ---- Husimi densities ----------------------------------------------------

struct WehrlComponent {
    double weight = 1.0;
    ComplexPolynomial poly;  // Bargmann symbol
};

struct WehrlState {
    int d = 1;
    std::vector<WehrlComponent> components;
    Vec center;  // (q0, p0), length 2d; empty means the origin

    static WehrlState fock(int k);
    // weights[k] on the k-th Fock state
    static WehrlState fock_mixture(const std::vector<double>& weights);
};

struct WehrlInstance {
    WehrlState state;  // components normalized in the Bargmann space
    Density mu;        // Husimi density
    Density nu;        // Glauber Gaussian N((q0, -p0), Id / 2 pi)
    ConvexityCertificate certificate;  // alpha = kappa = 2 pi
    Mat gram;
    std::optional<RadialProfile> profile_mu, profile_nu;  // centered monomial states only
    double probe_sup = 0.0;  // max of the Husimi density over the probe grid
};

WehrlInstance build_wehrl_instance(const WehrlState& state);

// Box used for Husimi quadrature and grids.
TruncationBox wehrl_box(const WehrlInstance& w, int grid_points = 128);

// ---- Coulomb gas ---------------------------------------------------------

struct CoulombSpec {
    int N = 2;
    double beta = 1.0;
    // Q(z) = sum_k q[k] |z|^{2(k+1)}; the default is |z|^2 / 2.
    std::vector<double> q_coeffs{0.5};
    double kappa2 = 1.0;
    double step = 1.0;  // random-walk step in units of the reference standard deviation
    std::size_t burn_in = 4000;
    int chains = 4;
    int thin = 5;
    std::uint64_t seed = 1;
};

struct SampleSet {
    PointSet points;
    std::vector<double> weights;
    double rhat = 1.0;  // split-chain potential scale reduction, worst statistic
    double acceptance = 0.0;
    std::vector<std::string> warnings;
    bool converged() const { return rhat <= 1.1; }
};

struct CoulombInstance {
    CoulombSpec spec;
    Density mu;
    Density nu;
    ConvexityCertificate certificate;  // alpha = kappa = kappa2 beta N
    TruncationBox box;
    std::function<SampleSet(const Density&, std::size_t, std::uint64_t)> sampler;
};

CoulombInstance build_coulomb_instance(const CoulombSpec& spec);

// Random-walk Metropolis with independent chains merged after split-R-hat diagnostics.
// Proposals with a non-finite log density are rejected.
SampleSet metropolis(const Density& d, std::size_t count, double step, std::size_t burn_in, int chains, int thin,
                     std::uint64_t seed);

} // namespace lsot
