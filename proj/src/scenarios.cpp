#include "lsot/scenarios.hpp"

#include "lsot/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lsot {

namespace {

double factorial(int k) { return std::tgamma(k + 1.0); }

BoundCertificate growth_certificate(std::string label, double observed, std::size_t probes)
{
    BoundCertificate c;
    c.bound_name = BoundName::growth;
    c.label = std::move(label);
    c.theoretical_rhs = 0.0;
    c.observed = observed;
    c.relation = Relation::at_most;
    c.tolerance = 1e-12;
    c.provenance = "analytic";
    c.probe_count = probes;
    decide(c);
    return c;
}

std::complex<double> eval1(const ComplexPolynomial& f, double q, double p)
{
    return f.eval({std::complex<double>(q, p)});
}

} // namespace

// ---- Fock ----------------------------------------------------------------

double fock_norm(const ComplexPolynomial& f, double p, double sigma)
{
    if (f.d != 1) throw InvalidInput("fock_norm: one complex variable only");
    if (!(p >= 1.0) || !(sigma > 0.0)) throw InvalidInput("fock_norm: need p >= 1 and sigma > 0");
    if (p == 2.0) {
        // Monomials are orthogonal under the rotation-invariant Gaussian; E|z|^{2k} = k! sigma^k.
        std::map<int, std::complex<double>> merged;
        for (const auto& [e, c] : f.coefficients) merged[e[0]] += c;
        double s = 0.0;
        for (const auto& [k, c] : merged) s += std::norm(c) * factorial(k) * std::pow(sigma, k);
        return std::sqrt(s);
    }
    const int deg = f.degree();
    const double r_max = std::sqrt(sigma / p * (80.0 + 4.0 * p * deg));
    const int angles = std::min(512, 32 + 8 * static_cast<int>(std::ceil(p * deg)));
    const Quadrature q = polar_quadrature(Vec::Zero(2), r_max, 64, 8, angles);
    const double lnorm = std::log(p / (2.0 * M_PI * sigma));
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const Vec& x = q.points[i];
        const double a = std::abs(eval1(f, x[0], x[1]));
        if (a == 0.0) continue;
        s += q.weights[i] * std::exp(p * std::log(a) - p * x.squaredNorm() / (2.0 * sigma) + lnorm);
    }
    return std::pow(s, 1.0 / p);
}

FockInstance build_fock_instance(double p, double sigma, const ComplexPolynomial& f, std::string name)
{
    if (f.coefficients.empty()) throw InvalidInput("build_fock_instance: zero polynomial");
    const double nrm = fock_norm(f, p, sigma);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw InvalidInput("build_fock_instance: norm not positive");

    FockInstance inst;
    inst.p = p;
    inst.sigma = sigma;
    inst.name = std::move(name);
    inst.input_norm = nrm;
    inst.f = f;
    for (auto& [e, c] : inst.f.coefficients) c /= nrm;

    const double s = sigma / p;  // gamma_{sigma/p}
    const TruncationBox box = TruncationBox::cube(2, std::sqrt(s * (60.0 + 4.0 * p * f.degree())), 128);
    inst.nu = gaussian(Vec::Zero(2), s * Mat::Identity(2, 2)).with_box(box);
    const nlohmann::json spec = {{"kind", "fock"}, {"name", inst.name}, {"p", p}, {"sigma", sigma}};
    const auto cert_mu = ConvexityCertificate::analytic(p / sigma, std::nullopt);
    if (p == 2.0) {
        // |f|^2 e^{-|z|^2/sigma} / (pi sigma), exact polynomial-Gaussian form.
        PolyGaussianTerm t{inst.f.modulus_squared(), (2.0 / sigma) * Mat::Identity(2, 2), Vec::Zero(2),
                           -std::log(M_PI * sigma)};
        const PolyGaussianMixture mix({t});
        inst.mu = from_mixture(mix, box, cert_mu, spec);
    } else {
        const ComplexPolynomial g = inst.f;
        const double lnorm = std::log(p / (2.0 * M_PI * sigma));
        DensityParts parts;
        parts.dim = 2;
        parts.log_density = [g, p, sigma, lnorm](const Vec& x) {
            const double a = std::abs(eval1(g, x[0], x[1]));
            if (a == 0.0) return -std::numeric_limits<double>::infinity();
            return p * std::log(a) - p * x.squaredNorm() / (2.0 * sigma) + lnorm;
        };
        parts.normalized = true;
        parts.log_partition = 0.0;
        parts.box = box;
        parts.certificate = cert_mu;
        parts.spec = spec;
        inst.mu = Density::make(std::move(parts));
    }
    inst.nu = inst.nu.with_certificate(ConvexityCertificate::analytic(std::nullopt, p / sigma));
    inst.certificate = ConvexityCertificate::analytic(p / sigma, p / sigma);
    return inst;
}

BoundCertificate fock_growth_check(const FockInstance& inst, const std::vector<std::complex<double>>& zs)
{
    if (zs.empty()) throw InvalidInput("fock_growth_check: no probes");
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& z : zs) {
        const double a = std::abs(inst.f.eval({z}));
        const double v = (a > 0.0 ? std::log(a) : -std::numeric_limits<double>::infinity()) -
                         std::norm(z) / (2.0 * inst.sigma);
        worst = std::max(worst, v);
    }
    return growth_certificate("fock growth " + inst.name, worst, zs.size());
}

std::vector<FockInstance> builtin_fock_instances()
{
    using C = std::complex<double>;
    auto poly = [](std::vector<std::pair<int, C>> terms) {
        ComplexPolynomial f;
        f.d = 1;
        for (auto& [k, c] : terms) f.coefficients.push_back({{k}, c});
        return f;
    };
    std::vector<FockInstance> out;
    out.push_back(build_fock_instance(2.0, 1.0, poly({{0, 1.0}}), "constant"));
    out.push_back(build_fock_instance(2.0, 1.0, poly({{1, C(0.6, 0.8)}}), "linear"));
    out.push_back(build_fock_instance(1.0, 0.5, poly({{0, 1.0}, {2, 0.5}}), "quadratic p=1"));
    // (z - a)^3 with a = 0.5 - 0.25i
    const C a(0.5, -0.25);
    out.push_back(build_fock_instance(4.0, 2.0, poly({{3, 1.0}, {2, -3.0 * a}, {1, 3.0 * a * a}, {0, -a * a * a}}),
                                      "cubic p=4"));
    out.push_back(build_fock_instance(3.0, 1.5, poly({{0, 1.0}, {1, 1.0}, {2, 1.0}}), "quadratic p=3"));
    return out;
}

// ---- log-subharmonic ------------------------------------------------------

LshInstance build_lsh_instance(LshKind kind, int n, double parameter)
{
    if (n < 1) throw InvalidInput("build_lsh_instance: dimension must be positive");
    LshInstance inst;
    inst.n = n;
    ScalarField singular;
    switch (kind) {
    case LshKind::radial_square: {
        if (n < 2) throw InvalidInput("build_lsh_instance: |x|^2 is log-subharmonic only for n >= 2");
        inst.name = "radial square n=" + std::to_string(n);
        inst.beta = 0.0;
        const double c = std::log(static_cast<double>(n));
        inst.log_f = [c](const Vec& x) { return std::log(x.squaredNorm()) - c; };
        singular = [](const Vec& x) { return x.norm(); };
        break;
    }
    case LshKind::radial_fourth: {
        if (n < 2) throw InvalidInput("build_lsh_instance: |x|^4 is log-subharmonic only for n >= 2");
        inst.name = "radial fourth n=" + std::to_string(n);
        inst.beta = 0.0;
        const double c = std::log(static_cast<double>(n) * (n + 2));
        inst.log_f = [c](const Vec& x) { return 2.0 * std::log(x.squaredNorm()) - c; };
        singular = [](const Vec& x) { return x.norm(); };
        break;
    }
    case LshKind::gaussian_ratio: {
        const double s = parameter;  // density ratio of N(0, s^2 Id) to gamma
        if (!(s > 0.0) || !(s < 1.0)) throw InvalidInput("build_lsh_instance: Gaussian ratio needs 0 < s < 1");
        inst.name = "gaussian ratio s=" + std::to_string(s);
        inst.beta = 1.0 / (s * s) - 1.0;
        const double k = 0.5 * (1.0 - 1.0 / (s * s));
        const double c = -n * std::log(s);
        inst.log_f = [k, c](const Vec& x) { return c + k * x.squaredNorm(); };
        break;
    }
    case LshKind::hyperbolic: {
        const double a = parameter;
        if (n < 2 || !(std::abs(a) < 1.0)) throw InvalidInput("build_lsh_instance: e^{a x1 x2} needs n >= 2, |a| < 1");
        inst.name = "hyperbolic a=" + std::to_string(a);
        inst.beta = 0.0;
        const double c = 0.5 * std::log(1.0 - a * a);
        inst.log_f = [a, c](const Vec& x) { return c + a * x[0] * x[1]; };
        break;
    }
    case LshKind::cosh_pair: {
        const double a = parameter;  // shift along the diagonal, |shift|^2 = n a^2
        inst.name = "cosh pair a=" + std::to_string(a);
        inst.beta = 0.0;
        const double half_sq = 0.5 * n * a * a;
        inst.log_f = [a, half_sq](const Vec& x) {
            const double t = a * x.sum();
            // log cosh without overflow
            return std::abs(t) + std::log1p(std::exp(-2.0 * std::abs(t))) - std::log(2.0) - half_sq;
        };
        break;
    }
    }

    const ScalarField lf = inst.log_f;
    const double lg = -0.5 * n * std::log(2.0 * M_PI);
    DensityParts parts;
    parts.dim = n;
    parts.log_density = [lf, lg](const Vec& x) { return lf(x) + lg - 0.5 * x.squaredNorm(); };
    parts.normalized = true;
    parts.log_partition = 0.0;
    parts.box = TruncationBox::cube(n, 9.0 + 2.0 * std::sqrt(inst.beta), 96);
    parts.certificate = ConvexityCertificate::analytic(inst.beta + 1.0, std::nullopt);
    parts.singular_distance = singular;
    parts.spec = {{"kind", "log-subharmonic"}, {"name", inst.name}, {"beta", inst.beta}};
    inst.mu = Density::make(std::move(parts));
    inst.nu = gaussian(Vec::Zero(n), Mat::Identity(n, n)).with_certificate(ConvexityCertificate::analytic(1.0, 1.0));
    inst.certificate = ConvexityCertificate::analytic(inst.beta + 1.0, 1.0);
    return inst;
}

BoundCertificate lsh_growth_check(const LshInstance& inst, const PointSet& xs)
{
    if (xs.empty()) throw InvalidInput("lsh_growth_check: no probes");
    const double cap = 0.5 * inst.n * std::log(inst.beta + 1.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (const Vec& x : xs) {
        if (x.size() != inst.n) throw InvalidInput("lsh_growth_check: probe dimension mismatch");
        const double v = inst.log_f(x) - 0.5 * x.squaredNorm() - cap;
        if (!std::isnan(v)) worst = std::max(worst, v);
    }
    return growth_certificate("lsh growth " + inst.name, worst, xs.size());
}

std::vector<LshInstance> builtin_lsh_instances()
{
    return {build_lsh_instance(LshKind::radial_square, 3, 0.0), build_lsh_instance(LshKind::gaussian_ratio, 2, 0.7), build_lsh_instance(LshKind::hyperbolic, 2, 0.5),
            build_lsh_instance(LshKind::cosh_pair, 2, 0.8), build_lsh_instance(LshKind::radial_fourth, 2, 0.0)};
}

std::vector<std::complex<double>> complex_probes(std::size_t count, double radius, std::uint64_t seed)
{
    std::vector<std::complex<double>> out;
    out.reserve(count);
    if (count == 0) return out;
    out.emplace_back(0.0, 0.0);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (out.size() < count) {
        const double r = radius * std::sqrt(u(rng));
        const double th = 2.0 * M_PI * u(rng);
        out.emplace_back(r * std::cos(th), r * std::sin(th));
    }
    return out;
}

PointSet ball_probes(int n, std::size_t count, double radius, std::uint64_t seed)
{
    PointSet out;
    out.reserve(count);
    if (count == 0) return out;
    out.push_back(Vec::Zero(n));
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (out.size() < count) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x[i] = g(rng);
        const double nx = x.norm();
        if (nx == 0.0) continue;
        out.push_back(x * (radius * std::pow(u(rng), 1.0 / n) / nx));
    }
    return out;
}

// ---- Husimi ----------------------------------------------------------------

WehrlState WehrlState::fock(int k)
{
    if (k < 0) throw InvalidInput("WehrlState::fock: negative level");
    WehrlState s;
    s.d = 1;
    ComplexPolynomial f;
    f.d = 1;
    f.coefficients.push_back({{k}, 1.0});
    s.components.push_back({1.0, f});
    return s;
}

WehrlState WehrlState::fock_mixture(const std::vector<double>& weights)
{
    WehrlState s;
    s.d = 1;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] == 0.0) continue;
        ComplexPolynomial f;
        f.d = 1;
        f.coefficients.push_back({{static_cast<int>(k)}, 1.0});
        s.components.push_back({weights[k], f});
    }
    return s;
}

namespace {

// <f, g> = int f conj(g) e^{-pi |z|^2}; monomials z^a are orthogonal with norm^2 a! / pi^|a|.
std::complex<double> bargmann_inner(const ComplexPolynomial& f, const ComplexPolynomial& g)
{
    std::complex<double> s = 0.0;
    for (const auto& [ea, ca] : f.coefficients)
        for (const auto& [eb, cb] : g.coefficients) {
            if (ea != eb) continue;
            double w = 1.0;
            for (int k : ea) w *= factorial(k) / std::pow(M_PI, k);
            s += ca * std::conj(cb) * w;
        }
    return s;
}

// The single exponent of a one-monomial polynomial, or -1.
int single_monomial(const ComplexPolynomial& f)
{
    std::map<int, std::complex<double>> merged;
    for (const auto& [e, c] : f.coefficients) merged[e[0]] += c;
    int k = -1;
    for (const auto& [e, c] : merged)
        if (c != 0.0) {
            if (k >= 0) return -1;
            k = e;
        }
    return k;
}

} // namespace

WehrlInstance build_wehrl_instance(const WehrlState& state_in)
{
    WehrlState state = state_in;
    const int d = state.d;
    if (d < 1) throw InvalidInput("build_wehrl_instance: d must be positive");
    if (state.components.empty()) throw InvalidInput("build_wehrl_instance: no components");
    if (state.center.size() == 0) state.center = Vec::Zero(2 * d);
    if (state.center.size() != 2 * d) throw InvalidInput("build_wehrl_instance: center must have length 2d");

    double wsum = 0.0;
    for (auto& c : state.components) {
        if (!(c.weight >= 0.0)) throw InvalidInput("build_wehrl_instance: negative mixture weight");
        if (c.poly.d != d) throw InvalidInput("build_wehrl_instance: component dimension mismatch");
        for (const auto& [e, co] : c.poly.coefficients)
            if (static_cast<int>(e.size()) != d) throw InvalidInput("build_wehrl_instance: exponent length mismatch");
        const double nn = std::sqrt(bargmann_inner(c.poly, c.poly).real());
        if (!(nn > 0.0)) throw InvalidInput("build_wehrl_instance: zero component");
        for (auto& [e, co] : c.poly.coefficients) co /= nn;
        wsum += c.weight;
    }
    if (!(wsum > 0.0)) throw InvalidInput("build_wehrl_instance: weights sum to zero");
    for (auto& c : state.components) c.weight /= wsum;

    WehrlInstance w;
    const std::size_t m = state.components.size();
    w.gram = Mat::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double v = std::abs(bargmann_inner(state.components[i].poly, state.components[j].poly));
            w.gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            if (i != j && v > 1e-8)
                throw InvalidInput("build_wehrl_instance: components " + std::to_string(i) + " and " +
                                   std::to_string(j) + " are not orthogonal (|<f_i, f_j>| = " + std::to_string(v) +
                                   ")");
        }

    // Displaced symbol: rho(x) = sum_j lambda_j |f_j|^2(x - c) e^{-pi |x - c|^2}, c = (q0, -p0).
    Vec c = state.center;
    c.tail(d) = -c.tail(d);
    const int n = 2 * d;
    Polynomial P(n);
    for (const auto& comp : state.components) P = P + comp.poly.modulus_squared() * comp.weight;
    P = P.compose_affine(Mat::Identity(n, n), -c);
    const PolyGaussianMixture mix({PolyGaussianTerm{P, 2.0 * M_PI * Mat::Identity(n, n), 2.0 * M_PI * c,
                                                    -M_PI * c.squaredNorm()}});
    w.state = state;

    int kmax = 0;
    for (const auto& comp : state.components) kmax = std::max(kmax, comp.poly.degree());
    const double half = std::sqrt((30.0 + 3.0 * kmax) / M_PI);
    const TruncationBox box{c, Vec::Constant(n, half), 128};
    const double a = 2.0 * M_PI;
    // Unit-norm components and unit total weight make the symbol a probability density.
    DensityParts mp;
    mp.dim = n;
    mp.log_density = [mix](const Vec& x) { return mix.log_value(x); };
    mp.grad_log = [mix](const Vec& x) { return mix.grad_log(x); };
    mp.hess_log = [mix](const Vec& x) { return mix.hess_log(x); };
    mp.normalized = true;
    mp.log_partition = 0.0;
    mp.box = box;
    mp.closed_form = mix;
    mp.certificate = ConvexityCertificate::analytic(a, std::nullopt);
    mp.spec = {{"kind", "husimi"}, {"components", m}, {"d", d}};
    w.mu = Density::make(std::move(mp));
    w.nu = gaussian(c, Mat::Identity(n, n) / (2.0 * M_PI))
               .with_box(box)
               .with_certificate(ConvexityCertificate::analytic(a, a));
    w.certificate = ConvexityCertificate::analytic(a, a);

    // The Husimi density is bounded by 1.
    const PointSet probes = d == 1 ? tensor_grid(box, 81) : ball_probes(n, 4000, half, 11);
    for (const Vec& x : probes) w.probe_sup = std::max(w.probe_sup, mix.value(x));
    if (w.probe_sup > 1.0 + 1e-9)
        throw InvalidInput("build_wehrl_instance: Husimi density exceeds 1 (" + std::to_string(w.probe_sup) +
                           "); the symbols are not a valid state");

    bool radial = d == 1 && state.center.norm() == 0.0;
    std::vector<std::pair<double, int>> levels;
    for (const auto& comp : state.components) {
        const int k = single_monomial(comp.poly);
        if (k < 0) {
            radial = false;
            break;
        }
        levels.push_back({comp.weight, k});
    }
    if (radial) {
        w.profile_mu = [levels](double r) {
            const double s = M_PI * r * r;
            double v = 0.0;
            for (const auto& [lam, k] : levels) v += lam * std::pow(s, k) / factorial(k);
            return v * std::exp(-s);
        };
        w.profile_nu = [](double r) { return std::exp(-M_PI * r * r); };
    }
    return w;
}

TruncationBox wehrl_box(const WehrlInstance& w, int grid_points)
{
    TruncationBox b = w.mu.box();
    b.grid_points_per_axis = grid_points;
    return b;
}

// ---- Coulomb gas -------------------------------------------------------------

namespace {

struct Potential {
    int N;
    double beta;
    std::vector<double> q;
    bool interaction;

    double Q(double r2) const
    {
        double s = 0.0, p = r2;
        for (double c : q) {
            s += c * p;
            p *= r2;
        }
        return s;
    }
    // grad Q = g z, Hess Q = g I + h z z^T
    void dQ(double r2, double& g, double& h) const
    {
        g = h = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k) {
            const double kk = static_cast<double>(k);
            g += q[k] * 2.0 * (kk + 1.0) * std::pow(r2, kk);
            if (k > 0) h += q[k] * 4.0 * (kk + 1.0) * kk * std::pow(r2, kk - 1.0);
        }
    }

    double V(const Vec& x) const
    {
        double v = 0.0;
        for (int j = 0; j < N; ++j) v += beta * N * Q(x.segment<2>(2 * j).squaredNorm());
        if (interaction)
            for (int i = 0; i < N; ++i)
                for (int j = i + 1; j < N; ++j)
                    v -= 0.5 * beta * std::log((x.segment<2>(2 * i) - x.segment<2>(2 * j)).squaredNorm());
        return v;
    }
    Vec grad(const Vec& x) const
    {
        Vec g = Vec::Zero(2 * N);
        for (int j = 0; j < N; ++j) {
            const Eigen::Vector2d z = x.segment<2>(2 * j);
            double a, b;
            dQ(z.squaredNorm(), a, b);
            g.segment<2>(2 * j) += beta * N * a * z;
        }
        if (interaction)
            for (int i = 0; i < N; ++i)
                for (int j = i + 1; j < N; ++j) {
                    const Eigen::Vector2d w = x.segment<2>(2 * i) - x.segment<2>(2 * j);
                    const Eigen::Vector2d t = -beta * w / w.squaredNorm();
                    g.segment<2>(2 * i) += t;
                    g.segment<2>(2 * j) -= t;
                }
        return g;
    }
    Mat hess(const Vec& x) const
    {
        Mat H = Mat::Zero(2 * N, 2 * N);
        for (int j = 0; j < N; ++j) {
            const Eigen::Vector2d z = x.segment<2>(2 * j);
            double a, b;
            dQ(z.squaredNorm(), a, b);
            H.block<2, 2>(2 * j, 2 * j) += beta * N * (a * Eigen::Matrix2d::Identity() + b * z * z.transpose());
        }
        if (interaction)
            for (int i = 0; i < N; ++i)
                for (int j = i + 1; j < N; ++j) {
                    const Eigen::Vector2d w = x.segment<2>(2 * i) - x.segment<2>(2 * j);
                    const double r2 = w.squaredNorm();
                    const Eigen::Matrix2d M =
                        -beta * (Eigen::Matrix2d::Identity() / r2 - 2.0 * w * w.transpose() / (r2 * r2));
                    H.block<2, 2>(2 * i, 2 * i) += M;
                    H.block<2, 2>(2 * j, 2 * j) += M;
                    H.block<2, 2>(2 * i, 2 * j) -= M;
                    H.block<2, 2>(2 * j, 2 * i) -= M;
                }
        return H;
    }
};

double split_rhat(const std::vector<std::vector<double>>& chains)
{
    std::vector<std::vector<double>> seqs;
    for (const auto& c : chains) {
        const std::size_t h = c.size() / 2;
        if (h < 2) return std::numeric_limits<double>::infinity();
        seqs.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
        seqs.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(h), c.begin() + static_cast<std::ptrdiff_t>(2 * h));
    }
    const double len = static_cast<double>(seqs[0].size());
    const double m = static_cast<double>(seqs.size());
    std::vector<double> means;
    double W = 0.0;
    for (const auto& s : seqs) {
        double mu = 0.0;
        for (double v : s) mu += v;
        mu /= len;
        double var = 0.0;
        for (double v : s) var += (v - mu) * (v - mu);
        W += var / (len - 1.0);
        means.push_back(mu);
    }
    W /= m;
    double grand = 0.0;
    for (double v : means) grand += v;
    grand /= m;
    double B = 0.0;
    for (double v : means) B += (v - grand) * (v - grand);
    B *= len / (m - 1.0);
    if (!(W > 0.0)) return std::numeric_limits<double>::infinity();
    const double vplus = (len - 1.0) / len * W + B / len;
    return std::sqrt(vplus / W);
}

} // namespace

SampleSet metropolis(const Density& d, std::size_t count, double step, std::size_t burn_in, int chains, int thin,
                     std::uint64_t seed)
{
    if (count == 0) throw InvalidInput("metropolis: count must be positive");
    if (chains < 1 || thin < 1 || !(step > 0.0)) throw InvalidInput("metropolis: bad chain settings");
    const int n = d.dim();
    const std::size_t per = (count + static_cast<std::size_t>(chains) - 1) / static_cast<std::size_t>(chains);
    const TruncationBox& box = d.box();

    SampleSet out;
    std::vector<std::vector<std::vector<double>>> stats(static_cast<std::size_t>(n + 1));
    std::size_t accepted = 0, proposed = 0;
    for (int c = 0; c < chains; ++c) {
        Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(c) * 7919ULL + 17ULL);
        std::normal_distribution<double> g(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        // Overdispersed start inside the box.
        Vec x(n);
        double lx = -std::numeric_limits<double>::infinity();
        for (int tries = 0; tries < 1000 && !std::isfinite(lx); ++tries) {
            for (int i = 0; i < n; ++i) x[i] = box.center[i] + 0.5 * box.half_widths[i] * (2.0 * u(rng) - 1.0);
            lx = d.log_density(x);
        }
        if (!std::isfinite(lx)) throw SupportError("metropolis: no finite starting point in the box");
        for (auto& s : stats) s.emplace_back();
        const std::size_t total = burn_in + per * static_cast<std::size_t>(thin);
        for (std::size_t it = 0; it < total; ++it) {
            Vec y(n);
            for (int i = 0; i < n; ++i) y[i] = x[i] + step * g(rng);
            const double ly = d.log_density(y);
            ++proposed;
            if (std::isfinite(ly) && std::log(u(rng)) < ly - lx) {
                x = y;
                lx = ly;
                ++accepted;
            }
            if (it >= burn_in && (it - burn_in) % static_cast<std::size_t>(thin) == 0) {
                out.points.push_back(x);
                for (int i = 0; i < n; ++i) stats[static_cast<std::size_t>(i)].back().push_back(x[i]);
                stats[static_cast<std::size_t>(n)].back().push_back(lx);
            }
        }
    }
    // Interleave chains so a prefix of the set mixes all of them; then trim to `count`.
    PointSet merged;
    merged.reserve(count);
    for (std::size_t k = 0; k < per && merged.size() < count; ++k)
        for (int c = 0; c < chains && merged.size() < count; ++c)
            merged.push_back(out.points[static_cast<std::size_t>(c) * per + k]);
    out.points = std::move(merged);
    out.weights.assign(out.points.size(), 1.0 / static_cast<double>(out.points.size()));
    out.acceptance = static_cast<double>(accepted) / static_cast<double>(proposed);
    out.rhat = 1.0;
    for (const auto& s : stats) out.rhat = std::max(out.rhat, split_rhat(s));
    if (!out.converged())
        out.warnings.push_back("split R-hat " + std::to_string(out.rhat) + " exceeds 1.1; sample-route results are "
                               "inconclusive");
    return out;
}

CoulombInstance build_coulomb_instance(const CoulombSpec& spec)
{
    if (spec.N < 1) throw InvalidInput("build_coulomb_instance: N must be positive");
    if (!(spec.beta > 0.0)) throw InvalidInput("build_coulomb_instance: beta must be positive");
    if (spec.q_coeffs.empty() || !(spec.q_coeffs[0] > 0.0))
        throw InvalidInput("build_coulomb_instance: Q needs a positive |z|^2 coefficient");
    for (double c : spec.q_coeffs)
        if (!(c >= 0.0)) throw InvalidInput("build_coulomb_instance: Q coefficients must be non-negative");
    // Hess Q >= 2 q_1 Id with non-negative coefficients, attained at the origin.
    if (!(spec.kappa2 > 0.0) || spec.kappa2 > 2.0 * spec.q_coeffs[0] + 1e-12)
        throw InvalidInput("build_coulomb_instance: kappa2 must lie in (0, 2 q_1] for the given Q");

    CoulombInstance inst;
    inst.spec = spec;
    const int N = spec.N;
    const int n = 2 * N;
    const double a = spec.beta * N * spec.q_coeffs[0];
    const double sd = 1.0 / std::sqrt(2.0 * a);
    inst.box = TruncationBox::cube(n, 8.0 * sd, 32);
    const bool quadratic = spec.q_coeffs.size() == 1;
    const double k = spec.kappa2 * spec.beta * N;

    const Potential pm{N, spec.beta, spec.q_coeffs, true};
    const Potential pn{N, spec.beta, spec.q_coeffs, false};
    const nlohmann::json js = {{"kind", "coulomb"}, {"N", N}, {"beta", spec.beta}, {"Q", spec.q_coeffs}};

    DensityParts mp;
    mp.dim = n;
    mp.log_density = [pm](const Vec& x) { return -pm.V(x); };
    mp.grad_log = [pm](const Vec& x) -> Vec { return -pm.grad(x); };
    mp.hess_log = [pm](const Vec& x) -> Mat { return -pm.hess(x); };
    mp.box = inst.box;
    if (N == 2 && quadratic) {
        // Centre-of-mass and relative coordinates separate the integral.
        const double b = spec.beta;
        mp.log_partition = 0.5 * b * std::log(2.0) + std::log(M_PI) + std::lgamma(0.5 * b + 1.0) -
                           (0.5 * b + 1.0) * std::log(a) + std::log(M_PI / a);
    } else if (N == 1 && quadratic) {
        mp.log_partition = std::log(M_PI / a);
    }
    if (quadratic) mp.certificate = ConvexityCertificate::analytic(k, std::nullopt);
    mp.singular_distance = [N](const Vec& x) {
        double m = std::numeric_limits<double>::infinity();
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) m = std::min(m, (x.segment<2>(2 * i) - x.segment<2>(2 * j)).norm());
        return m;
    };
    mp.spec = js;
    inst.mu = Density::make(std::move(mp));

    if (quadratic) {
        inst.nu = gaussian(Vec::Zero(n), Mat::Identity(n, n) / (2.0 * a))
                      .with_box(inst.box)
                      .with_certificate(ConvexityCertificate::analytic(k, k));
    } else {
        DensityParts np;
        np.dim = n;
        np.log_density = [pn](const Vec& x) { return -pn.V(x); };
        np.grad_log = [pn](const Vec& x) -> Vec { return -pn.grad(x); };
        np.hess_log = [pn](const Vec& x) -> Mat { return -pn.hess(x); };
        np.box = inst.box;
        np.certificate = ConvexityCertificate::analytic(std::nullopt, k);
        np.spec = {{"kind", "coulomb reference"}, {"N", N}, {"beta", spec.beta}, {"Q", spec.q_coeffs}};
        inst.nu = Density::make(std::move(np));
    }
    inst.certificate = ConvexityCertificate::analytic(k, k);
    const CoulombSpec s = spec;
    inst.sampler = [s, sd](const Density& d, std::size_t count, std::uint64_t seed) {
        return metropolis(d, count, s.step * sd, s.burn_in, s.chains, s.thin, seed);
    };
    return inst;
}

} // namespace lsot
