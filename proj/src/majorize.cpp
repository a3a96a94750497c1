#include "lsot/majorize.hpp"
#include "lsot/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

namespace lsot {

void ConvexTestFamily::validate(double scale) const
{
    std::vector<double> xs{0.0};
    for (int k = 0; k <= 60; ++k) xs.push_back(scale * std::pow(10.0, -8.0 + 9.0 * k / 60.0));
    for (const auto& m : members) {
        if (m.phi(0.0) != 0.0) throw InvalidInput("convex family: " + m.name + " must vanish at 0");
        for (std::size_t i = 0; i < xs.size(); ++i)
            for (std::size_t j = i + 1; j < xs.size(); ++j) {
                const double a = xs[i], b = xs[j];
                const double mid = m.phi(0.5 * (a + b));
                const double avg = 0.5 * (m.phi(a) + m.phi(b));
                if (mid > avg + 1e-12 * (1.0 + std::abs(avg)))
                    throw InvalidInput("convex family: " + m.name + " fails midpoint convexity");
            }
    }
}

ConvexTestFamily default_family(double sup)
{
    if (!(sup > 0.0)) throw InvalidInput("default_family: sup must be positive");
    ConvexTestFamily f;
    f.name = "default";
    f.members.push_back({"x log x", [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; }});
    f.members.push_back({"x^2", [](double x) { return x * x; }});
    f.members.push_back({"x^1.5", [](double x) { return x > 0.0 ? x * std::sqrt(x) : 0.0; }});
    for (double c : {0.1, 0.5, 1.0}) {
        std::ostringstream name;
        name << "(x - " << c << " sup)_+";
        const double th = c * sup;
        f.members.push_back({name.str(), [th](double x) { return std::max(x - th, 0.0); }});
    }
    f.members.push_back({"max(x - 1, 0)^2", [](double x) { return x > 1.0 ? (x - 1.0) * (x - 1.0) : 0.0; }});
    return f;
}

double convex_integral(const Density& rho, const std::function<double(double)>& phi, const Quadrature& q)
{
    if (phi(0.0) != 0.0) throw InvalidInput("convex_integral: phi(0) must vanish for integrals over the whole space");
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q.weights[i] == 0.0) continue;
        s += q.weights[i] * phi(rho.pdf(q.points[i]));
    }
    return s;
}

TransportMap Geodesic::interpolant(double t) const
{
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("geodesic: time outside [0, 1]");
    const TransportMap& T = base_map;
    const int n = T.dim;
    TransportMap g;
    g.dim = n;
    auto eval = T.eval;
    g.eval = [eval, t](const Vec& x) -> Vec { return (1.0 - t) * x + t * eval(x); };
    if (T.jacobian) {
        auto jac = T.jacobian;
        g.jacobian = [jac, t, n](const Vec& x) -> Mat { return (1.0 - t) * Mat::Identity(n, n) + t * jac(x); };
    }
    if (T.laplacian) {
        auto lap = T.laplacian;
        g.laplacian = [lap, t, n](const Vec& x) { return (1.0 - t) * n + t * lap(x); };
    }
    g.provenance = T.provenance;
    g.entropic_epsilon = T.entropic_epsilon;
    g.debiased = T.debiased;
    return g;
}

namespace {

// (w_i det J_t(x_i), mu(x_i) / det J_t(x_i)) over the quadrature nodes where mu > 0.
struct PushedNodes {
    std::vector<double> weight;
    std::vector<double> density;

    double integrate(const std::function<double(double)>& phi) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < weight.size(); ++i) s += weight[i] * phi(density[i]);
        return s;
    }
};

PushedNodes push_nodes(const Density& mu, const TransportMap& Tt, const Quadrature& q, double t)
{
    if (!Tt.has_jacobian()) throw InvalidInput("pushforward_integral: map has no Jacobian");
    PushedNodes out;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q.weights[i] == 0.0) continue;
        const Vec& x = q.points[i];
        const double rho = mu.pdf(x);
        if (rho == 0.0) continue;
        const double det = Tt.jacobian(x).determinant();
        if (!(det > 0.0)) {
            std::ostringstream os;
            os << "pushforward_integral: det J_t <= 0 at t = " << t << ", x = (" << x.transpose() << ")";
            throw DegeneracyError(os.str());
        }
        out.weight.push_back(q.weights[i] * det);
        out.density.push_back(rho / det);
    }
    return out;
}

} // namespace

double pushforward_integral(const Density& mu, const TransportMap& Tt, const std::function<double(double)>& phi,
                            const Quadrature& q, double t)
{
    if (phi(0.0) != 0.0) throw InvalidInput("pushforward_integral: phi(0) must vanish");
    return push_nodes(mu, Tt, q, t).integrate(phi);
}

BoundCertificate majorization_check(const Density& mu, const Density& nu, const TransportMap* map,
                                    const ConvexityCertificate& cert, const ConvexTestFamily& family,
                                    const Quadrature& q, const MajorizationOptions& opt)
{
    BoundCertificate c;
    c.bound_name = BoundName::majorization;
    c.label = "majorization on the test family '" + family.name + "': int phi(mu) <= int phi(nu)";
    c.theoretical_rhs = 0.0;
    c.tolerance = opt.tolerance;
    c.probe_count = family.members.size();
    const bool via_map = map && opt.use_map;
    c.provenance = via_map ? to_string(map->provenance) : "densities";
    if (via_map) c.epsilon = map->entropic_epsilon;
    if (!cert.alpha || !cert.kappa) throw InvalidInput("majorization_check: certificate needs alpha and kappa");
    if (*cert.alpha / *cert.kappa > 1.0 + 1e-12) {
        c.verdict = Verdict::inconclusive;
        c.observed = std::numeric_limits<double>::quiet_NaN();
        c.notes.push_back("precondition alpha/kappa <= 1 does not hold; nothing is claimed");
        return c;
    }
    double worst = -std::numeric_limits<double>::infinity();
    std::string worst_name;
    std::optional<PushedNodes> pushed;
    if (via_map) pushed = push_nodes(mu, *map, q, 1.0);
    for (const auto& m : family.members) {
        const double lhs = convex_integral(mu, m.phi, q);
        const double rhs = via_map ? pushed->integrate(m.phi) : convex_integral(nu, m.phi, q);
        c.series.push_back({m.name + ":mu", 0.0, lhs});
        c.series.push_back({m.name + ":nu", 1.0, rhs});
        if (lhs - rhs > worst) {
            worst = lhs - rhs;
            worst_name = m.name;
        }
    }
    c.observed = worst;
    c.notes.push_back("worst member: " + worst_name);
    decide(c, VerdictPolicy{via_map && is_entropic(map->provenance)});
    return c;
}

GeodesicResult geodesic_monotonicity_check(const Density& mu, const Geodesic& geo, const ConvexTestFamily& family,
                                           const Quadrature& q, const BoundCertificate* trace_certificate,
                                           const GeodesicOptions& opt)
{
    if (geo.times.size() < 2) throw InvalidInput("geodesic_monotonicity_check: need at least two times");
    for (std::size_t i = 1; i < geo.times.size(); ++i)
        if (!(geo.times[i] > geo.times[i - 1])) throw InvalidInput("geodesic_monotonicity_check: times must increase");
    GeodesicResult r;
    BoundCertificate& c = r.certificate;
    c.bound_name = BoundName::geodesic_monotonicity;
    c.label = "t -> int phi(rho_t) non-decreasing on the test family '" + family.name + "'";
    c.theoretical_rhs = 0.0;
    c.tolerance = opt.tolerance;
    c.provenance = to_string(geo.base_map.provenance);
    c.epsilon = geo.base_map.entropic_epsilon;
    c.probe_count = geo.times.size() * family.members.size();

    std::vector<TransportMap> maps;
    std::vector<PushedNodes> pushed;
    for (double t : geo.times) {
        maps.push_back(geo.interpolant(t));
        pushed.push_back(push_nodes(mu, maps.back(), q, t));
    }
    double worst = 0.0;
    for (const auto& m : family.members) {
        if (m.phi(0.0) != 0.0) throw InvalidInput("pushforward_integral: phi(0) must vanish");
        std::vector<double> vals;
        for (std::size_t k = 0; k < maps.size(); ++k) {
            vals.push_back(pushed[k].integrate(m.phi));
            c.series.push_back({m.name, geo.times[k], vals.back()});
        }
        for (std::size_t k = 1; k < vals.size(); ++k) worst = std::max(worst, vals[k - 1] - vals[k]);
        r.values.push_back(std::move(vals));
    }
    c.observed = worst;  // largest backward step
    if (opt.per_time_trace) {
        if (opt.probes.empty()) throw InvalidInput("geodesic_monotonicity_check: per-time trace needs probes");
        const int n = geo.base_map.dim;
        for (std::size_t k = 0; k < maps.size(); ++k) {
            BoundCertificate tc;
            tc.bound_name = BoundName::trace;
            tc.label = "sup tr D T_t <= n at t = " + std::to_string(geo.times[k]);
            tc.theoretical_rhs = n;
            tc.provenance = c.provenance;
            tc.probe_count = opt.probes.size();
            tc.observed = -std::numeric_limits<double>::infinity();
            for (const Vec& x : opt.probes) tc.observed = std::max(tc.observed, maps[k].trace_at(x));
            decide(tc);
            r.per_time_trace.push_back(tc);
        }
    }
    if (trace_certificate && !trace_certificate->passed()) {
        c.verdict = Verdict::inconclusive;
        c.notes.push_back("base map trace certificate did not pass; monotonicity is not claimed");
        return r;
    }
    decide(c, VerdictPolicy{is_entropic(geo.base_map.provenance)});
    return r;
}

double entropy(const Density& rho, const Quadrature& q)
{
    if (!rho.normalized()) throw InvalidInput("entropy: density must be normalized");
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q.weights[i] == 0.0) continue;
        const double l = rho.log_density(q.points[i]);
        if (!std::isfinite(l)) continue;  // 0 log 0 = 0
        s += q.weights[i] * std::exp(l) * l;
    }
    return s;
}

EntropyStability entropy_stability_check(const Density& mu, const Density& nu, const TransportMap& T,
                                         const ConvexityCertificate& cert, const Quadrature& q_mu,
                                         const Quadrature& q_nu, double tol)
{
    if (!T.has_jacobian()) throw InvalidInput("entropy_stability_check: map has no Jacobian");
    if (!cert.alpha || !cert.kappa) throw InvalidInput("entropy_stability_check: certificate needs alpha and kappa");
    const int n = T.dim;
    EntropyStability out;
    EntropyReport& e = out.report;
    e.h_mu = entropy(mu, q_mu);
    e.h_nu = entropy(nu, q_nu);
    e.gap = e.h_nu - e.h_mu;
    double frob = 0.0;
    for (std::size_t i = 0; i < q_mu.size(); ++i) {
        if (q_mu.weights[i] == 0.0) continue;
        const double w = q_mu.weights[i] * mu.pdf(q_mu.points[i]);
        if (w == 0.0) continue;
        frob += w * (T.jacobian(q_mu.points[i]) - Mat::Identity(n, n)).squaredNorm();
    }
    e.stability_rhs = frob / (2.0 * n * n);
    e.method = "mu: " + q_mu.description + "; nu: " + q_nu.description;

    BoundCertificate& c = out.certificate;
    c.bound_name = BoundName::entropy_stability;
    c.label = "H(nu) - H(mu) >= (1/2n^2) int |DT - I|_F^2 dmu";
    c.relation = Relation::at_least;
    c.theoretical_rhs = e.stability_rhs;
    c.observed = e.gap;
    c.tolerance = tol;
    c.provenance = to_string(T.provenance);
    c.epsilon = T.entropic_epsilon;
    c.probe_count = q_mu.size();
    if (*cert.alpha / *cert.kappa > 1.0 + 1e-12) {
        c.verdict = Verdict::inconclusive;
        c.notes.push_back("precondition alpha/kappa <= 1 does not hold; nothing is claimed");
        return out;
    }
    decide(c, VerdictPolicy{is_entropic(T.provenance)});
    if (std::abs(e.gap) <= tol) {
        // Equality forces the map to the identity.
        if (frob > 2.0 * n * n * tol) {
            c.verdict = Verdict::fail;
            c.notes.push_back("zero entropy gap but the map is not the identity");
        } else {
            c.notes.push_back("zero entropy gap with identity map");
        }
    }
    return out;
}

namespace {

double digamma_int(std::size_t n)
{
    double s = -0.57721566490153286061;
    for (std::size_t k = 1; k < n; ++k) s += 1.0 / static_cast<double>(k);
    return s;
}

} // namespace

SampleEntropy knn_entropy(const PointSet& samples, int k, int bootstrap, std::uint64_t seed, double level)
{
    const std::size_t N = samples.size();
    if (k < 1 || N <= static_cast<std::size_t>(k) + 1) throw InvalidInput("knn_entropy: too few samples for k");
    const int n = static_cast<int>(samples.front().size());
    std::vector<double> contrib(N);
    std::vector<double> d(N);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) d[j] = (samples[i] - samples[j]).squaredNorm();
        d[i] = std::numeric_limits<double>::infinity();
        std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
        const double r = std::sqrt(d[k - 1]);
        if (!(r > 0.0)) throw DegeneracyError("knn_entropy: duplicate samples");
        contrib[i] = n * std::log(r);
    }
    // log volume of the unit ball
    const double log_vn = 0.5 * n * std::log(M_PI) - std::lgamma(0.5 * n + 1.0);
    const double offset = digamma_int(N) - digamma_int(static_cast<std::size_t>(k)) + log_vn;
    auto estimate = [&](const std::vector<double>& c) {
        return -(offset + std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size()));
    };
    SampleEntropy out;
    out.k = k;
    out.samples = N;
    out.estimate = estimate(contrib);
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, N - 1);
    std::vector<double> boots;
    std::vector<double> re(N);
    for (int b = 0; b < bootstrap; ++b) {
        for (std::size_t i = 0; i < N; ++i) re[i] = contrib[pick(rng)];
        boots.push_back(estimate(re));
    }
    std::sort(boots.begin(), boots.end());
    if (!boots.empty()) {
        const double a = 0.5 * (1.0 - level);
        out.ci_low = boots[static_cast<std::size_t>(std::floor(a * (boots.size() - 1)))];
        out.ci_high = boots[static_cast<std::size_t>(std::ceil((1.0 - a) * (boots.size() - 1)))];
    } else {
        out.ci_low = out.ci_high = out.estimate;
    }
    out.note = "Kozachenko-Leonenko estimator; bias of order N^{-1/n} not corrected; interval resamples per-point terms";
    return out;
}

} // namespace lsot
