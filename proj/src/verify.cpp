#include "lsot/verify.hpp"
#include "lsot/brenier.hpp"
#include "lsot/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lsot {

double default_slack(MapProvenance p)
{
    switch (p) {
    case MapProvenance::entropic_grid: return 0.05;
    case MapProvenance::entropic_sample: return 0.10;
    default: return 0.0;
    }
}

PointSet sample_density(const Density& d, std::size_t count, std::uint64_t seed)
{
    if (d.gaussian()) return gaussian_samples(d.gaussian()->mean, d.gaussian()->cov, count, seed);
    const int n = d.dim();
    const TruncationBox& box = d.box();
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    PointSet out;
    out.reserve(count);
    if (n <= 2) {
        // Categorical draw over grid cells, uniform inside the chosen cell.
        const int per = n == 1 ? 4096 : 256;
        const Vec lo = box.lower();
        const Vec h = 2.0 * box.half_widths / per;
        const std::size_t cells = n == 1 ? per : static_cast<std::size_t>(per) * per;
        std::vector<double> logp(cells);
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cells; ++c) {
            Vec x(n);
            x[0] = lo[0] + (static_cast<double>(c % per) + 0.5) * h[0];
            if (n == 2) x[1] = lo[1] + (static_cast<double>(c / per) + 0.5) * h[1];
            logp[c] = d.log_density(x);
            if (std::isfinite(logp[c])) peak = std::max(peak, logp[c]);
        }
        if (!std::isfinite(peak)) throw SupportError("sample_density: density vanishes on its box");
        std::vector<double> cum(cells);
        double s = 0.0;
        for (std::size_t c = 0; c < cells; ++c) {
            s += std::isfinite(logp[c]) ? std::exp(logp[c] - peak) : 0.0;
            cum[c] = s;
        }
        for (std::size_t k = 0; k < count; ++k) {
            const double u = unif(rng) * s;
            const std::size_t c = std::min<std::size_t>(
                cells - 1, static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()));
            Vec x(n);
            x[0] = lo[0] + (static_cast<double>(c % per) + unif(rng)) * h[0];
            if (n == 2) x[1] = lo[1] + (static_cast<double>(c / per) + unif(rng)) * h[1];
            out.push_back(x);
        }
        return out;
    }
    std::normal_distribution<double> nd;
    const double step = 2.38 / std::sqrt(static_cast<double>(n)) * box.half_widths.minCoeff() / 8.0;
    Vec x = box.center;
    double lx = d.log_density(x);
    if (!std::isfinite(lx)) {
        for (int tries = 0; tries < 1000 && !std::isfinite(lx); ++tries) {
            for (int i = 0; i < n; ++i) x[i] = box.center[i] + 0.1 * nd(rng);
            lx = d.log_density(x);
        }
        if (!std::isfinite(lx)) throw SupportError("sample_density: no finite starting point");
    }
    const int burn = 2000, thin = 10;
    for (std::size_t it = 0; out.size() < count; ++it) {
        Vec y = x;
        for (int i = 0; i < n; ++i) y[i] += step * nd(rng);
        const double ly = box.contains(y) ? d.log_density(y) : -std::numeric_limits<double>::infinity();
        if (std::isfinite(ly) && std::log(unif(rng)) < ly - lx) {
            x = y;
            lx = ly;
        }
        if (it >= static_cast<std::size_t>(burn) && it % thin == 0) out.push_back(x);
    }
    return out;
}

PointSet default_probes(const TransportMap& T, const Density& mu, const ProbeOptions& opt)
{
    const int n = T.dim;
    double floor = opt.mass_floor;
    if (floor < 0.0) {
        // Table-based solvers condition on the truncation box, so their relative
        // accuracy decays in the far tails.
        const bool table = T.provenance == MapProvenance::quantile_1d || T.provenance == MapProvenance::radial;
        floor = is_entropic(T.provenance) ? 1e-3 : (table ? 1e-8 : 0.0);
    }
    TruncationBox inner = mu.box();
    PointSet raw;
    if (T.grid) {
        const GridLattice& g = *T.grid;
        raw = interior_nodes(g, opt.margin);
        Vec lo(n), hi(n);
        for (int d = 0; d < n; ++d) {
            lo[d] = g.lower[d] + opt.margin * g.spacing(d);
            hi[d] = g.upper[d] - opt.margin * g.spacing(d);
        }
        inner = TruncationBox{0.5 * (lo + hi), 0.5 * (hi - lo), inner.grid_points_per_axis};
    } else if (n <= 2 && opt.grid_per_axis >= 3) {
        // Faces of the box are dropped; the map is defined there but quadrature-based
        // solvers are least accurate at the truncation.
        for (const Vec& x : tensor_grid(mu.box(), opt.grid_per_axis)) {
            bool face = false;
            for (int d = 0; d < n; ++d)
                face = face || std::abs(std::abs(x[d] - mu.box().center[d]) - mu.box().half_widths[d]) < 1e-12;
            if (!face) raw.push_back(x);
        }
    }
    for (const Vec& x : sample_density(mu, opt.random, opt.seed))
        if (inner.contains(x)) raw.push_back(x);
    if (floor <= 0.0) return raw;

    double peak = -std::numeric_limits<double>::infinity();
    std::vector<double> lp(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        lp[i] = mu.log_density(raw[i]);
        if (std::isfinite(lp[i])) peak = std::max(peak, lp[i]);
    }
    PointSet out;
    const double cut = peak + std::log(floor);
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (std::isfinite(lp[i]) && lp[i] >= cut) out.push_back(raw[i]);
    return out;
}

ConvexityCertificate pair_certificate(const Density& mu, const Density& nu)
{
    ConvexityCertificate c;
    if (mu.certificate()) c.alpha = mu.certificate()->alpha;
    if (nu.certificate()) c.kappa = nu.certificate()->kappa;
    c.provenance = (mu.certificate() && mu.certificate()->provenance == CertProvenance::sampled) ||
                           (nu.certificate() && nu.certificate()->provenance == CertProvenance::sampled)
                       ? CertProvenance::sampled
                       : CertProvenance::analytic;
    return c;
}

namespace {

void require(const ConvexityCertificate& cert, const char* who)
{
    if (!cert.alpha || !cert.kappa)
        throw InvalidInput(std::string(who) + ": certificate needs both alpha and kappa");
    if (!(*cert.alpha > 0.0) || !(*cert.kappa > 0.0)) throw InvalidInput(std::string(who) + ": alpha, kappa must be positive");
}

BoundCertificate base(const TransportMap& T, BoundName name, std::string label, double rhs, std::size_t probes)
{
    BoundCertificate c;
    c.bound_name = name;
    c.label = std::move(label);
    c.theoretical_rhs = rhs;
    c.slack = default_slack(T.provenance);
    c.provenance = to_string(T.provenance);
    c.epsilon = T.entropic_epsilon;
    c.probe_count = probes;
    if (T.debiased) c.notes.push_back("debiased entropic map");
    return c;
}

void finish(BoundCertificate& c, const TransportMap& T)
{
    decide(c, VerdictPolicy{is_entropic(T.provenance)});
}

template <class F>
double max_over(const PointSet& probes, F f)
{
    double m = -std::numeric_limits<double>::infinity();
    for (const Vec& x : probes) m = std::max(m, f(x));
    return m;
}

} // namespace

BoundCertificate check_trace_bound(const TransportMap& T, const ConvexityCertificate& cert, const PointSet& probes)
{
    require(cert, "check_trace_bound");
    if (!T.has_jacobian() && !T.laplacian) throw InvalidInput("check_trace_bound: map has no Jacobian");
    if (probes.empty()) throw InvalidInput("check_trace_bound: empty probe set");
    const int n = T.dim;
    BoundCertificate c = base(T, BoundName::trace, "sup tr DT <= n sqrt(alpha/kappa)",
                              n * std::sqrt(*cert.alpha / *cert.kappa), probes.size());
    c.observed = max_over(probes, [&](const Vec& x) { return T.trace_at(x); });
    finish(c, T);
    return c;
}

BoundCertificate check_lipschitz_bound(const TransportMap& T, const ConvexityCertificate& cert,
                                       const PointSet& probes)
{
    require(cert, "check_lipschitz_bound");
    if (!T.has_jacobian()) throw InvalidInput("check_lipschitz_bound: map has no Jacobian");
    if (probes.empty()) throw InvalidInput("check_lipschitz_bound: empty probe set");
    const int n = T.dim;
    BoundCertificate c = base(T, BoundName::lipschitz, "sup |DT|_op <= n sqrt(alpha/kappa)",
                              n * std::sqrt(*cert.alpha / *cert.kappa), probes.size());
    c.observed = max_over(probes, [&](const Vec& x) { return matrix_statistics(T.jacobian(x)).op_norm; });
    finish(c, T);
    return c;
}

BoundCertificate check_determinant_bound(const TransportMap& T, const ConvexityCertificate& cert,
                                         const PointSet& probes)
{
    require(cert, "check_determinant_bound");
    if (!T.has_jacobian()) throw InvalidInput("check_determinant_bound: map has no Jacobian");
    if (probes.empty()) throw InvalidInput("check_determinant_bound: empty probe set");
    const int n = T.dim;
    BoundCertificate c = base(T, BoundName::determinant, "sup det DT <= (alpha/kappa)^{n/2}",
                              std::pow(*cert.alpha / *cert.kappa, 0.5 * n), probes.size());
    c.observed = max_over(probes, [&](const Vec& x) {
        const double d = T.jacobian(x).determinant();
        if (d < 0.0) throw ConvexityViolation("check_determinant_bound: negative Jacobian determinant", x);
        return d;
    });
    finish(c, T);
    return c;
}

BoundCertificate check_lp_moment_bound(const TransportMap& T, const ConvexityCertificate& cert, const Density& mu,
                                       int p, const Quadrature& q)
{
    require(cert, "check_lp_moment_bound");
    if (p < 1) throw InvalidInput("check_lp_moment_bound: p must be a positive integer");
    if (q.size() == 0) throw InvalidInput("check_lp_moment_bound: empty quadrature");
    const int n = T.dim;
    BoundCertificate c = base(T, BoundName::lp_moment, "|(tr DT)^2|_{L^{p+1}(mu)} <= n^2 alpha/kappa, p = " + std::to_string(p),
                              n * n * (*cert.alpha / *cert.kappa), q.size());
    double mass = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double w = q.weights[i] * mu.pdf(q.points[i]);
        if (w == 0.0) continue;
        mass += w;
        acc += w * std::pow(T.trace_at(q.points[i]), 2.0 * (p + 1));
    }
    c.observed = std::pow(acc, 1.0 / (p + 1));
    c.notes.push_back("quadrature: " + q.description);
    if (std::abs(mass - 1.0) > 1e-6) {
        c.verdict = Verdict::inconclusive;
        c.notes.push_back("quadrature mass " + std::to_string(mass) + " misses 1 by more than 1e-6");
        return c;
    }
    finish(c, T);
    return c;
}

std::vector<BoundCertificate> check_lp_chain(const TransportMap& T, const ConvexityCertificate& cert,
                                             const Density& mu, const Quadrature& q, const std::vector<int>& ps)
{
    std::vector<BoundCertificate> out;
    for (int p : ps) out.push_back(check_lp_moment_bound(T, cert, mu, p, q));
    return out;
}

BoundCertificate with_trend(const std::vector<BoundCertificate>& per_epsilon)
{
    if (per_epsilon.empty()) throw InvalidInput("with_trend: no certificates");
    BoundCertificate c = per_epsilon.back();
    c.trend.clear();
    c.notes.clear();
    for (const auto& e : per_epsilon) {
        if (!e.epsilon) throw InvalidInput("with_trend: certificate without epsilon");
        if (!c.trend.empty() && !(*e.epsilon < c.trend.back().epsilon))
            throw InvalidInput("with_trend: epsilons must decrease");
        c.trend.push_back({*e.epsilon, e.observed});
    }
    c.notes.push_back("trend over " + std::to_string(c.trend.size()) + " epsilons");
    decide(c, VerdictPolicy{true});
    return c;
}

BoundCertificate check_pushforward_moments(const TransportMap& T, const Density& mu, const GaussianParams& nu,
                                           const Quadrature& q, double tol)
{
    if (q.radial_only) throw InvalidInput("check_pushforward_moments: needs a full quadrature, not a radial one");
    const int n = T.dim;
    double mass = 0.0;
    Vec m = Vec::Zero(n);
    Mat S = Mat::Zero(n, n);
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double w = q.weights[i] * mu.pdf(q.points[i]);
        if (w == 0.0) continue;
        const Vec y = T.eval(q.points[i]);
        mass += w;
        m += w * y;
        S += w * y * y.transpose();
    }
    m /= mass;
    S = S / mass - m * m.transpose();
    BoundCertificate c = base(T, BoundName::pushforward, "max entry error of T_# mu mean/covariance", tol, q.size());
    c.observed = std::max((m - nu.mean).cwiseAbs().maxCoeff(), (S - nu.cov).cwiseAbs().maxCoeff());
    c.slack = 0.0;
    decide(c);
    return c;
}

BoundCertificate check_cyclical_monotonicity(const TransportMap& T, const PointSet& probes, std::size_t pairs,
                                             std::uint64_t seed, double tol)
{
    if (probes.size() < 2) throw InvalidInput("check_cyclical_monotonicity: need two probes");
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, probes.size() - 1);
    std::vector<Vec> images(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) images[i] = T.eval(probes[i]);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pairs; ++k) {
        const std::size_t i = pick(rng), j = pick(rng);
        worst = std::min(worst, (images[i] - images[j]).dot(probes[i] - probes[j]));
    }
    BoundCertificate c = base(T, BoundName::cyclical_monotonicity, "min <Tx - Ty, x - y> >= 0", 0.0, pairs);
    c.relation = Relation::at_least;
    c.observed = worst;
    c.tolerance = tol;
    c.seed = seed;
    c.slack = 0.0;
    decide(c);
    return c;
}

BoundCertificate check_monge_ampere(const TransportMap& T, const Density& mu, const Density& nu,
                                    const PointSet& probes, double tol)
{
    const MongeAmpereResidual r = monge_ampere_residual(T, mu, nu, probes);
    BoundCertificate c = base(T, BoundName::monge_ampere, "sup |Monge-Ampere log residual|", tol, probes.size());
    c.observed = r.sup_abs_log_residual;
    c.slack = 0.0;
    decide(c);
    return c;
}

} // namespace lsot
