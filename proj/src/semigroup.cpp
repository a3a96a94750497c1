#include "lsot/semigroup.hpp"
#include "lsot/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace lsot {

const char* to_string(SemigroupKind k) { return k == SemigroupKind::heat ? "heat" : "ornstein_uhlenbeck"; }

const char* to_string(EvalMethod m)
{
    switch (m) {
    case EvalMethod::closed_form_quadratic: return "closed_form_quadratic";
    case EvalMethod::gauss_hermite: return "gauss_hermite";
    case EvalMethod::monte_carlo: return "monte_carlo";
    case EvalMethod::identity: return "identity";
    }
    return "unknown";
}

const char* to_string(SmoothingClass c)
{
    switch (c) {
    case SmoothingClass::unconditional: return "unconditional";
    case SmoothingClass::log_concave: return "log_concave";
    case SmoothingClass::log_convex: return "log_convex";
    case SmoothingClass::log_subharmonic: return "log_subharmonic";
    }
    return "unknown";
}

SemigroupFunction SemigroupFunction::from_mixture(const PolyGaussianMixture& m, std::string name)
{
    SemigroupFunction f;
    f.dim = m.dim();
    f.value = [m](const Vec& x) { return m.value(x); };
    f.grad = [m](const Vec& x) { return m.grad(x); };
    f.hess = [m](const Vec& x) { return m.hess(x); };
    f.closed_form = m;
    f.name = std::move(name);
    return f;
}

SemigroupFunction SemigroupFunction::constant(int dim, double c)
{
    return from_mixture(PolyGaussianMixture::quadratic_exponent(Mat::Zero(dim, dim), Vec::Zero(dim), std::log(c)),
                        "constant");
}

SemigroupFunction SemigroupFunction::quadratic_exponent(const Mat& A, const Vec& b, double c, std::string name)
{
    return from_mixture(PolyGaussianMixture::quadratic_exponent(A, b, c), std::move(name));
}

SemigroupFunction SemigroupFunction::from_density(const Density& rho)
{
    if (rho.closed_form()) {
        const double lz = rho.normalized() ? 0.0 : rho.log_partition_or_compute();
        return from_mixture(rho.closed_form()->scaled(std::exp(-lz)), "density");
    }
    SemigroupFunction f;
    f.dim = rho.dim();
    f.value = [rho](const Vec& x) { return rho.pdf(x); };
    f.grad = [rho](const Vec& x) -> Vec { return rho.pdf(x) * rho.grad_log(x); };
    f.hess = [rho](const Vec& x) -> Mat {
        const Vec g = rho.grad_log(x);
        return rho.pdf(x) * (rho.hess_log(x) + g * g.transpose());
    };
    f.name = "density";
    return f;
}

SemigroupFunction SemigroupFunction::relative_to_gaussian(const Density& mu)
{
    const int n = mu.dim();
    const double lg = 0.5 * n * std::log(2.0 * M_PI);
    if (mu.closed_form()) {
        const double lz = mu.normalized() ? 0.0 : mu.log_partition_or_compute();
        return from_mixture(mu.closed_form()->times_exponential(-Mat::Identity(n, n), Vec::Zero(n), lg - lz),
                            "dmu/dgamma");
    }
    SemigroupFunction f;
    f.dim = n;
    auto logf = [mu, lg](const Vec& x) { return mu.normalized_log_density(x) + lg + 0.5 * x.squaredNorm(); };
    f.value = [logf](const Vec& x) { return std::exp(logf(x)); };
    f.grad = [mu, logf](const Vec& x) -> Vec { return std::exp(logf(x)) * (mu.grad_log(x) + x); };
    f.hess = [mu, logf](const Vec& x) -> Mat {
        const Vec g = mu.grad_log(x) + x;
        const int d = static_cast<int>(x.size());
        return std::exp(logf(x)) * (mu.hess_log(x) + Mat::Identity(d, d) + g * g.transpose());
    };
    f.name = "dmu/dgamma";
    return f;
}

namespace {

struct Moments {
    double v = 0.0;
    Vec g;
    Mat h;
};

// Quadrature pass: E f(c + sigma Y) and its first two derivatives in c.
Moments average_pass(const SemigroupFunction& f, const Vec& c, double sigma, const PointSet& ys,
                     const std::vector<double>& ws, bool want_hess)
{
    const int n = static_cast<int>(c.size());
    Moments m;
    m.g = Vec::Zero(n);
    m.h = Mat::Zero(n, n);
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const Vec& y = ys[i];
        const Vec x = c + sigma * y;
        const double fv = f.value(x);
        const double w = ws[i];
        m.v += w * fv;
        if (f.grad)
            m.g += w * f.grad(x);
        else
            m.g += (w * fv / sigma) * y;
        if (!want_hess) continue;
        if (f.hess)
            m.h += w * f.hess(x);
        else if (f.grad)
            m.h += (w / sigma) * f.grad(x) * y.transpose();
        else
            m.h += (w * fv / (sigma * sigma)) * (y * y.transpose() - Mat::Identity(n, n));
    }
    m.h = symmetrize(m.h);
    return m;
}

SemigroupEvaluation finish(const Moments& m, double chain, EvalMethod method, int order, double err, bool want_hess)
{
    SemigroupEvaluation e;
    e.value = m.v;
    e.log_value = m.v > 0.0 ? std::log(m.v) : -std::numeric_limits<double>::infinity();
    e.grad_log = chain * m.g / m.v;
    if (want_hess) e.hess_log = symmetrize(chain * chain * m.h / m.v - e.grad_log * e.grad_log.transpose());
    e.method = method;
    e.quadrature_order = order;
    e.error_estimate = err;
    return e;
}

double relative_gap(const Moments& a, const Moments& b, bool want_hess)
{
    const double scale = std::abs(b.v) + std::numeric_limits<double>::min();
    double e = std::abs(a.v - b.v) / scale;
    e = std::max(e, (a.g - b.g).norm() / (scale + b.g.norm()));
    if (want_hess) e = std::max(e, (a.h - b.h).norm() / (scale + b.h.norm()));
    return e;
}

} // namespace

SemigroupEvaluation gaussian_average(const SemigroupFunction& f, const Vec& center, double sigma, double chain,
                                     const ApplyOptions& opt)
{
    const int n = static_cast<int>(center.size());
    if (!(sigma > 0.0)) throw InvalidInput("gaussian_average: sigma must be positive");
    if (n <= 2) {
        int order = opt.gh_order;
        Quadrature q = gauss_hermite_tensor(Vec::Zero(n), Mat::Identity(n, n), order);
        Moments prev = average_pass(f, center, sigma, q.points, q.weights, opt.want_hess);
        double err = std::numeric_limits<double>::infinity();
        while (2 * order <= opt.max_gh_order) {
            order *= 2;
            q = gauss_hermite_tensor(Vec::Zero(n), Mat::Identity(n, n), order);
            Moments cur = average_pass(f, center, sigma, q.points, q.weights, opt.want_hess);
            err = relative_gap(prev, cur, opt.want_hess);
            prev = std::move(cur);
            if (err <= opt.rel_tol) break;
        }
        if (!(err <= opt.rel_tol)) {
            std::ostringstream os;
            os << "Gauss-Hermite relative error estimate " << err << " above tolerance " << opt.rel_tol
               << " at order " << order;
            throw AccuracyError(os.str(), err);
        }
        if (!(prev.v > 0.0)) throw AccuracyError("Gaussian average is not positive", err);
        return finish(prev, chain, EvalMethod::gauss_hermite, order, err, opt.want_hess);
    }

    // Antithetic Monte Carlo for n >= 3.
    Rng rng(opt.seed);
    std::normal_distribution<double> nd;
    const std::size_t pairs = std::max<std::size_t>(opt.mc_samples / 2, 1);
    PointSet ys;
    ys.reserve(2 * pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        Vec y(n);
        for (int d = 0; d < n; ++d) y[d] = nd(rng);
        ys.push_back(y);
        ys.push_back(-y);
    }
    const std::vector<double> ws(ys.size(), 1.0 / static_cast<double>(ys.size()));
    Moments m = average_pass(f, center, sigma, ys, ws, opt.want_hess);
    // Standard error from the antithetic pair means.
    double s2 = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) {
        const double pm = 0.5 * (f.value(center + sigma * ys[2 * i]) + f.value(center + sigma * ys[2 * i + 1]));
        s2 += (pm - m.v) * (pm - m.v);
    }
    const double se = std::sqrt(s2 / (pairs * std::max<std::size_t>(pairs - 1, 1)));
    const double rel = se / std::abs(m.v);
    if (!(rel <= opt.mc_rel_tol))
        throw AccuracyError("Monte Carlo relative standard error above tolerance", rel);
    return finish(m, chain, EvalMethod::monte_carlo, static_cast<int>(ys.size()), rel, opt.want_hess);
}

namespace {

void time_map(SemigroupKind kind, double t, double& a, double& s)
{
    if (kind == SemigroupKind::ornstein_uhlenbeck) {
        a = std::exp(-t);
        s = -std::expm1(-2.0 * t);
    } else {
        a = 1.0;
        s = t;
    }
}

SemigroupEvaluation from_mixture_eval(const PolyGaussianMixture& m, const Vec& x, bool want_hess)
{
    SemigroupEvaluation e;
    e.log_value = m.log_value(x);
    e.value = std::exp(e.log_value);
    e.grad_log = m.grad_log(x);
    if (want_hess) e.hess_log = m.hess_log(x);
    e.method = EvalMethod::closed_form_quadratic;
    return e;
}

PolyGaussianMixture semigroup_mixture(SemigroupKind kind, const PolyGaussianMixture& f, double t)
{
    double a, s;
    time_map(kind, t, a, s);
    const PolyGaussianMixture smoothed = gaussian_smooth(f, s);
    if (a == 1.0) return smoothed;
    const int n = f.dim();
    return smoothed.compose_affine(a * Mat::Identity(n, n), Vec::Zero(n));
}

} // namespace

PreparedSemigroup::PreparedSemigroup(SemigroupKind kind, const PolyGaussianMixture& f, double t)
    : t_(t), smoothed_(semigroup_mixture(kind, f, t))
{
    if (t < 0.0) throw InvalidInput("semigroup: t must be nonnegative");
}

SemigroupEvaluation PreparedSemigroup::eval(const Vec& x, bool want_hess) const
{
    return from_mixture_eval(smoothed_, x, want_hess);
}

SemigroupEvaluation apply(SemigroupKind kind, const SemigroupFunction& f, double t, const Vec& x,
                          const ApplyOptions& opt)
{
    if (!(t >= 0.0)) throw InvalidInput("semigroup apply: t must be nonnegative");
    if (x.size() != f.dim) throw InvalidInput("semigroup apply: dimension mismatch");
    if (t == 0.0) {
        SemigroupEvaluation e;
        e.value = f.value(x);
        e.log_value = std::log(e.value);
        if (f.closed_form) return from_mixture_eval(*f.closed_form, x, opt.want_hess);
        const ScalarField lf = [&f](const Vec& y) { return std::log(f.value(y)); };
        e.grad_log = f.grad ? Vec(f.grad(x) / e.value) : fd_gradient(lf, x);
        if (opt.want_hess) e.hess_log = fd_hessian(lf, x);
        e.method = EvalMethod::identity;
        return e;
    }
    if (f.closed_form && opt.allow_closed_form) {
        return PreparedSemigroup(kind, *f.closed_form, t).eval(x, opt.want_hess);
    }
    double a, s;
    time_map(kind, t, a, s);
    return gaussian_average(f, a * x, std::sqrt(s), a, opt);
}

double smoothing_rhs(SemigroupKind kind, SmoothingClass cls, double c, double t, int n)
{
    const bool ou = kind == SemigroupKind::ornstein_uhlenbeck;
    const double e2 = std::exp(-2.0 * t);
    const double s = -std::expm1(-2.0 * t);
    switch (cls) {
    case SmoothingClass::unconditional:
        return ou ? -e2 / s : -1.0 / t;
    case SmoothingClass::log_concave:
    case SmoothingClass::log_convex: {
        const double den = ou ? 1.0 - c * s : 1.0 - c * t;
        if (den <= 0.0) return std::numeric_limits<double>::infinity();
        return ou ? e2 * c / den : c / den;
    }
    case SmoothingClass::log_subharmonic:
        return ou ? e2 * c * n / (1.0 - c * s) : c * n / (1.0 - c * t);
    }
    return 0.0;
}

double log_concave_window(SemigroupKind kind, double c)
{
    if (kind == SemigroupKind::ornstein_uhlenbeck)
        return c > 1.0 ? std::log(std::sqrt(c / (c - 1.0))) : std::numeric_limits<double>::infinity();
    return c > 0.0 ? 1.0 / c : std::numeric_limits<double>::infinity();
}

BoundCertificate check_smoothing_bounds(SemigroupKind kind, const SemigroupFunction& f, double c,
                                        SmoothingClass cls, double t, const PointSet& probes,
                                        const ApplyOptions& opt)
{
    if (!(t > 0.0)) throw InvalidInput("check_smoothing_bounds: t must be positive");
    if (probes.empty()) throw InvalidInput("check_smoothing_bounds: empty probe set");
    if (cls == SmoothingClass::log_concave) {
        const double w = log_concave_window(kind, c);
        if (t > w) {
            std::ostringstream os;
            os << "check_smoothing_bounds: t = " << t << " outside the admissible window [0, " << w
               << "] for c = " << c;
            throw InvalidInput(os.str());
        }
    }
    if ((cls == SmoothingClass::log_convex || cls == SmoothingClass::log_subharmonic) && c > 0.0)
        throw InvalidInput("check_smoothing_bounds: log-convex and log-subharmonic classes need c <= 0");

    const int n = f.dim;
    BoundCertificate cert;
    cert.bound_name = BoundName::smoothing;
    cert.label = std::string(to_string(kind)) + " " + to_string(cls) + " t=" + std::to_string(t);
    cert.theoretical_rhs = smoothing_rhs(kind, cls, c, t, n);
    cert.relation = cls == SmoothingClass::log_concave ? Relation::at_most : Relation::at_least;
    cert.tolerance = 1e-8;
    cert.probe_count = probes.size();

    std::optional<PreparedSemigroup> prepared;
    if (f.closed_form && opt.allow_closed_form) prepared.emplace(kind, *f.closed_form, t);
    double worst = cert.relation == Relation::at_most ? -std::numeric_limits<double>::infinity()
                                                      : std::numeric_limits<double>::infinity();
    EvalMethod method = EvalMethod::closed_form_quadratic;
    for (const Vec& x : probes) {
        const SemigroupEvaluation e = prepared ? prepared->eval(x) : apply(kind, f, t, x, opt);
        method = e.method;
        double stat;
        if (cls == SmoothingClass::log_subharmonic) {
            stat = e.hess_log.trace();
        } else {
            Eigen::SelfAdjointEigenSolver<Mat> es(e.hess_log, Eigen::EigenvaluesOnly);
            stat = cls == SmoothingClass::log_concave ? es.eigenvalues().maxCoeff() : es.eigenvalues().minCoeff();
        }
        worst = cert.relation == Relation::at_most ? std::max(worst, stat) : std::min(worst, stat);
    }
    cert.observed = worst;
    cert.provenance = std::string("semigroup:") + to_string(method);
    if (std::isinf(cert.theoretical_rhs)) {
        cert.verdict = Verdict::pass;
        cert.notes.push_back("bound is unbounded at this t");
    } else {
        decide(cert);
    }
    return cert;
}

double mollified_kappa(double kappa, int k)
{
    const double e = std::exp(-2.0 / k);
    return kappa * e / (1.0 + kappa * (1.0 - e));
}

namespace {

std::optional<GaussianParams> gaussian_of(const PolyGaussianMixture& m)
{
    if (!m.single_quadratic()) return std::nullopt;
    const auto& t = m.terms().front();
    Eigen::SelfAdjointEigenSolver<Mat> es(t.A);
    if (es.eigenvalues().minCoeff() <= 0.0) return std::nullopt;
    const Mat cov = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    return GaussianParams{cov * t.b, symmetrize(cov)};
}

Density smoothed_density(const Density& rho, double t, double keep, double quad, const ApplyOptions& opt,
                         nlohmann::json spec)
{
    // log density = keep * log P_t rho - quad |x|^2 / 2
    const int n = rho.dim();
    DensityParts p;
    p.dim = n;
    p.box = rho.box();
    p.spec = std::move(spec);
    if (rho.closed_form()) {
        const PreparedSemigroup ps(SemigroupKind::ornstein_uhlenbeck, *SemigroupFunction::from_density(rho).closed_form,
                                   t);
        const PolyGaussianMixture m = ps.mixture();
        p.log_density = [m, keep, quad](const Vec& x) { return keep * m.log_value(x) - 0.5 * quad * x.squaredNorm(); };
        p.grad_log = [m, keep, quad](const Vec& x) -> Vec { return keep * m.grad_log(x) - quad * x; };
        p.hess_log = [m, keep, quad, n](const Vec& x) -> Mat {
            return keep * m.hess_log(x) - quad * Mat::Identity(n, n);
        };
        if (keep == 1.0 && quad == 0.0) {
            p.closed_form = m;
            p.gaussian = gaussian_of(m);
        } else if (m.single_quadratic()) {
            const auto& term = m.terms().front();
            const PolyGaussianMixture q = PolyGaussianMixture::quadratic_exponent(
                keep * term.A + quad * Mat::Identity(n, n), keep * term.b, keep * term.c);
            p.closed_form = q;
            p.gaussian = gaussian_of(q);
        }
    } else {
        const SemigroupFunction f = SemigroupFunction::from_density(rho);
        p.log_density = [f, t, keep, quad, opt](const Vec& x) {
            ApplyOptions o = opt;
            o.want_hess = false;
            return keep * apply(SemigroupKind::ornstein_uhlenbeck, f, t, x, o).log_value - 0.5 * quad * x.squaredNorm();
        };
        p.grad_log = [f, t, keep, quad, opt](const Vec& x) -> Vec {
            ApplyOptions o = opt;
            o.want_hess = false;
            return keep * apply(SemigroupKind::ornstein_uhlenbeck, f, t, x, o).grad_log - quad * x;
        };
        p.hess_log = [f, t, keep, quad, opt, n](const Vec& x) -> Mat {
            return keep * apply(SemigroupKind::ornstein_uhlenbeck, f, t, x, opt).hess_log - quad * Mat::Identity(n, n);
        };
    }
    return Density::make(std::move(p));
}

} // namespace

MollifiedPair mollify(const Density& mu, const Density& nu, double alpha, double kappa, int k, const ApplyOptions& opt)
{
    if (k < 1) throw InvalidInput("mollify: k must be at least 1");
    if (!(alpha > 0.0) || !(kappa > 0.0)) throw InvalidInput("mollify: alpha and kappa must be positive");
    if (mu.dim() != nu.dim()) throw InvalidInput("mollify: dimension mismatch");
    const double t = 1.0 / k;
    const double keep = 1.0 - 1.0 / k;

    MollifiedPair out;
    out.k = k;
    out.kappa_k = mollified_kappa(kappa, k);
    {
        Density src = smoothed_density(mu, t, keep, alpha / k, opt,
                                       {{"kind", "mollified_source"}, {"k", k}, {"alpha", alpha}, {"base", mu.spec()}});
        Density tgt = smoothed_density(nu, t, 1.0, 0.0, opt,
                                       {{"kind", "mollified_target"}, {"k", k}, {"kappa", kappa}, {"base", nu.spec()}});
        // Source keeps Delta V_k <= alpha n; re-probe to confirm before attaching.
        ConvexityCertificate analytic = ConvexityCertificate::analytic(alpha, std::nullopt);
        const ConvexityCertificate sampled = estimate_certificate(src, src.box(), 400);
        out.source_k = src.with_certificate(reconcile(analytic, sampled, 1e-6));
        out.target_k = tgt.with_certificate(ConvexityCertificate::analytic(std::nullopt, out.kappa_k));
    }
    return out;
}

BoundCertificate covariance_identity_check(const SemigroupFunction& f, double t, const Vec& x, std::size_t samples,
                                           const ApplyOptions& opt)
{
    if (!(t > 0.0)) throw InvalidInput("covariance_identity_check: t must be positive");
    const int n = f.dim;
    const double a = std::exp(-t);
    const double s = -std::expm1(-2.0 * t);
    const Vec z = a * x;
    const Mat I = Mat::Identity(n, n);

    Mat cov;
    double tol = 1e-8;
    std::string how;
    if (f.closed_form && f.closed_form->single_quadratic()) {
        // p_{z,s} is Gaussian with precision A + I/s.
        const auto& term = f.closed_form->terms().front();
        const Mat P = term.A + I / s;
        Eigen::SelfAdjointEigenSolver<Mat> es(P);
        if (es.eigenvalues().minCoeff() <= 0.0) throw SupportError("tilted density is not integrable");
        cov = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
        how = "closed-form Gaussian tilt";
    } else {
        auto tilted = [&](const PointSet& ys, const std::vector<double>& ws, double& ess) {
            double z0 = 0.0, z2 = 0.0;
            Vec m1 = Vec::Zero(n);
            Mat m2 = Mat::Zero(n, n);
            for (std::size_t i = 0; i < ys.size(); ++i) {
                const Vec y = z + std::sqrt(s) * ys[i];
                const double w = ws[i] * f.value(y);
                z0 += w;
                z2 += w * w;
                m1 += w * y;
                m2 += w * y * y.transpose();
            }
            if (!(z0 > 1e-250)) throw SupportError("tilted density has no mass on the quadrature support");
            ess = z0 * z0 / z2;
            m1 /= z0;
            return Mat(symmetrize(m2 / z0 - m1 * m1.transpose()));
        };
        double ess = 0.0;
        if (n <= 2) {
            const Quadrature q1 = gauss_hermite_tensor(Vec::Zero(n), I, opt.gh_order);
            const Quadrature q2 = gauss_hermite_tensor(Vec::Zero(n), I, 2 * opt.gh_order);
            const Mat c1 = tilted(q1.points, q1.weights, ess);
            cov = tilted(q2.points, q2.weights, ess);
            tol = std::max(1e-8, 10.0 * (cov - c1).norm() * (a * a / (s * s)));
            how = "Gauss-Hermite orders " + std::to_string(opt.gh_order) + "/" + std::to_string(2 * opt.gh_order);
        } else {
            PointSet ys = gaussian_samples(Vec::Zero(n), I, samples, opt.seed);
            const std::vector<double> ws(ys.size(), 1.0 / ys.size());
            cov = tilted(ys, ws, ess);
            tol = 3.0 * (a * a / (s * s)) * cov.norm() * std::sqrt(2.0 / ess);
            how = "Monte Carlo";
        }
        if (ess < 2.0) throw SupportError("tilted density is degenerate: effective sample size below 2");
    }
    const Mat rhs = (a * a / s) * (cov / s - I);
    ApplyOptions o = opt;
    const SemigroupEvaluation e = apply(SemigroupKind::ornstein_uhlenbeck, f, t, x, o);
    BoundCertificate cert;
    cert.bound_name = BoundName::covariance_identity;
    cert.label = f.name + " t=" + std::to_string(t);
    cert.theoretical_rhs = 0.0;
    cert.observed = (e.hess_log - rhs).norm();
    cert.tolerance = tol;
    cert.relation = Relation::at_most;
    cert.provenance = how + " vs " + to_string(e.method);
    cert.probe_count = 1;
    cert.seed = opt.seed;
    decide(cert);
    return cert;
}

} // namespace lsot
