#include "lsot/measures.hpp"
#include "lsot/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <mutex>

namespace lsot {

const char* to_string(SupportNote s) { return s == SupportNote::full_space ? "full_space" : "restricted"; }
const char* to_string(CertProvenance p) { return p == CertProvenance::analytic ? "analytic" : "sampled"; }

ConvexityCertificate ConvexityCertificate::analytic(std::optional<double> alpha, std::optional<double> kappa)
{
    if ((alpha && !(*alpha > 0.0)) || (kappa && !(*kappa > 0.0)))
        throw InvalidInput("ConvexityCertificate: constants must be positive when present");
    ConvexityCertificate c;
    c.alpha = alpha;
    c.kappa = kappa;
    c.provenance = CertProvenance::analytic;
    return c;
}

struct Density::Impl {
    DensityParts parts;
    TruncationBox box;
    mutable std::once_flag partition_once;
    mutable double partition_cache = 0.0;
};

namespace {

constexpr double kCbrtEps = 6.0554544523933395e-06;  // cbrt(DBL_EPSILON)

double step_for(double xi) { return kCbrtEps * (1.0 + std::abs(xi)); }

} // namespace

Vec fd_gradient(const ScalarField& f, const Vec& x)
{
    Vec g(x.size());
    Vec y = x;
    for (int i = 0; i < x.size(); ++i) {
        const double h = step_for(x[i]);
        y[i] = x[i] + h;
        const double fp = f(y);
        y[i] = x[i] - h;
        const double fm = f(y);
        y[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Mat fd_hessian_from_gradient(const VectorField& g, const Vec& x)
{
    const int n = static_cast<int>(x.size());
    Mat H(n, n);
    Vec y = x;
    for (int i = 0; i < n; ++i) {
        const double h = step_for(x[i]);
        y[i] = x[i] + h;
        const Vec gp = g(y);
        y[i] = x[i] - h;
        const Vec gm = g(y);
        y[i] = x[i];
        H.col(i) = (gp - gm) / (2.0 * h);
    }
    return H;
}

Mat fd_hessian(const ScalarField& f, const Vec& x)
{
    // Second differences need a larger step: eps^{1/4}.
    const int n = static_cast<int>(x.size());
    Mat H(n, n);
    const double f0 = f(x);
    Vec y = x;
    std::vector<double> h(n);
    for (int i = 0; i < n; ++i) h[i] = 1.2e-4 * (1.0 + std::abs(x[i]));
    for (int i = 0; i < n; ++i) {
        y[i] = x[i] + h[i];
        const double fp = f(y);
        y[i] = x[i] - h[i];
        const double fm = f(y);
        y[i] = x[i];
        H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (int j = 0; j < i; ++j) {
            double s = 0.0;
            for (int a : {1, -1})
                for (int b : {1, -1}) {
                    y[i] = x[i] + a * h[i];
                    y[j] = x[j] + b * h[j];
                    s += a * b * f(y);
                }
            y[i] = x[i];
            y[j] = x[j];
            H(i, j) = H(j, i) = s / (4.0 * h[i] * h[j]);
        }
    }
    return H;
}

double log_integral(const ScalarField& log_f, const TruncationBox& box, std::uint64_t seed)
{
    const int n = box.dim();
    std::vector<double> logs;
    std::vector<double> logw;
    if (n <= 2) {
        const int panels = std::max(4, box.grid_points_per_axis / 4);
        const Quadrature q = box_quadrature(box, panels, 8);
        logs.reserve(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            logs.push_back(log_f(q.points[i]));
            logw.push_back(std::log(q.weights[i]));
        }
    } else {
        // One uniform draw per stratum of a tensor partition.
        const int per_axis = n <= 4 ? 12 : 6;
        const int reps = 4;
        std::size_t cells = 1;
        for (int d = 0; d < n; ++d) cells *= per_axis;
        Rng rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const Vec lo = box.lower();
        const double lw = std::log(box.volume() / (static_cast<double>(cells) * reps));
        std::vector<int> idx(n, 0);
        for (std::size_t c = 0; c < cells; ++c) {
            for (int r = 0; r < reps; ++r) {
                Vec x(n);
                for (int d = 0; d < n; ++d)
                    x[d] = lo[d] + 2.0 * box.half_widths[d] * (idx[d] + u(rng)) / per_axis;
                logs.push_back(log_f(x));
                logw.push_back(lw);
            }
            for (int d = n - 1; d >= 0; --d) {
                if (++idx[d] < per_axis) break;
                idx[d] = 0;
            }
        }
    }
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logs.size(); ++i) m = std::max(m, logs[i] + logw[i]);
    if (!std::isfinite(m)) throw SupportError("log_integral: integrand vanishes on the box");
    double s = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) s += std::exp(logs[i] + logw[i] - m);
    return m + std::log(s);
}

Density Density::make(DensityParts parts)
{
    if (parts.dim <= 0) throw InvalidInput("Density: dimension must be positive");
    if (!parts.log_density) throw InvalidInput("Density: log_density evaluator required");
    auto impl = std::make_shared<Impl>();
    if (parts.box) {
        impl->box = *parts.box;
    } else if (parts.gaussian) {
        const Vec sd = parts.gaussian->cov.diagonal().cwiseSqrt();
        impl->box = TruncationBox{parts.gaussian->mean, 8.0 * sd, 64};
    } else {
        impl->box = TruncationBox::cube(parts.dim, 8.0);
    }
    if (parts.normalized && !parts.log_partition) parts.log_partition = 0.0;
    impl->parts = std::move(parts);
    Density d;
    d.impl_ = std::move(impl);
    return d;
}

int Density::dim() const { return impl_->parts.dim; }
double Density::log_density(const Vec& x) const { return impl_->parts.log_density(x); }

Vec Density::grad_log(const Vec& x) const
{
    if (impl_->parts.grad_log) return impl_->parts.grad_log(x);
    return fd_gradient(impl_->parts.log_density, x);
}

Mat Density::hess_log(const Vec& x) const
{
    if (impl_->parts.hess_log) return impl_->parts.hess_log(x);
    if (impl_->parts.grad_log) return fd_hessian_from_gradient(impl_->parts.grad_log, x);
    return fd_hessian(impl_->parts.log_density, x);
}

bool Density::has_analytic_grad() const { return static_cast<bool>(impl_->parts.grad_log); }
bool Density::has_analytic_hess() const { return static_cast<bool>(impl_->parts.hess_log); }
bool Density::normalized() const { return impl_->parts.normalized; }
std::optional<double> Density::log_partition() const { return impl_->parts.log_partition; }

double Density::log_partition_or_compute() const
{
    if (impl_->parts.log_partition) return *impl_->parts.log_partition;
    std::call_once(impl_->partition_once, [this] {
        impl_->partition_cache = log_integral(impl_->parts.log_density, impl_->box);
    });
    return impl_->partition_cache;
}

double Density::normalized_log_density(const Vec& x) const
{
    return log_density(x) - log_partition_or_compute();
}

SupportNote Density::support() const { return impl_->parts.support; }
const TruncationBox& Density::box() const { return impl_->box; }
const std::optional<GaussianParams>& Density::gaussian() const { return impl_->parts.gaussian; }
const std::optional<PolyGaussianMixture>& Density::closed_form() const { return impl_->parts.closed_form; }
const std::optional<ConvexityCertificate>& Density::certificate() const { return impl_->parts.certificate; }

double Density::singular_distance(const Vec& x) const
{
    if (!impl_->parts.singular_distance) return std::numeric_limits<double>::infinity();
    return impl_->parts.singular_distance(x);
}

bool Density::has_singular_set() const { return static_cast<bool>(impl_->parts.singular_distance); }
const nlohmann::json& Density::spec() const { return impl_->parts.spec; }

Density Density::with_certificate(ConvexityCertificate cert) const
{
    DensityParts p = impl_->parts;
    p.certificate = std::move(cert);
    p.box = impl_->box;
    return make(std::move(p));
}

Density Density::with_box(TruncationBox box) const
{
    DensityParts p = impl_->parts;
    p.box = std::move(box);
    return make(std::move(p));
}

Density Density::normalized_copy() const
{
    if (normalized()) return *this;
    const double lz = log_partition_or_compute();
    DensityParts p = impl_->parts;
    auto base = p.log_density;
    p.log_density = [base, lz](const Vec& x) { return base(x) - lz; };
    p.normalized = true;
    p.log_partition = 0.0;
    p.box = impl_->box;
    if (p.closed_form) p.closed_form = p.closed_form->scaled(std::exp(-lz));
    return make(std::move(p));
}

Density gaussian(const Vec& mean, const Mat& cov)
{
    const int n = static_cast<int>(mean.size());
    if (cov.rows() != n || cov.cols() != n) throw InvalidInput("gaussian: covariance shape mismatch");
    if ((cov - cov.transpose()).norm() > 1e-12 * (1.0 + cov.norm()))
        throw InvalidInput("gaussian: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    if (es.eigenvalues().minCoeff() <= 0.0) throw InvalidInput("gaussian: covariance not positive definite");
    const Mat P = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    const double logdet = es.eigenvalues().array().log().sum();
    const double lnorm = -0.5 * (n * std::log(2.0 * M_PI) + logdet);

    DensityParts p;
    p.dim = n;
    p.log_density = [mean, P, lnorm](const Vec& x) {
        const Vec d = x - mean;
        return lnorm - 0.5 * d.dot(P * d);
    };
    p.grad_log = [mean, P](const Vec& x) -> Vec { return -P * (x - mean); };
    p.hess_log = [P](const Vec&) -> Mat { return -P; };
    p.normalized = true;
    p.log_partition = 0.0;
    p.gaussian = GaussianParams{mean, cov};
    p.closed_form = PolyGaussianMixture::quadratic_exponent(P, P * mean, lnorm - 0.5 * mean.dot(P * mean));
    p.certificate = ConvexityCertificate::analytic(P.trace() / n, 1.0 / es.eigenvalues().maxCoeff());
    p.spec = {{"kind", "gaussian"},
              {"mean", std::vector<double>(mean.data(), mean.data() + n)},
              {"cov", std::vector<double>(cov.data(), cov.data() + n * n)}};
    return Density::make(std::move(p));
}

Density from_mixture(const PolyGaussianMixture& mix, const TruncationBox& box,
                     std::optional<ConvexityCertificate> cert, nlohmann::json spec)
{
    DensityParts p;
    p.dim = mix.dim();
    p.log_density = [mix](const Vec& x) { return mix.log_value(x); };
    p.grad_log = [mix](const Vec& x) { return mix.grad_log(x); };
    p.hess_log = [mix](const Vec& x) { return mix.hess_log(x); };
    p.normalized = false;
    p.box = box;
    p.closed_form = mix;
    p.certificate = std::move(cert);
    p.spec = std::move(spec);
    return Density::make(std::move(p));
}

Density weighted_gaussian(const Weight& w, const Density& base, std::optional<ConvexityCertificate> cert,
                          const PointSet& probes)
{
    if (!w.value) throw InvalidInput("weighted_gaussian: weight evaluator required");
    if (cert && cert->provenance == CertProvenance::analytic) {
        for (const Vec& x : probes) {
            const double v = w.value(x);
            if (!(v > 0.0))
                throw CertificateConflict("weighted_gaussian: weight '" + w.name +
                                          "' is not positive at a probe while an analytic certificate is claimed");
        }
    }
    DensityParts p;
    p.dim = base.dim();
    const ScalarField wv = w.value;
    p.log_density = [wv, base](const Vec& x) {
        const double v = wv(x);
        return (v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity()) + base.log_density(x);
    };
    if (w.grad_log) {
        const VectorField g = w.grad_log;
        p.grad_log = [g, base](const Vec& x) -> Vec { return g(x) + base.grad_log(x); };
        if (w.hess_log && base.has_analytic_hess()) {
            const MatrixField h = w.hess_log;
            p.hess_log = [h, base](const Vec& x) -> Mat { return h(x) + base.hess_log(x); };
        }
    }
    p.normalized = false;
    p.box = base.box();
    p.certificate = std::move(cert);
    p.spec = {{"kind", "weighted"}, {"weight", w.name}, {"base", base.spec()}};
    return Density::make(std::move(p));
}

namespace {

struct ProbeStats {
    double max_lap = -std::numeric_limits<double>::infinity();
    double min_eig = std::numeric_limits<double>::infinity();
    PointSet used;
};

ProbeStats probe(const Density& d, const PointSet& pts, double delta_diag)
{
    ProbeStats s;
    const int n = d.dim();
    for (const Vec& x : pts) {
        if (d.singular_distance(x) < delta_diag) continue;
        const Mat H = d.hess_log(x);
        if (!H.allFinite()) continue;
        const double asym = (H - H.transpose()).norm();
        if (asym > 1e-4 * (1.0 + H.norm()))
            throw NumericalDerivativeError("estimate_certificate: Hessian fails symmetry tolerance");
        const Mat HV = -symmetrize(H);
        s.max_lap = std::max(s.max_lap, HV.trace() / n);
        Eigen::SelfAdjointEigenSolver<Mat> es(HV, Eigen::EigenvaluesOnly);
        s.min_eig = std::min(s.min_eig, es.eigenvalues().minCoeff());
        s.used.push_back(x);
    }
    return s;
}

} // namespace

ConvexityCertificate estimate_certificate(const Density& d, const TruncationBox& box, int probes,
                                          double delta_diag, int refine)
{
    if (probes < 1) throw InvalidInput("estimate_certificate: probes must be positive");
    const int n = d.dim();
    int m = std::max(2, static_cast<int>(std::floor(std::pow(static_cast<double>(probes), 1.0 / n) + 1e-9)));
    // Nested refinement: (m-1) 2^k + 1 points per axis contain the coarser grid.
    m = (m - 1) * (1 << refine) + 1;
    const PointSet grid = tensor_grid(box, m);
    const ProbeStats s = probe(d, grid, delta_diag);
    if (s.used.empty()) throw SupportError("estimate_certificate: every probe lies in the singular tube");
    ConvexityCertificate c;
    c.provenance = CertProvenance::sampled;
    c.empirical_alpha = s.max_lap;
    c.empirical_kappa = s.min_eig;
    if (s.max_lap > 0.0) c.alpha = s.max_lap;
    if (s.min_eig > 0.0) c.kappa = s.min_eig;
    c.probes = s.used;
    return c;
}

ConvexityCertificate reconcile(const ConvexityCertificate& analytic, const ConvexityCertificate& sampled,
                               double tol)
{
    if (analytic.alpha && std::isfinite(sampled.empirical_alpha) &&
        sampled.empirical_alpha > *analytic.alpha * (1.0 + analytic.declared_slack) + tol)
        throw CertificateConflict("sampled Laplacian " + std::to_string(sampled.empirical_alpha) +
                                  " exceeds analytic alpha " + std::to_string(*analytic.alpha));
    if (analytic.kappa && std::isfinite(sampled.empirical_kappa) &&
        sampled.empirical_kappa < *analytic.kappa * (1.0 - analytic.declared_slack) - tol)
        throw CertificateConflict("sampled Hessian eigenvalue " + std::to_string(sampled.empirical_kappa) +
                                  " is below analytic kappa " + std::to_string(*analytic.kappa));
    ConvexityCertificate out = analytic;
    out.probes = sampled.probes;
    out.empirical_alpha = sampled.empirical_alpha;
    out.empirical_kappa = sampled.empirical_kappa;
    return out;
}

nlohmann::json to_json(const ConvexityCertificate& c)
{
    nlohmann::json j;
    j["alpha"] = c.alpha ? nlohmann::json(*c.alpha) : nlohmann::json(nullptr);
    j["kappa"] = c.kappa ? nlohmann::json(*c.kappa) : nlohmann::json(nullptr);
    j["provenance"] = to_string(c.provenance);
    if (c.provenance == CertProvenance::sampled || !c.probes.empty()) {
        j["probe_count"] = c.probes.size();
        j["empirical_alpha"] = c.empirical_alpha;
        j["empirical_kappa"] = c.empirical_kappa;
    }
    return j;
}

} // namespace lsot
