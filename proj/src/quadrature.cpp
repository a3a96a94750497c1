#include "lsot/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>

namespace lsot {

namespace {

// Golub-Welsch: eigen-decomposition of the Jacobi matrix.
Rule1D golub_welsch(const Vec& diag, const Vec& offdiag, double mu0)
{
    const int n = static_cast<int>(diag.size());
    Mat J = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) J(i, i) = diag[i];
    for (int i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = offdiag[i];
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        r.x[i] = es.eigenvalues()[i];
        const double v = es.eigenvectors()(0, i);
        r.w[i] = mu0 * v * v;
    }
    return r;
}

// Newton polish of Legendre roots; eigenvalues alone lose a few digits at high order.
void polish_legendre(Rule1D& r)
{
    const int n = static_cast<int>(r.x.size());
    for (int i = 0; i < n; ++i) {
        double x = r.x[i];
        double dp = 1.0;
        for (int it = 0; it < 3; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            x -= p1 / dp;
        }
        r.x[i] = x;
        r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

template <class Build>
const Rule1D& cached(std::map<int, Rule1D>& cache, std::mutex& m, int order, Build build)
{
    std::lock_guard<std::mutex> lock(m);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, build(order)).first;
    return it->second;
}

} // namespace

Rule1D gauss_legendre(int order)
{
    if (order < 1) throw InvalidInput("gauss_legendre: order must be positive");
    static std::map<int, Rule1D> cache;
    static std::mutex m;
    return cached(cache, m, order, [](int n) {
        Vec d = Vec::Zero(n), e(std::max(n - 1, 0));
        for (int k = 1; k < n; ++k) e[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
        Rule1D r = golub_welsch(d, e, 2.0);
        if (n > 1) polish_legendre(r);
        return r;
    });
}

Rule1D gauss_hermite(int order)
{
    if (order < 1) throw InvalidInput("gauss_hermite: order must be positive");
    static std::map<int, Rule1D> cache;
    static std::mutex m;
    return cached(cache, m, order, [](int n) {
        Vec d = Vec::Zero(n), e(std::max(n - 1, 0));
        for (int k = 1; k < n; ++k) e[k - 1] = std::sqrt(static_cast<double>(k));
        Rule1D r = golub_welsch(d, e, 1.0);
        // Symmetrize to remove eigen-solver jitter; the rule is exactly symmetric.
        for (int i = 0; i < n / 2; ++i) {
            const double x = 0.5 * (r.x[n - 1 - i] - r.x[i]);
            const double w = 0.5 * (r.w[n - 1 - i] + r.w[i]);
            r.x[i] = -x;
            r.x[n - 1 - i] = x;
            r.w[i] = r.w[n - 1 - i] = w;
        }
        if (n % 2 == 1) r.x[n / 2] = 0.0;
        double s = 0.0;
        for (double w : r.w) s += w;
        for (double& w : r.w) w /= s;
        return r;
    });
}

double Quadrature::integrate(const std::function<double(const Vec&)>& f) const
{
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += weights[i] * f(points[i]);
    return s;
}

double Quadrature::weight_sum() const
{
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

double unit_sphere_area(int dim)
{
    return 2.0 * std::pow(M_PI, 0.5 * dim) / std::tgamma(0.5 * dim);
}

Quadrature box_quadrature(const TruncationBox& box, int panels, int order)
{
    const int n = box.dim();
    if (panels < 1 || order < 1) throw InvalidInput("box_quadrature: panels and order must be positive");
    const Rule1D& gl = gauss_legendre(order);
    std::vector<std::vector<double>> ax(n), aw(n);
    for (int d = 0; d < n; ++d) {
        const double lo = box.center[d] - box.half_widths[d];
        const double h = 2.0 * box.half_widths[d] / panels;
        for (int p = 0; p < panels; ++p) {
            const double a = lo + p * h;
            for (int k = 0; k < order; ++k) {
                ax[d].push_back(a + 0.5 * h * (gl.x[k] + 1.0));
                aw[d].push_back(0.5 * h * gl.w[k]);
            }
        }
    }
    const std::size_t m = ax[0].size();
    std::size_t total = 1;
    for (int d = 0; d < n; ++d) total *= m;
    Quadrature q;
    q.points.reserve(total);
    q.weights.reserve(total);
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t c = 0; c < total; ++c) {
        Vec x(n);
        double w = 1.0;
        for (int d = 0; d < n; ++d) {
            x[d] = ax[d][idx[d]];
            w *= aw[d][idx[d]];
        }
        q.points.push_back(std::move(x));
        q.weights.push_back(w);
        for (int d = n - 1; d >= 0; --d) {
            if (++idx[d] < m) break;
            idx[d] = 0;
        }
    }
    q.description = "tensor Gauss-Legendre, " + std::to_string(panels) + " panels x " +
                    std::to_string(order) + " nodes per axis";
    return q;
}

Quadrature radial_quadrature(const Vec& center, double r_max, int panels, int order)
{
    const int n = static_cast<int>(center.size());
    const Rule1D& gl = gauss_legendre(order);
    const double area = unit_sphere_area(n);
    const double h = r_max / panels;
    Quadrature q;
    q.radial_only = true;
    for (int p = 0; p < panels; ++p) {
        for (int k = 0; k < order; ++k) {
            const double r = p * h + 0.5 * h * (gl.x[k] + 1.0);
            Vec x = center;
            x[0] += r;
            q.points.push_back(std::move(x));
            q.weights.push_back(0.5 * h * gl.w[k] * area * std::pow(r, n - 1));
        }
    }
    q.description = "radial Gauss-Legendre, " + std::to_string(panels) + " panels x " +
                    std::to_string(order) + " nodes";
    return q;
}

Quadrature polar_quadrature(const Vec& center, double r_max, int panels, int order, int angles)
{
    if (center.size() != 2) throw InvalidInput("polar_quadrature: dimension must be 2");
    const Rule1D& gl = gauss_legendre(order);
    const double h = r_max / panels;
    Quadrature q;
    for (int p = 0; p < panels; ++p) {
        for (int k = 0; k < order; ++k) {
            const double r = p * h + 0.5 * h * (gl.x[k] + 1.0);
            const double wr = 0.5 * h * gl.w[k] * r * 2.0 * M_PI / angles;
            for (int a = 0; a < angles; ++a) {
                const double th = 2.0 * M_PI * (a + 0.5) / angles;
                Vec x = center;
                x[0] += r * std::cos(th);
                x[1] += r * std::sin(th);
                q.points.push_back(std::move(x));
                q.weights.push_back(wr);
            }
        }
    }
    q.description = "polar Gauss-Legendre x uniform angles";
    return q;
}

Quadrature gauss_hermite_tensor(const Vec& mean, const Mat& chol, int order)
{
    const int n = static_cast<int>(mean.size());
    const Rule1D& gh = gauss_hermite(order);
    std::size_t total = 1;
    for (int d = 0; d < n; ++d) total *= static_cast<std::size_t>(order);
    Quadrature q;
    q.points.reserve(total);
    q.weights.reserve(total);
    std::vector<int> idx(n, 0);
    Vec z(n);
    for (std::size_t c = 0; c < total; ++c) {
        double w = 1.0;
        for (int d = 0; d < n; ++d) {
            z[d] = gh.x[idx[d]];
            w *= gh.w[idx[d]];
        }
        q.points.push_back(mean + chol * z);
        q.weights.push_back(w);
        for (int d = n - 1; d >= 0; --d) {
            if (++idx[d] < order) break;
            idx[d] = 0;
        }
    }
    q.description = "tensor Gauss-Hermite order " + std::to_string(order);
    return q;
}

PointSet gaussian_samples(const Vec& mean, const Mat& cov, std::size_t count, std::uint64_t seed)
{
    const int n = static_cast<int>(mean.size());
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw InvalidInput("gaussian_samples: covariance not positive definite");
    const Mat L = llt.matrixL();
    Rng rng(seed);
    std::normal_distribution<double> nd;
    PointSet out;
    out.reserve(count);
    Vec z(n);
    for (std::size_t i = 0; i < count; ++i) {
        for (int d = 0; d < n; ++d) z[d] = nd(rng);
        out.push_back(mean + L * z);
    }
    return out;
}

PointSet tensor_grid(const TruncationBox& box, int per_axis)
{
    const int n = box.dim();
    if (per_axis < 2) throw InvalidInput("tensor_grid: need at least two points per axis");
    std::size_t total = 1;
    for (int d = 0; d < n; ++d) total *= static_cast<std::size_t>(per_axis);
    PointSet out;
    out.reserve(total);
    std::vector<int> idx(n, 0);
    const Vec lo = box.lower();
    for (std::size_t c = 0; c < total; ++c) {
        Vec x(n);
        for (int d = 0; d < n; ++d)
            x[d] = lo[d] + 2.0 * box.half_widths[d] * idx[d] / (per_axis - 1);
        out.push_back(std::move(x));
        for (int d = n - 1; d >= 0; --d) {
            if (++idx[d] < per_axis) break;
            idx[d] = 0;
        }
    }
    return out;
}

} // namespace lsot
