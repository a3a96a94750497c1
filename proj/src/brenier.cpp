#include "lsot/brenier.hpp"
#include "lsot/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace lsot {

TransportMap gaussian_map(const GaussianParams& mu, const GaussianParams& nu)
{
    const int n = static_cast<int>(mu.mean.size());
    if (nu.mean.size() != n) throw InvalidInput("solve_gaussian: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Mat> es_mu(symmetrize(mu.cov));
    Eigen::SelfAdjointEigenSolver<Mat> es_nu(symmetrize(nu.cov));
    if (es_mu.eigenvalues().minCoeff() <= 0.0 || es_nu.eigenvalues().minCoeff() <= 0.0)
        throw InvalidInput("solve_gaussian: singular covariance");
    const Mat s = es_mu.operatorSqrt();
    const Mat si = es_mu.operatorInverseSqrt();
    Eigen::SelfAdjointEigenSolver<Mat> mid(symmetrize(s * nu.cov * s));
    const Mat A = symmetrize(si * mid.operatorSqrt() * si);
    const Mat Ainv = A.inverse();
    const double tr = A.trace();
    const Vec m0 = mu.mean, m1 = nu.mean;

    TransportMap T;
    T.dim = n;
    T.eval = [A, m0, m1](const Vec& x) -> Vec { return m1 + A * (x - m0); };
    T.jacobian = [A](const Vec&) -> Mat { return A; };
    T.laplacian = [tr](const Vec&) { return tr; };
    T.inverse = [Ainv, m0, m1](const Vec& y) -> Vec { return m0 + Ainv * (y - m1); };
    T.provenance = MapProvenance::closed_form_gaussian;
    return T;
}

TransportMap solve_gaussian(const Density& mu, const Density& nu)
{
    if (!mu.gaussian() || !nu.gaussian()) throw InvalidInput("solve_gaussian: both densities must be Gaussian");
    return gaussian_map(*mu.gaussian(), *nu.gaussian());
}

namespace {

/// Cumulative integrals of a nonnegative g over a sorted node set, with partial
/// cells by Gauss-Legendre. Keeps left and right tails separately so both ends
/// of the distribution invert without cancellation.
class CumulativeTable {
public:
    CumulativeTable(std::vector<double> nodes, std::function<double(double)> g, int order)
        : nodes_(std::move(nodes)), g_(std::move(g)), rule_(gauss_legendre(order))
    {
        const std::size_t m = nodes_.size() - 1;
        cell_.resize(m);
        for (std::size_t i = 0; i < m; ++i) cell_[i] = integrate(nodes_[i], nodes_[i + 1]);
        left_.assign(m + 1, 0.0);
        right_.assign(m + 1, 0.0);
        for (std::size_t i = 0; i < m; ++i) left_[i + 1] = left_[i] + cell_[i];
        for (std::size_t i = m; i-- > 0;) right_[i] = right_[i + 1] + cell_[i];
        total_ = left_[m];
        if (!(total_ > 0.0) || !std::isfinite(total_)) throw SupportError("cumulative table: zero or non-finite mass");
    }

    double lo() const { return nodes_.front(); }
    double hi() const { return nodes_.back(); }
    double total() const { return total_; }
    double g(double x) const { return g_(x); }

    // Mass of [lo, x] and [x, hi], normalized.
    double lower(double x) const
    {
        const std::size_t i = cell_of(x);
        return (left_[i] + integrate(nodes_[i], x)) / total_;
    }
    double upper(double x) const
    {
        const std::size_t i = cell_of(x);
        return (right_[i + 1] + integrate(x, nodes_[i + 1])) / total_;
    }

    // x with lower(x) = u (left form) or upper(x) = u (right form).
    double solve(double u, bool right_form) const
    {
        if (!(u > 0.0) || !(u < 1.0)) throw DomainError("quantile inversion: level outside (0, 1), cannot bracket");
        const double target = u * total_;
        const std::size_t m = cell_.size();
        std::size_t i;
        if (!right_form) {
            auto it = std::upper_bound(left_.begin(), left_.end(), target);
            i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - left_.begin()) - 1));
        } else {
            // right_ is decreasing; find the cell with right_[i+1] <= target < right_[i].
            std::size_t a = 0, b = m;
            while (b - a > 1) {
                const std::size_t c = (a + b) / 2;
                if (right_[c] > target) a = c; else b = c;
            }
            i = a;
        }
        i = std::min(i, m - 1);
        double a = nodes_[i], b = nodes_[i + 1];
        // residual increasing in x for both forms after the sign flip
        auto resid = [&](double x) {
            return right_form ? target - (right_[i + 1] + integrate(x, nodes_[i + 1]))
                              : left_[i] + integrate(nodes_[i], x) - target;
        };
        double x = a + (b - a) * std::clamp(right_form ? (right_[i] - target) / std::max(cell_[i], 1e-300)
                                                       : (target - left_[i]) / std::max(cell_[i], 1e-300),
                                            0.0, 1.0);
        for (int it = 0; it < 200; ++it) {
            const double r = resid(x);
            if (r == 0.0) return x;
            if (r > 0.0) b = x; else a = x;
            const double d = g_(x);
            double xn = d > 0.0 ? x - r / d : 0.5 * (a + b);
            if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
            if (std::abs(xn - x) <= 1e-15 * (1.0 + std::abs(x)) || b - a <= 1e-15 * (1.0 + std::abs(x))) return xn;
            x = xn;
        }
        return x;
    }

private:
    std::size_t cell_of(double x) const
    {
        if (x < nodes_.front() || x > nodes_.back()) throw DomainError("cumulative table: point outside the table range");
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
        std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - nodes_.begin())) - 1;
        return std::min(i, cell_.size() - 1);
    }

    double integrate(double a, double b) const
    {
        if (b <= a) return 0.0;
        const double h = 0.5 * (b - a), m = 0.5 * (a + b);
        double s = 0.0;
        for (std::size_t k = 0; k < rule_.x.size(); ++k) s += rule_.w[k] * g_(m + h * rule_.x[k]);
        return s * h;
    }

    std::vector<double> nodes_;
    std::function<double(double)> g_;
    Rule1D rule_;
    std::vector<double> cell_, left_, right_;
    double total_ = 0.0;
};

// Push x through F then G^{-1}, choosing the tail form with the better precision.
double rearrange(const CumulativeTable& from, const CumulativeTable& to, double x)
{
    const double u = from.lower(x);
    if (u <= 0.5) return to.solve(u, false);
    return to.solve(from.upper(x), true);
}

std::vector<double> uniform_nodes(double lo, double hi, int cells)
{
    std::vector<double> v(cells + 1);
    for (int i = 0; i <= cells; ++i) v[i] = lo + (hi - lo) * i / cells;
    v.back() = hi;
    return v;
}

std::shared_ptr<CumulativeTable> density_table_1d(const Density& d, const QuantileOptions& opt)
{
    const TruncationBox& box = d.box();
    const double lo = box.lower()[0], hi = box.upper()[0];
    double peak = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 256; ++i) {
        Vec x(1);
        x[0] = lo + (hi - lo) * i / 256.0;
        const double v = d.log_density(x);
        if (std::isfinite(v)) peak = std::max(peak, v);
    }
    if (!std::isfinite(peak)) throw SupportError("solve_quantile_1d: density vanishes on its box");
    auto g = [d, peak](double x) {
        Vec v(1);
        v[0] = x;
        return std::exp(d.log_density(v) - peak);
    };
    return std::make_shared<CumulativeTable>(uniform_nodes(lo, hi, opt.cells), g, opt.order);
}

} // namespace

TransportMap solve_quantile_1d(const Density& mu, const Density& nu, const QuantileOptions& opt)
{
    if (mu.dim() != 1 || nu.dim() != 1) throw InvalidInput("solve_quantile_1d: dimension must be 1");
    if (opt.cells < 2) throw InvalidInput("solve_quantile_1d: need at least 2 cells");
    auto F = density_table_1d(mu, opt);
    auto G = density_table_1d(nu, opt);

    auto forward = [F, G](double x) { return rearrange(*F, *G, x); };
    auto deriv = [F, G, forward](double x) {
        const double y = forward(x);
        const double num = F->g(x) / F->total();
        const double den = G->g(y) / G->total();
        if (!(den > 0.0)) throw DomainError("solve_quantile_1d: target density vanishes at the image point");
        return num / den;
    };

    TransportMap T;
    T.dim = 1;
    T.eval = [forward](const Vec& x) -> Vec { return Vec::Constant(1, forward(x[0])); };
    T.jacobian = [deriv](const Vec& x) -> Mat { return Mat::Constant(1, 1, deriv(x[0])); };
    T.laplacian = [deriv](const Vec& x) { return deriv(x[0]); };
    T.inverse = [F, G](const Vec& y) -> Vec { return Vec::Constant(1, rearrange(*G, *F, y[0])); };
    T.provenance = MapProvenance::quantile_1d;
    return T;
}

namespace {

void check_radial(const Density& d, const RadialProfile& profile, const Vec& center, double scale, double tol,
                  const char* which)
{
    const int n = d.dim();
    Rng rng(11);
    std::normal_distribution<double> nd;
    PointSet dirs;
    for (int k = 0; k < 16; ++k) {
        Vec u(n);
        if (n == 1) {
            u[0] = (k % 2) ? -1.0 : 1.0;
        } else if (n == 2) {
            const double th = 2.0 * M_PI * (k + 0.37) / 16.0;
            u << std::cos(th), std::sin(th);
        } else {
            for (int i = 0; i < n; ++i) u[i] = nd(rng);
            u.normalize();
        }
        dirs.push_back(u);
    }
    double offset = std::numeric_limits<double>::quiet_NaN();
    double offset_spread = 0.0;
    for (double f : {0.25, 0.5, 1.0, 2.0}) {
        const double r = f * scale;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const Vec& u : dirs) {
            const double v = d.log_density(center + r * u);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!std::isfinite(lo) || !std::isfinite(hi)) continue;
        if (hi - lo > tol * (1.0 + std::abs(hi)))
            throw InvalidInput(std::string("solve_radial: ") + which + " is not radial (angular spread " +
                               std::to_string(hi - lo) + " at r = " + std::to_string(r) + ")");
        const double p = profile(r);
        if (!(p > 0.0)) continue;
        const double off = std::log(p) - hi;
        if (std::isnan(offset)) offset = off;
        offset_spread = std::max(offset_spread, std::abs(off - offset));
    }
    if (offset_spread > 1e-6 * (1.0 + std::abs(offset)))
        throw InvalidInput(std::string("solve_radial: radial profile does not match the ") + which + " density");
}

std::shared_ptr<CumulativeTable> radial_table(const RadialProfile& p, int n, double r_max, const RadialOptions& opt)
{
    std::vector<double> nodes;
    nodes.push_back(0.0);
    const double a = std::log(opt.r_min), b = std::log(r_max);
    for (int i = 0; i < opt.nodes; ++i) nodes.push_back(std::exp(a + (b - a) * i / (opt.nodes - 1)));
    nodes.back() = r_max;
    double peak = 0.0;
    for (double r : nodes) {
        const double v = p(r) * std::pow(r, n - 1);
        if (std::isfinite(v)) peak = std::max(peak, v);
    }
    if (!(peak > 0.0)) throw SupportError("solve_radial: radial profile vanishes");
    auto g = [p, n, peak](double r) { return p(r) * std::pow(r, n - 1) / peak; };
    return std::make_shared<CumulativeTable>(nodes, g, opt.order);
}

} // namespace

TransportMap solve_radial(const Density& mu, const Density& nu, const RadialProfile& profile_mu,
                          const RadialProfile& profile_nu, const RadialOptions& opt)
{
    const int n = mu.dim();
    if (nu.dim() != n) throw InvalidInput("solve_radial: dimension mismatch");
    if (opt.nodes < 16) throw InvalidInput("solve_radial: need at least 16 radial nodes");
    const Vec c = opt.center ? *opt.center : Vec(Vec::Zero(n));
    const double rmu = opt.r_max ? *opt.r_max : mu.box().half_widths.norm();
    const double rnu = opt.r_max ? *opt.r_max : nu.box().half_widths.norm();
    if (!(opt.r_min > 0.0 && opt.r_min < std::min(rmu, rnu))) throw InvalidInput("solve_radial: bad radial range");
    check_radial(mu, profile_mu, c, rmu / 16.0, opt.angular_tol, "source");
    check_radial(nu, profile_nu, c, rnu / 16.0, opt.angular_tol, "target");

    auto M = radial_table(profile_mu, n, rmu, opt);
    auto N = radial_table(profile_nu, n, rnu, opt);
    const double floor_r = 1e-12;

    // t(r) and t'(r); below floor_r the values at floor_r stand in for the limit.
    auto radius = [M, N, floor_r](double r) { return rearrange(*M, *N, std::max(r, floor_r)); };
    auto slope = [M, N, radius, floor_r](double r) {
        r = std::max(r, floor_r);
        const double t = radius(r);
        const double den = N->g(t) / N->total();
        if (!(den > 0.0)) throw DomainError("solve_radial: target radial density vanishes at the image radius");
        return (M->g(r) / M->total()) / den;
    };

    TransportMap T;
    T.dim = n;
    T.eval = [c, radius, floor_r](const Vec& x) -> Vec {
        const Vec d = x - c;
        const double r = d.norm();
        if (r < floor_r) return c + (radius(floor_r) / floor_r) * d;
        return c + (radius(r) / r) * d;
    };
    T.jacobian = [c, n, radius, slope, floor_r](const Vec& x) -> Mat {
        const Vec d = x - c;
        double r = d.norm();
        Vec e = r < floor_r ? Vec(Vec::Unit(n, 0)) : Vec(d / r);
        r = std::max(r, floor_r);
        const double ratio = radius(r) / r;
        const double tp = slope(r);
        return ratio * Mat::Identity(n, n) + (tp - ratio) * e * e.transpose();
    };
    T.laplacian = [c, n, radius, slope, floor_r](const Vec& x) {
        const double r = std::max((x - c).norm(), floor_r);
        return slope(r) + (n - 1) * radius(r) / r;
    };
    T.inverse = [c, M, N, floor_r](const Vec& y) -> Vec {
        const Vec d = y - c;
        const double s = std::max(d.norm(), floor_r);
        return c + (rearrange(*N, *M, s) / s) * d;
    };
    T.provenance = MapProvenance::radial;
    return T;
}

DivergenceEstimate estimate_divergence(const TransportMap& T, const PointSet& fit_points, const PointSet& cloud,
                                       int k)
{
    if (fit_points.empty()) throw InvalidInput("estimate_divergence: no fit points");
    const int n = T.dim;
    if (k < n + 2) throw InvalidInput("estimate_divergence: need at least n + 2 neighbours");
    if (static_cast<int>(cloud.size()) < k) throw InvalidInput("estimate_divergence: cloud smaller than k");
    std::vector<Vec> images(cloud.size());
    for (std::size_t j = 0; j < cloud.size(); ++j) images[j] = T.eval(cloud[j]);

    DivergenceEstimate out;
    out.neighbors = k;
    std::vector<std::pair<double, std::size_t>> dist(cloud.size());
    for (std::size_t i = 0; i < fit_points.size(); ++i) {
        const Vec& x = fit_points[i];
        for (std::size_t j = 0; j < cloud.size(); ++j) dist[j] = {(cloud[j] - x).squaredNorm(), j};
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        Mat D(k, n + 1);
        Mat Y(k, n);
        for (int r = 0; r < k; ++r) {
            const std::size_t j = dist[r].second;
            D(r, 0) = 1.0;
            D.row(r).tail(n) = (cloud[j] - x).transpose();
            Y.row(r) = images[j].transpose();
        }
        Eigen::ColPivHouseholderQR<Mat> qr(D);
        qr.setThreshold(1e-10);
        if (qr.rank() < n + 1) {
            out.excluded.push_back(i);
            out.reasons.push_back("rank-deficient neighbourhood");
            continue;
        }
        const Mat coef = qr.solve(Y);  // (n+1) x n; rows 1..n hold the Jacobian transpose
        const double div = coef.bottomRows(n).trace();
        if (!std::isfinite(div)) {
            out.excluded.push_back(i);
            out.reasons.push_back("non-finite fit");
            continue;
        }
        out.points.push_back(x);
        out.values.push_back(div);
    }
    return out;
}

MongeAmpereResidual monge_ampere_residual(const TransportMap& T, const Density& mu, const Density& nu,
                                          const PointSet& probes)
{
    if (!T.has_jacobian()) throw InvalidInput("monge_ampere_residual: map has no Jacobian");
    MongeAmpereResidual r;
    r.probe_set = probes;
    for (const Vec& x : probes) {
        const double det = T.jacobian(x).determinant();
        if (!(det > 0.0)) throw ConvexityViolation("monge_ampere_residual: non-positive Jacobian determinant", x);
        const double v = mu.normalized_log_density(x) - nu.normalized_log_density(T.eval(x)) - std::log(det);
        if (!std::isfinite(v)) throw DomainError("monge_ampere_residual: non-finite residual at a probe");
        r.per_probe.push_back(v);
        r.sup_abs_log_residual = std::max(r.sup_abs_log_residual, std::abs(v));
    }
    return r;
}

PointSet interior_nodes(const GridLattice& g, int margin)
{
    PointSet out;
    std::vector<int> idx(g.dim, margin);
    for (int d = 0; d < g.dim; ++d)
        if (g.shape[d] - 1 - margin < margin) return out;
    while (true) {
        out.push_back(g.node(idx));
        int d = g.dim - 1;
        for (; d >= 0; --d) {
            if (++idx[d] <= g.shape[d] - 1 - margin) break;
            idx[d] = margin;
        }
        if (d < 0) break;
    }
    return out;
}

} // namespace lsot
