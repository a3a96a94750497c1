#include "lsot/brenier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace lsot {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse(const double* v, std::size_t n, std::size_t stride = 1)
{
    double m = kNegInf;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i * stride]);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i * stride] - m);
    return m + std::log(s);
}

/// Separable log-sum-exp against exp(-|x_i - x_j|^2 / (2 eps)) on a tensor grid
/// with the same nodes on every axis. Each axis pass is a matrix product with the
/// 1-D kernel after a per-line max shift; outputs whose shifted sum underflows
/// are recomputed exactly.
class GridKernel {
public:
    GridKernel(int dim, std::vector<double> nodes, double eps) : dim_(dim), m_(static_cast<int>(nodes.size()))
    {
        cost_.resize(m_, m_);
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < m_; ++j) {
                const double d = nodes[i] - nodes[j];
                cost_(i, j) = d * d / (2.0 * eps);
            }
    }

    std::size_t size() const
    {
        std::size_t s = 1;
        for (int d = 0; d < dim_; ++d) s *= m_;
        return s;
    }

    // out(i) = LSE_j [h(j) - C(i, j) / eps]
    std::vector<double> apply(const std::vector<double>& h) const
    {
        std::vector<double> cur = h;
        for (int axis = dim_ - 1; axis >= 0; --axis) cur = axis_pass(cur, axis);
        return cur;
    }

private:
    std::vector<double> axis_pass(const std::vector<double>& in, int axis) const
    {
        // Lines along `axis`: stride between consecutive elements and the set of line starts.
        std::size_t stride = 1;
        for (int d = dim_ - 1; d > axis; --d) stride *= m_;
        const std::size_t total = size();
        const std::size_t lines = total / m_;
        std::vector<std::size_t> starts;
        starts.reserve(lines);
        for (std::size_t s = 0; s < total; ++s)
            if ((s / stride) % m_ == 0) starts.push_back(s);

        // Absorb a per-column offset p_j into the kernel and a per-line offset r_l
        // into the inputs; exact for inputs of the form A_l + B_j.
        std::vector<double> p(m_, kNegInf);
        for (std::size_t l = 0; l < lines; ++l)
            for (int k = 0; k < m_; ++k) p[k] = std::max(p[k], in[starts[l] + k * stride]);
        std::vector<double> q(m_, kNegInf);
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < m_; ++j)
                if (p[j] != kNegInf) q[i] = std::max(q[i], p[j] - cost_(i, j));
        if (q[0] == kNegInf) return std::vector<double>(total, kNegInf);
        Mat Kt(m_, m_);
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < m_; ++j) Kt(i, j) = p[j] == kNegInf ? 0.0 : std::exp(p[j] - q[i] - cost_(i, j));

        Mat E(m_, lines);
        std::vector<double> shift(lines);
        for (std::size_t l = 0; l < lines; ++l) {
            double mx = kNegInf;
            for (int k = 0; k < m_; ++k)
                if (p[k] != kNegInf) mx = std::max(mx, in[starts[l] + k * stride] - p[k]);
            shift[l] = mx;
            for (int k = 0; k < m_; ++k)
                E(k, l) = (mx == kNegInf || p[k] == kNegInf) ? 0.0 : std::exp(in[starts[l] + k * stride] - p[k] - mx);
        }
        const Mat S = Kt * E;
        std::vector<double> out(total);
        std::vector<double> tmp(m_);
        for (std::size_t l = 0; l < lines; ++l) {
            for (int i = 0; i < m_; ++i) {
                const std::size_t o = starts[l] + i * stride;
                if (shift[l] == kNegInf) {
                    out[o] = kNegInf;
                    continue;
                }
                const double s = S(i, l);
                if (s > 1e-200) {
                    out[o] = shift[l] + q[i] + std::log(s);
                } else {
                    for (int j = 0; j < m_; ++j) tmp[j] = in[starts[l] + j * stride] - cost_(i, j);
                    out[o] = lse(tmp.data(), m_);
                }
            }
        }
        return out;
    }

    int dim_;
    int m_;
    Mat cost_;
};

struct GridProblem {
    int dim = 0;
    int m = 0;
    std::vector<double> nodes;  // per axis (cube grid)
    std::vector<double> log_a, log_b;
    TruncationBox box;
    std::size_t size() const
    {
        std::size_t s = 1;
        for (int d = 0; d < dim; ++d) s *= m;
        return s;
    }
    Vec point(std::size_t f) const
    {
        Vec x(dim);
        for (int d = dim - 1; d >= 0; --d) {
            x[d] = nodes[f % m] + box.center[d] - box.center[0];
            f /= m;
        }
        return x;
    }
};

std::vector<double> grid_log_weights(const Density& rho, const GridProblem& P)
{
    std::vector<double> w(P.size());
    for (std::size_t f = 0; f < w.size(); ++f) {
        const double v = rho.log_density(P.point(f));
        w[f] = std::isfinite(v) ? v : kNegInf;
    }
    const double z = lse(w.data(), w.size());
    if (!std::isfinite(z)) throw SupportError("solve_entropic_grid: density vanishes on the grid");
    for (double& v : w) v -= z;
    return w;
}

struct Potentials {
    std::vector<double> u, v;  // f / eps, g / eps
};

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

// Alternating scaling to L1 marginal error <= tol. Returns the final error.
double sinkhorn(const GridKernel& K, const std::vector<double>& log_a, const std::vector<double>& log_b,
                Potentials& p, int max_iter, double tol, int& iterations)
{
    const std::size_t N = log_a.size();
    if (p.u.size() != N) p.u.assign(N, 0.0);
    if (p.v.size() != N) p.v.assign(N, 0.0);
    double err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        std::vector<double> un = K.apply(add(p.v, log_b));
        for (double& x : un) x = -x;
        if (it > 0) {
            err = 0.0;
            for (std::size_t i = 0; i < N; ++i)
                if (log_a[i] != kNegInf) err += std::exp(log_a[i]) * std::abs(std::expm1(p.u[i] - un[i]));
        }
        p.u = std::move(un);
        std::vector<double> vn = K.apply(add(p.u, log_a));
        for (double& x : vn) x = -x;
        p.v = std::move(vn);
        iterations = it + 1;
        if (err <= tol) return err;
    }
    return err;
}

// Barycentric projection of the plan at every grid node, values laid out like GridLattice.
std::vector<double> barycentric(const GridKernel& K, const GridProblem& P, const std::vector<double>& log_b,
                                const std::vector<double>& v)
{
    const std::size_t N = P.size();
    const std::vector<double> h = add(v, log_b);
    const std::vector<double> den = K.apply(h);
    std::vector<double> out(N * P.dim);
    for (int d = 0; d < P.dim; ++d) {
        const double lower = P.box.lower()[d];
        const double shift = 1.0 - lower;
        std::vector<double> hd(N);
        for (std::size_t f = 0; f < N; ++f) hd[f] = h[f] + std::log(P.point(f)[d] + shift);
        const std::vector<double> num = K.apply(hd);
        for (std::size_t f = 0; f < N; ++f) out[f * P.dim + d] = std::exp(num[f] - den[f]) - shift;
    }
    return out;
}

GridProblem make_problem(const Density& mu, const Density& nu, const TruncationBox& box, int m)
{
    const int n = box.dim();
    if (n < 1 || n > 2) throw InvalidInput("solve_entropic_grid: tensor grids support dimension 1 or 2");
    if (mu.dim() != n || nu.dim() != n) throw InvalidInput("solve_entropic_grid: dimension mismatch");
    for (int d = 1; d < n; ++d)
        if (std::abs(box.half_widths[d] - box.half_widths[0]) > 1e-12)
            throw InvalidInput("solve_entropic_grid: box must be a cube");
    if (m < 4) throw InvalidInput("solve_entropic_grid: need at least 4 grid points per axis");
    GridProblem P;
    P.dim = n;
    P.m = m;
    P.box = box;
    const double lo = box.center[0] - box.half_widths[0], hi = box.center[0] + box.half_widths[0];
    for (int i = 0; i < m; ++i) P.nodes.push_back(lo + (hi - lo) * i / (m - 1));
    P.log_a = grid_log_weights(mu, P);
    P.log_b = grid_log_weights(nu, P);
    return P;
}

void check_underflow(const GridProblem& P, double eps)
{
    const double h = P.nodes[1] - P.nodes[0];
    if (h * h / (2.0 * eps) > 690.0) {
        std::ostringstream os;
        os << "solve_entropic_grid: kernel underflows between neighbouring nodes at epsilon " << eps
           << "; use an epsilon-scaling schedule or a finer grid";
        throw UnderflowError(os.str());
    }
}

struct Solved {
    std::vector<double> values;
    Potentials pot;
    double err = 0.0;
    int iterations = 0;
};

// Geometric epsilon-scaling from eps_start down to eps, each stage warm-started.
Solved solve_stage(const GridProblem& P, const std::vector<double>& log_a, const std::vector<double>& log_b,
                   double eps, Potentials pot, double eps_prev, const EntropicOptions& opt)
{
    const double span = P.nodes.back() - P.nodes.front();
    double e = std::isfinite(eps_prev) ? eps_prev : std::max(eps, 0.25 * span * span);
    Solved s;
    s.pot = std::move(pot);
    int used = 0;
    while (true) {
        const double next = std::max(eps, 0.5 * e);
        const double ratio = e / next;
        for (double& x : s.pot.u) x *= ratio;
        for (double& x : s.pot.v) x *= ratio;
        e = next;
        check_underflow(P, e);
        GridKernel K(P.dim, P.nodes, e);
        int it = 0;
        const bool final = e <= eps;
        s.err = sinkhorn(K, log_a, log_b, s.pot, opt.max_iter - used, final ? opt.tol : std::max(opt.tol, 1e-3), it);
        used += it;
        if (final) {
            s.iterations = used;
            if (!(s.err <= opt.tol)) {
                std::ostringstream os;
                os << "solve_entropic_grid: no convergence within " << opt.max_iter << " iterations at epsilon "
                   << eps << " (marginal error " << s.err << ")";
                throw ConvergenceError(os.str(), s.err);
            }
            s.values = barycentric(K, P, log_b, s.pot.v);
            return s;
        }
        if (used >= opt.max_iter) throw ConvergenceError("solve_entropic_grid: iteration budget spent during epsilon scaling", s.err);
    }
}

TransportMap lattice_map(const GridProblem& P, std::vector<double> values, double eps, bool debiased, int iterations,
                         double err)
{
    GridLattice g;
    g.dim = P.dim;
    g.lower = P.box.lower();
    g.upper = P.box.upper();
    g.shape.assign(P.dim, P.m);
    g.values = std::move(values);
    TransportMap T = map_from_lattice(std::move(g), MapProvenance::entropic_grid, eps);
    T.debiased = debiased;
    std::ostringstream os;
    os << "iterations " << iterations << ", marginal error " << err;
    T.note = os.str();
    return T;
}

} // namespace

std::vector<TransportMap> solve_entropic_schedule(const Density& mu, const Density& nu, const TruncationBox& box,
                                                  const std::vector<double>& epsilons, const EntropicOptions& opt)
{
    if (epsilons.empty()) throw InvalidInput("solve_entropic_grid: empty epsilon schedule");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0)) throw InvalidInput("solve_entropic_grid: epsilon must be positive");
        if (i && !(epsilons[i] < epsilons[i - 1])) throw InvalidInput("solve_entropic_grid: schedule must decrease");
    }
    const int m = opt.grid_points > 0 ? opt.grid_points : box.grid_points_per_axis;
    const GridProblem P = make_problem(mu, nu, box, m);
    std::vector<TransportMap> out;
    Potentials main_pot, self_pot;
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : epsilons) {
        check_underflow(P, eps);
        Solved s = solve_stage(P, P.log_a, P.log_b, eps, main_pot, prev, opt);
        main_pot = s.pot;
        std::vector<double> values = std::move(s.values);
        if (opt.debias) {
            Solved self = solve_stage(P, P.log_a, P.log_a, eps, self_pot, prev, opt);
            self_pot = self.pot;
            const std::size_t N = P.size();
            for (std::size_t f = 0; f < N; ++f) {
                const Vec x = P.point(f);
                for (int d = 0; d < P.dim; ++d) values[f * P.dim + d] -= self.values[f * P.dim + d] - x[d];
            }
        }
        out.push_back(lattice_map(P, std::move(values), eps, opt.debias, s.iterations, s.err));
        prev = eps;
    }
    return out;
}

TransportMap solve_entropic_grid(const Density& mu, const Density& nu, const TruncationBox& box, double epsilon,
                                 const EntropicOptions& opt)
{
    return solve_entropic_schedule(mu, nu, box, {epsilon}, opt).front();
}

namespace {

struct CloudSolve {
    Mat X, Y;  // points as rows
    std::vector<double> log_a, log_b;
    Potentials pot;
    double err = 0.0;
    int iterations = 0;
};

std::vector<double> log_weights(const std::vector<double>& w, std::size_t n)
{
    std::vector<double> out(n, -std::log(static_cast<double>(n)));
    if (w.empty()) return out;
    if (w.size() != n) throw InvalidInput("solve_entropic_sample: weight count mismatch");
    double s = 0.0;
    for (double x : w) {
        if (!(x >= 0.0)) throw InvalidInput("solve_entropic_sample: weights must be nonnegative");
        s += x;
    }
    if (!(s > 0.0)) throw InvalidInput("solve_entropic_sample: weights sum to zero");
    for (std::size_t i = 0; i < n; ++i) out[i] = w[i] > 0.0 ? std::log(w[i] / s) : kNegInf;
    return out;
}

Mat rows(const PointSet& p)
{
    Mat m(p.size(), p.front().size());
    for (std::size_t i = 0; i < p.size(); ++i) m.row(i) = p[i].transpose();
    return m;
}

// Dense log-domain scaling between two clouds. C/eps is formed once; the kernel
// products use a max shift with exact fallback on underflow.
void solve_cloud(CloudSolve& s, double eps, int max_iter, double tol)
{
    const Eigen::Index N = s.X.rows(), M = s.Y.rows();
    const Vec xn = s.X.rowwise().squaredNorm(), yn = s.Y.rowwise().squaredNorm();
    Mat C = (-2.0 * s.X * s.Y.transpose());
    C.colwise() += xn;
    C.rowwise() += yn.transpose();
    C = (C.array().max(0.0) / (2.0 * eps)).matrix();
    const Mat K = (-C.array()).exp().matrix();

    auto apply = [&](const std::vector<double>& h, bool transpose) {
        const Eigen::Index in = transpose ? N : M, outn = transpose ? M : N;
        double mx = kNegInf;
        for (Eigen::Index j = 0; j < in; ++j) mx = std::max(mx, h[j]);
        Vec e(in);
        for (Eigen::Index j = 0; j < in; ++j) e[j] = mx == kNegInf ? 0.0 : std::exp(h[j] - mx);
        const Vec sum = transpose ? Vec(K.transpose() * e) : Vec(K * e);
        std::vector<double> out(outn);
        std::vector<double> tmp(in);
        for (Eigen::Index i = 0; i < outn; ++i) {
            if (sum[i] > 1e-200) {
                out[i] = mx + std::log(sum[i]);
            } else {
                for (Eigen::Index j = 0; j < in; ++j) tmp[j] = h[j] - (transpose ? C(j, i) : C(i, j));
                out[i] = lse(tmp.data(), in);
            }
        }
        return out;
    };

    if (s.pot.u.size() != static_cast<std::size_t>(N)) s.pot.u.assign(N, 0.0);
    if (s.pot.v.size() != static_cast<std::size_t>(M)) s.pot.v.assign(M, 0.0);
    s.err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        std::vector<double> un = apply(add(s.pot.v, s.log_b), false);
        for (double& x : un) x = -x;
        if (it > 0) {
            s.err = 0.0;
            for (Eigen::Index i = 0; i < N; ++i)
                if (s.log_a[i] != kNegInf) s.err += std::exp(s.log_a[i]) * std::abs(std::expm1(s.pot.u[i] - un[i]));
        }
        s.pot.u = std::move(un);
        std::vector<double> vn = apply(add(s.pot.u, s.log_a), true);
        for (double& x : vn) x = -x;
        s.pot.v = std::move(vn);
        s.iterations = it + 1;
        if (s.err <= tol) return;
    }
    std::ostringstream os;
    os << "solve_entropic_sample: no convergence within " << max_iter << " iterations (marginal error " << s.err << ")";
    throw ConvergenceError(os.str(), s.err);
}

void anneal_cloud(CloudSolve& s, double eps, const SampleOptions& opt)
{
    // Coarse-to-fine in epsilon; cheap and keeps the final stage short.
    const Vec lo = s.Y.colwise().minCoeff(), hi = s.Y.colwise().maxCoeff();
    double e = std::max(eps, 0.25 * (hi - lo).squaredNorm());
    while (e > eps) {
        const double next = std::max(eps, 0.5 * e);
        for (double& x : s.pot.u) x *= e / next;
        for (double& x : s.pot.v) x *= e / next;
        e = next;
        if (e > eps) solve_cloud(s, e, opt.max_iter, std::max(opt.tol, 1e-3));
    }
    solve_cloud(s, eps, opt.max_iter, opt.tol);
}

// Out-of-sample barycentric projection: softmax over target points.
Vec project(const Mat& Y, const std::vector<double>& v, const std::vector<double>& log_b, double eps, const Vec& x)
{
    const Eigen::Index M = Y.rows();
    std::vector<double> h(M);
    double mx = kNegInf;
    for (Eigen::Index j = 0; j < M; ++j) {
        h[j] = v[j] + log_b[j] - (Y.row(j).transpose() - x).squaredNorm() / (2.0 * eps);
        mx = std::max(mx, h[j]);
    }
    Vec acc = Vec::Zero(Y.cols());
    double den = 0.0;
    for (Eigen::Index j = 0; j < M; ++j) {
        const double w = std::exp(h[j] - mx);
        den += w;
        acc += w * Y.row(j).transpose();
    }
    return acc / den;
}

} // namespace

TransportMap solve_entropic_sample(const PointSet& mu_samples, const PointSet& nu_samples, double epsilon,
                                   const SampleOptions& opt)
{
    if (mu_samples.empty() || nu_samples.empty()) throw InvalidInput("solve_entropic_sample: empty sample set");
    if (mu_samples.size() != nu_samples.size()) throw InvalidInput("solve_entropic_sample: sample sets must have equal size");
    if (!(epsilon > 0.0)) throw InvalidInput("solve_entropic_sample: epsilon must be positive");
    const int n = static_cast<int>(mu_samples.front().size());
    for (const Vec& p : mu_samples)
        if (p.size() != n) throw InvalidInput("solve_entropic_sample: inconsistent dimensions");
    for (const Vec& p : nu_samples)
        if (p.size() != n) throw InvalidInput("solve_entropic_sample: inconsistent dimensions");

    auto main = std::make_shared<CloudSolve>();
    main->X = rows(mu_samples);
    main->Y = rows(nu_samples);
    main->log_a = log_weights(opt.mu_weights, mu_samples.size());
    main->log_b = log_weights(opt.nu_weights, nu_samples.size());
    anneal_cloud(*main, epsilon, opt);

    std::shared_ptr<CloudSolve> self;
    if (opt.debias) {
        self = std::make_shared<CloudSolve>();
        self->X = main->X;
        self->Y = main->X;
        self->log_a = main->log_a;
        self->log_b = main->log_a;
        anneal_cloud(*self, epsilon, opt);
    }

    TransportMap T;
    T.dim = n;
    T.eval = [main, self, epsilon](const Vec& x) -> Vec {
        Vec y = project(main->Y, main->pot.v, main->log_b, epsilon, x);
        if (self) y -= project(self->Y, self->pot.v, self->log_b, epsilon, x) - x;
        return y;
    };
    T.provenance = MapProvenance::entropic_sample;
    T.entropic_epsilon = epsilon;
    T.debiased = opt.debias;
    std::ostringstream os;
    os << "iterations " << main->iterations << ", marginal error " << main->err;
    T.note = os.str();
    return T;
}

} // namespace lsot
