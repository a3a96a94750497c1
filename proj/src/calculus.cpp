#include "lsot/calculus.hpp"
#include "lsot/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>
#include <sstream>

namespace lsot {

const char* to_string(SphereKind k)
{
    switch (k) {
    case SphereKind::two_point_1d: return "two_point_1d";
    case SphereKind::uniform_angle_2d: return "uniform_angle_2d";
    case SphereKind::randomized_orthogonal_nd: return "randomized_orthogonal_nd";
    }
    return "unknown";
}

SphereRule sphere_rule(int dim, int frames, std::uint64_t seed, int angles)
{
    if (dim < 1) throw InvalidInput("sphere_rule: dimension must be positive");
    SphereRule r;
    r.dim = dim;
    if (dim == 1) {
        r.kind = SphereKind::two_point_1d;
        r.nodes = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
        r.weights = {0.5, 0.5};
        return r;
    }
    if (dim == 2) {
        if (angles < 4 || angles % 2) throw InvalidInput("sphere_rule: angle count must be even and >= 4");
        r.kind = SphereKind::uniform_angle_2d;
        for (int k = 0; k < angles; ++k) {
            const double th = 2.0 * M_PI * k / angles;
            Vec y(2);
            y << std::cos(th), std::sin(th);
            r.nodes.push_back(y);
            r.weights.push_back(1.0 / angles);
        }
        // Exact antipodes so odd moments cancel to the last bit.
        for (int k = 0; k < angles / 2; ++k) r.nodes[k + angles / 2] = -r.nodes[k];
        return r;
    }
    if (frames < 1) throw InvalidInput("sphere_rule: need at least one frame");
    r.kind = SphereKind::randomized_orthogonal_nd;
    r.seed = seed;
    Rng rng(seed);
    std::normal_distribution<double> nd;
    const double w = 1.0 / (2.0 * dim * frames);
    for (int f = 0; f < frames; ++f) {
        Mat G(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) G(i, j) = nd(rng);
        Eigen::HouseholderQR<Mat> qr(G);
        const Mat Q = qr.householderQ();
        for (int j = 0; j < dim; ++j) {
            const Vec q = Q.col(j).normalized();
            r.nodes.push_back(q);
            r.nodes.push_back(-q);
            r.weights.push_back(w);
            r.weights.push_back(w);
        }
    }
    return r;
}

double delta_epsilon(const ScalarField& f, const Vec& x, double epsilon, const SphereRule& rule)
{
    if (!(epsilon > 0.0)) throw InvalidInput("delta_epsilon: epsilon must be positive");
    if (x.size() != rule.dim) throw InvalidInput("delta_epsilon: dimension mismatch");
    const double f0 = f(x);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        double v;
        try {
            v = f(x + epsilon * rule.nodes[i]);
        } catch (const std::exception& e) {
            throw EvaluationError(std::string("delta_epsilon: evaluation failed at sphere node: ") + e.what(), i);
        }
        if (!std::isfinite(v))
            throw EvaluationError("delta_epsilon: non-finite value at sphere node " + std::to_string(i), i);
        s += rule.weights[i] * (v - f0);
    }
    return s;
}

DeltaLimitReport delta_epsilon_limit_check(const ScalarField& f, double laplacian, const Vec& x,
                                           const std::vector<double>& epsilons, const SphereRule& rule,
                                           double noise_floor)
{
    if (epsilons.size() < 4) throw InvalidInput("delta_epsilon_limit_check: need at least 4 epsilons");
    for (std::size_t i = 1; i < epsilons.size(); ++i)
        if (!(epsilons[i] < epsilons[i - 1])) throw InvalidInput("delta_epsilon_limit_check: epsilons must decrease");
    const int n = rule.dim;
    const double target = laplacian / (2.0 * n);
    DeltaLimitReport r;
    r.epsilons = epsilons;
    for (double e : epsilons) r.errors.push_back(std::abs(delta_epsilon(f, x, e, rule) / (e * e) - target));

    r.exact = true;
    for (double e : r.errors) r.exact = r.exact && e <= noise_floor * (1.0 + std::abs(target));
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (r.errors[i] <= noise_floor * (1.0 + std::abs(target))) continue;
        lx.push_back(std::log(epsilons[i]));
        ly.push_back(std::log(r.errors[i]));
        if (i > 0 && r.errors[i] > r.errors[i - 1] && r.errors[i - 1] > noise_floor * (1.0 + std::abs(target)))
            r.non_monotone = true;
    }
    if (lx.size() >= 2) {
        const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
        const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        r.order = sxy / sxx;
    } else {
        r.order = std::numeric_limits<double>::infinity();
    }

    BoundCertificate& c = r.certificate;
    c.bound_name = BoundName::delta_eps_limit;
    c.label = "empirical convergence order of Delta_eps f / eps^2";
    c.relation = Relation::at_least;
    c.theoretical_rhs = 2.0;
    c.tolerance = 0.1;
    c.probe_count = epsilons.size();
    c.seed = rule.seed;
    c.provenance = to_string(rule.kind);
    for (std::size_t i = 0; i < epsilons.size(); ++i) c.series.push_back({"error", epsilons[i], r.errors[i]});
    if (r.exact) {
        c.observed = r.errors.front();
        c.verdict = Verdict::pass;
        c.notes.push_back("errors below the noise floor at every epsilon");
    } else {
        c.observed = r.order;
        decide(c);
    }
    if (r.non_monotone) c.notes.push_back("error sequence is not monotone above the noise floor");
    return r;
}

BoundCertificate check_delta_epsilon_bound(const ScalarField& f, double ell, const PointSet& xs,
                                           const std::vector<double>& epsilons, const SphereRule& rule, double tol)
{
    if (xs.empty() || epsilons.empty()) throw InvalidInput("check_delta_epsilon_bound: empty probe set");
    const int n = rule.dim;
    double worst = -std::numeric_limits<double>::infinity();
    for (const Vec& x : xs)
        for (double e : epsilons) worst = std::max(worst, delta_epsilon(f, x, e, rule) - (ell / n) * (e * e / 2.0));
    BoundCertificate c;
    c.bound_name = BoundName::delta_eps_limit;
    c.label = "Delta_eps f <= (ell/n) eps^2/2";
    c.relation = Relation::at_most;
    c.theoretical_rhs = 0.0;
    c.observed = worst;
    c.tolerance = tol;
    c.probe_count = xs.size() * epsilons.size();
    c.seed = rule.seed;
    c.provenance = to_string(rule.kind);
    decide(c);
    return c;
}

MapStatistics matrix_statistics(const Mat& J)
{
    const int n = static_cast<int>(J.rows());
    const Mat S = symmetrize(J);
    Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
    MapStatistics m;
    m.trace_jacobian = S.trace();
    m.det_jacobian = S.determinant();
    m.op_norm = es.eigenvalues().cwiseAbs().maxCoeff();
    m.min_eigenvalue = es.eigenvalues().minCoeff();
    m.frobenius_dist_to_identity = (S - Mat::Identity(n, n)).norm();
    m.asymmetry = (0.5 * (J - J.transpose())).norm();
    return m;
}

MapStatistics map_statistics(const TransportMap& T, const Vec& x)
{
    if (!T.has_jacobian()) throw InvalidInput("map_statistics: map has no Jacobian");
    MapStatistics m = matrix_statistics(T.jacobian(x));
    if (T.laplacian) m.trace_jacobian = T.laplacian(x);
    return m;
}

} // namespace lsot
