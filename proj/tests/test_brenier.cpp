#include "gen.hpp"
#include "lsot/brenier.hpp"
#include "lsot/verify.hpp"

#include <algorithm>
#include <sstream>

using namespace lsot;

namespace {

double l2_gap(const TransportMap& a, const TransportMap& b, const PointSet& xs)
{
    double num = 0.0, den = 0.0;
    for (const Vec& x : xs) {
        const Vec ya = a.eval(x), yb = b.eval(x);
        num += (ya - yb).squaredNorm();
        den += yb.squaredNorm();
    }
    return std::sqrt(num / den);
}

} // namespace

TEST_CASE("closed-form Gaussian map: A Sigma_mu A = Sigma_nu with A SPD")
{
    gen::for_all(20, 41, [](gen::Gen& g) {
        const int n = g.integer(1, 4);
        const Mat Sm = g.spd(n), Sn = g.spd(n);
        const Vec mm = g.vec(n), mn = g.vec(n);
        const TransportMap T = solve_gaussian(gaussian(mm, Sm), gaussian(mn, Sn));
        const Mat A = T.jacobian(g.vec(n));
        CHECK((A * Sm * A - Sn).norm() < 1e-9 * (1.0 + Sn.norm()));
        CHECK((A - A.transpose()).norm() < 1e-12 * (1.0 + A.norm()));
        CHECK(A.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() > 0.0);
        CHECK((T.eval(mm) - mn).norm() < 1e-12 * (1.0 + mn.norm()));
    });
}

TEST_CASE("inverse consistency and cyclical monotonicity")
{
    gen::for_all(20, 42, [](gen::Gen& g) {
        const int n = g.integer(1, 3);
        const Density mu = gaussian(g.vec(n), g.spd(n)), nu = gaussian(g.vec(n), g.spd(n));
        const TransportMap T = solve_gaussian(mu, nu), S = solve_gaussian(nu, mu);
        PointSet xs;
        for (int k = 0; k < 30; ++k) {
            const Vec x = g.vec(n, 2.0);
            CHECK((S.eval(T.eval(x)) - x).norm() < 1e-9 * (1.0 + x.norm()));
            xs.push_back(x);
        }
        CHECK(check_cyclical_monotonicity(T, xs, 200, 3, 1e-12).passed());
    });
}

TEST_CASE("quantile map agrees with the closed form")
{
    const double sm = 3.0, sn = 1.0;
    const Density mu = gaussian(Vec::Zero(1), Mat::Constant(1, 1, sm * sm)).with_box(TruncationBox::cube(1, 12 * sm));
    const Density nu = gaussian(Vec::Constant(1, 0.5), Mat::Constant(1, 1, sn * sn))
                           .with_box(TruncationBox{Vec::Constant(1, 0.5), Vec::Constant(1, 12 * sn), 64});
    const TransportMap Q = solve_quantile_1d(mu, nu);
    const TransportMap G = solve_gaussian(mu, nu);
    CHECK(Q.provenance == MapProvenance::quantile_1d);
    const PointSet xs = default_probes(Q, mu);
    CHECK(l2_gap(Q, G, xs) < 1e-6);
    for (const Vec& x : xs) CHECK(Q.jacobian(x)(0, 0) == doctest::Approx(sn / sm).epsilon(1e-4));
}

TEST_CASE("quantile map pushes a truncated Laplace law onto the standard Gaussian")
{
    const TruncationBox box = TruncationBox::cube(1, 30.0, 256);
    DensityParts parts;
    parts.dim = 1;
    parts.log_density = [](const Vec& x) { return -std::abs(x[0]) - std::log(2.0); };
    parts.box = box;
    const Density mu = Density::make(parts);
    const Density nu = gaussian(Vec::Zero(1), Mat::Identity(1, 1)).with_box(TruncationBox::cube(1, 12.0));
    const TransportMap Q = solve_quantile_1d(mu, nu);
    // Equal-mass quadrature: 10^4 midpoints in probability, placed by the Laplace quantile function.
    // Jumps are 1e-4, well below the tolerance, so the statistic measures the map.
    const int N = 10000;
    double ks = 0.0;
    std::vector<double> ys;
    for (int i = 0; i < N; ++i) {
        const double u = (i + 0.5) / N;
        const double x = u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
        ys.push_back(Q.eval(Vec::Constant(1, x))[0]);
    }
    std::sort(ys.begin(), ys.end());
    for (int i = 0; i < N; ++i) {
        const double phi = 0.5 * std::erfc(-ys[i] / std::sqrt(2.0));
        ks = std::max({ks, std::abs(static_cast<double>(i) / N - phi), std::abs(static_cast<double>(i + 1) / N - phi)});
    }
    CHECK(ks <= 1e-3);
}

TEST_CASE("radial map agrees with the closed form")
{
    const double sm = 2.0, sn = 1.0;
    const Density mu = gaussian(Vec::Zero(2), sm * sm * Mat::Identity(2, 2)).with_box(TruncationBox::cube(2, 12 * sm));
    const Density nu = gaussian(Vec::Zero(2), sn * sn * Mat::Identity(2, 2)).with_box(TruncationBox::cube(2, 12 * sn));
    const auto prof = [](double s) { return [s](double r) { return std::exp(-0.5 * r * r / (s * s)); }; };
    const TransportMap R = solve_radial(mu, nu, prof(sm), prof(sn));
    const TransportMap G = solve_gaussian(mu, nu);
    const PointSet xs = default_probes(R, mu);
    CHECK(l2_gap(R, G, xs) < 1e-6);
    for (const Vec& x : xs) CHECK((R.jacobian(x) - G.jacobian(x)).norm() < 1e-4);
    // A profile that is not radial for the density is refused.
    const Density skew = gaussian(Vec::Zero(2), Eigen::Vector2d(4.0, 1.0).asDiagonal().toDenseMatrix())
                             .with_box(TruncationBox::cube(2, 24));
    CHECK_THROWS(solve_radial(skew, nu, prof(sm), prof(sn)));
}

TEST_CASE("entropic grid map approaches the closed form as epsilon decreases")
{
    const Density mu = gaussian(Vec::Zero(2), 4.0 * Mat::Identity(2, 2));
    const Density nu = gaussian(Vec::Zero(2), Mat::Identity(2, 2));
    const TruncationBox box = TruncationBox::cube(2, 10.0, 64);
    const auto maps = solve_entropic_schedule(mu, nu, box, {1.0, 0.3, 0.1});
    const TransportMap G = solve_gaussian(mu, nu);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& T : maps) {
        CHECK(T.entropic_epsilon);
        CHECK(T.debiased);
        const PointSet xs = default_probes(T, mu);
        const double gap = l2_gap(T, G, xs);
        CHECK(gap < prev);
        prev = gap;
        for (const Vec& x : xs) {
            const Mat J = T.jacobian(x);
            CHECK((J - J.transpose()).norm() < 0.05);
        }
    }
    CHECK(prev < 0.02);
    CHECK_THROWS_AS(solve_entropic_schedule(mu, nu, box, {0.1, 0.3}), InvalidInput);
}

TEST_CASE("sample route: barycentric projection and divergence of a linear map")
{
    const PointSet xs = gaussian_samples(Vec::Zero(2), 4.0 * Mat::Identity(2, 2), 1000, 5);
    const PointSet ys = gaussian_samples(Vec::Zero(2), Mat::Identity(2, 2), 1000, 6);
    SampleOptions so;
    so.tol = 1e-5;
    so.max_iter = 20000;
    const TransportMap T = solve_entropic_sample(xs, ys, 0.05, so);
    CHECK(T.provenance == MapProvenance::entropic_sample);
    CHECK_FALSE(T.has_jacobian());
    double num = 0.0, den = 0.0;
    for (const Vec& x : xs) {
        num += (T.eval(x) - 0.5 * x).squaredNorm();
        den += (0.5 * x).squaredNorm();
    }
    // Sampling error dominates: about 0.12 at 1000 points, shrinking like N^{-1/2}.
    CHECK(std::sqrt(num / den) < 0.15);

    TransportMap L;
    L.dim = 2;
    Mat A(2, 2);
    A << 0.7, 0.2, 0.2, 0.4;
    L.eval = [A](const Vec& x) -> Vec { return A * x; };
    const PointSet fit(xs.begin(), xs.begin() + 20);
    const DivergenceEstimate d = estimate_divergence(L, fit, xs, 12);
    REQUIRE(d.values.size() == fit.size());
    for (double v : d.values) CHECK(v == doctest::Approx(A.trace()).epsilon(1e-10));
    CHECK_THROWS_AS(estimate_divergence(L, fit, xs, 3), InvalidInput);
}

TEST_CASE("Monge-Ampere residual vanishes for the closed form")
{
    gen::for_all(5, 43, [](gen::Gen& g) {
        const Density mu = gaussian(g.vec(2), g.spd(2)), nu = gaussian(g.vec(2), g.spd(2));
        const TransportMap T = solve_gaussian(mu, nu);
        PointSet xs;
        for (int k = 0; k < 20; ++k) xs.push_back(g.vec(2, 2.0));
        const MongeAmpereResidual r = monge_ampere_residual(T, mu, nu, xs);
        CHECK(r.sup_abs_log_residual < 1e-10);
        CHECK(r.per_probe.size() == xs.size());
    });
}

TEST_CASE("lattice text format round-trips bit for bit")
{
    GridLattice g;
    g.dim = 2;
    g.lower = Vec::Constant(2, -1.0 / 3.0);
    g.upper = Vec::Constant(2, 2.0 / 7.0);
    g.shape = {3, 4};
    gen::Gen r(44);
    for (std::size_t i = 0; i < g.node_count() * 2; ++i) g.values.push_back(r.normal());
    std::stringstream ss;
    write_lattice(ss, g);
    const GridLattice h = read_lattice(ss);
    CHECK(h.shape == g.shape);
    CHECK(h.lower == g.lower);
    CHECK(h.upper == g.upper);
    CHECK(h.values == g.values);
    std::stringstream bad("not a lattice");
    CHECK_THROWS(read_lattice(bad));
}
