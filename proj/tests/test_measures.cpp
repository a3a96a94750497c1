#include "gen.hpp"
#include "lsot/measures.hpp"
#include "lsot/quadrature.hpp"

using namespace lsot;

TEST_CASE("gaussian: analytic derivatives match finite differences")
{
    gen::for_all(20, 11, [](gen::Gen& g) {
        const int n = g.integer(1, 3);
        const Density d = gaussian(g.vec(n), g.spd(n));
        for (int k = 0; k < 5; ++k) {
            const Vec x = g.vec(n, 1.5);
            const Vec fd = fd_gradient([&](const Vec& y) { return d.log_density(y); }, x);
            const Vec an = d.grad_log(x);
            CHECK((fd - an).norm() <= 1e-5 * (1.0 + an.norm()));
            const Mat fh = fd_hessian([&](const Vec& y) { return d.log_density(y); }, x);
            const Mat ah = d.hess_log(x);
            CHECK((fh - ah).norm() <= 1e-5 * (1.0 + ah.norm()));
        }
    });
}

TEST_CASE("gaussian: quadrature moments over a wide box")
{
    gen::for_all(5, 12, [](gen::Gen& g) {
        const Vec m = g.vec(2, 0.5);
        const Mat S = g.spd(2, 0.3, 2.0);
        const Density d = gaussian(m, S);
        const double sd = std::sqrt(S.eigenvalues().real().maxCoeff());
        const Quadrature q = box_quadrature(TruncationBox{m, Vec::Constant(2, 9.0 * sd), 64}, 24, 8);
        double mass = 0.0;
        Vec mean = Vec::Zero(2);
        Mat cov = Mat::Zero(2, 2);
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double w = q.weights[i] * d.pdf(q.points[i]);
            mass += w;
            mean += w * q.points[i];
            cov += w * (q.points[i] - m) * (q.points[i] - m).transpose();
        }
        CHECK(std::abs(mass - 1.0) < 1e-10);
        CHECK((mean - m).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((cov - S).cwiseAbs().maxCoeff() < 1e-6);
    });
}

TEST_CASE("gaussian: rejects a covariance that is not positive definite")
{
    Mat S(2, 2);
    S << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(gaussian(Vec::Zero(2), S), InvalidInput);
    CHECK_THROWS_AS(ConvexityCertificate::analytic(-1.0, 1.0), InvalidInput);
}

TEST_CASE("gaussian: analytic certificate")
{
    Mat S(2, 2);
    S << 4.0, 0.0, 0.0, 0.25;
    const Density d = gaussian(Vec::Zero(2), S);
    REQUIRE(d.certificate());
    CHECK(*d.certificate()->alpha == doctest::Approx((0.25 + 4.0) / 2.0));
    CHECK(*d.certificate()->kappa == doctest::Approx(0.25));
}

TEST_CASE("sampled certificates: nested refinement only widens the constants")
{
    // log f = -|x|^2/2 + 0.1 sin(x1) x2: the Hessian varies with x, so the grid matters.
    DensityParts p;
    p.dim = 2;
    p.log_density = [](const Vec& x) { return -0.5 * x.squaredNorm() + 0.1 * std::sin(x[0]) * x[1]; };
    p.box = TruncationBox::cube(2, 4.0, 32);
    const Density d = Density::make(p);
    const ConvexityCertificate coarse = estimate_certificate(d, d.box(), 64);
    const ConvexityCertificate fine = estimate_certificate(d, d.box(), 64, 1e-2, 2);
    CHECK(coarse.provenance == CertProvenance::sampled);
    REQUIRE(coarse.alpha);
    REQUIRE(coarse.kappa);
    CHECK(fine.probes.size() > coarse.probes.size());
    CHECK(*fine.alpha >= *coarse.alpha - 1e-9);
    CHECK(*fine.kappa <= *coarse.kappa + 1e-9);
    CHECK(coarse.empirical_alpha <= *coarse.alpha);
    CHECK(coarse.empirical_kappa >= *coarse.kappa);
}

TEST_CASE("reconcile: a sampled violation of an analytic claim is a conflict")
{
    const Density d = gaussian(Vec::Zero(2), Mat::Identity(2, 2));
    const ConvexityCertificate sampled = estimate_certificate(d, TruncationBox::cube(2, 3.0), 64);
    CHECK_NOTHROW(reconcile(ConvexityCertificate::analytic(1.0, 1.0), sampled));
    CHECK_THROWS_AS(reconcile(ConvexityCertificate::analytic(0.5, 1.0), sampled), CertificateConflict);
}

TEST_CASE("normalized_copy integrates to one")
{
    DensityParts p;
    p.dim = 2;
    p.log_density = [](const Vec& x) { return -0.5 * x.squaredNorm() - 0.25 * std::pow(x.squaredNorm(), 2) + 3.0; };
    p.box = TruncationBox::cube(2, 6.0, 32);
    const Density d = Density::make(p).normalized_copy();
    CHECK(d.normalized());
    const Quadrature q = box_quadrature(d.box(), 24, 8);
    CHECK(q.integrate([&](const Vec& x) { return d.pdf(x); }) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("quadrature rules")
{
    const Rule1D gl = gauss_legendre(6);
    double s = 0.0;
    for (std::size_t i = 0; i < gl.x.size(); ++i) s += gl.w[i] * std::pow(gl.x[i], 10);
    CHECK(s == doctest::Approx(2.0 / 11.0).epsilon(1e-13));

    const Rule1D gh = gauss_hermite(10);
    double m0 = 0.0, m2 = 0.0, m4 = 0.0, m6 = 0.0;
    for (std::size_t i = 0; i < gh.x.size(); ++i) {
        m0 += gh.w[i];
        m2 += gh.w[i] * std::pow(gh.x[i], 2);
        m4 += gh.w[i] * std::pow(gh.x[i], 4);
        m6 += gh.w[i] * std::pow(gh.x[i], 6);
    }
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(m6 == doctest::Approx(15.0).epsilon(1e-12));
    CHECK(unit_sphere_area(2) == doctest::Approx(2.0 * M_PI));
    CHECK(unit_sphere_area(3) == doctest::Approx(4.0 * M_PI));
}

TEST_CASE("gaussian_samples are reproducible from the seed")
{
    const PointSet a = gaussian_samples(Vec::Zero(2), Mat::Identity(2, 2), 50, 9);
    const PointSet b = gaussian_samples(Vec::Zero(2), Mat::Identity(2, 2), 50, 9);
    const PointSet c = gaussian_samples(Vec::Zero(2), Mat::Identity(2, 2), 50, 10);
    CHECK(a == b);
    CHECK_FALSE(a == c);
}

TEST_CASE("polynomial: Gaussian smoothing matches Gauss-Hermite averaging")
{
    gen::for_all(10, 13, [](gen::Gen& g) {
        const int n = g.integer(1, 2);
        const Polynomial p = g.polynomial(n, 4);
        const Mat L = g.spd(n, 0.2, 1.5);
        const Polynomial sm = p.gaussian_smooth(L);
        const Quadrature gh = gauss_hermite_tensor(Vec::Zero(n), Mat::Identity(n, n), 8);
        const Vec mu = g.vec(n);
        double ref = 0.0;
        for (std::size_t i = 0; i < gh.size(); ++i) ref += gh.weights[i] * p.eval(mu + L * gh.points[i]);
        CHECK(sm.eval(mu) == doctest::Approx(ref).epsilon(1e-10));
    });
}

TEST_CASE("polynomial: derivatives match finite differences")
{
    gen::for_all(10, 14, [](gen::Gen& g) {
        const Polynomial p = g.polynomial(2, 5);
        const Vec x = g.vec(2);
        const Vec fd = fd_gradient([&](const Vec& y) { return p.eval(y); }, x);
        CHECK((fd - p.grad(x)).norm() <= 1e-6 * (1.0 + p.grad(x).norm()));
        const Mat fh = fd_hessian([&](const Vec& y) { return p.eval(y); }, x);
        CHECK((fh - p.hess(x)).norm() <= 1e-4 * (1.0 + p.hess(x).norm()));
    });
}

TEST_CASE("mixture smoothing: exact against Gauss-Hermite for polynomial-Gaussian terms")
{
    gen::for_all(8, 15, [](gen::Gen& g) {
        const int n = 2;
        // Mixtures model nonnegative functions: square a random polynomial and lift it.
        const Polynomial r = g.polynomial(n, 2);
        const PolyGaussianTerm term{r * r + Polynomial::constant(n, 0.1), g.spd(n, 0.3, 2.0), g.vec(n, 0.3), 0.0};
        const PolyGaussianMixture f({term});
        const double s = g.uniform(0.1, 1.0);
        const PolyGaussianMixture sm = gaussian_smooth(f, s);
        const Quadrature gh = gauss_hermite_tensor(Vec::Zero(n), std::sqrt(s) * Mat::Identity(n, n), 40);
        const Vec z = g.vec(n, 0.7);
        double ref = 0.0;
        for (std::size_t i = 0; i < gh.size(); ++i) ref += gh.weights[i] * f.value(z + gh.points[i]);
        CHECK(sm.value(z) == doctest::Approx(ref).epsilon(1e-9));
    });
}

TEST_CASE("mixture smoothing: refuses an indefinite I + sA")
{
    Mat A(2, 2);
    A << 0.0, -1.0, -1.0, 0.0;
    const PolyGaussianMixture f = PolyGaussianMixture::quadratic_exponent(A, Vec::Zero(2), 0.0);
    CHECK_NOTHROW(gaussian_smooth(f, 0.5));
    CHECK_THROWS_AS(gaussian_smooth(f, 1.5), InvalidInput);
}
