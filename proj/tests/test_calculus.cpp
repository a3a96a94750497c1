#include "gen.hpp"
#include "lsot/calculus.hpp"

using namespace lsot;

namespace {

Mat second_moment(const SphereRule& r)
{
    Mat m = Mat::Zero(r.dim, r.dim);
    for (std::size_t i = 0; i < r.nodes.size(); ++i) m += r.weights[i] * r.nodes[i] * r.nodes[i].transpose();
    return m;
}

} // namespace

TEST_CASE("sphere rules: second moments are Id / n, nodes closed under reflection")
{
    for (int n : {1, 2}) {
        const SphereRule r = sphere_rule(n);
        CHECK((second_moment(r) - Mat::Identity(n, n) / n).cwiseAbs().maxCoeff() < 1e-10);
        for (const Vec& y : r.nodes) {
            bool found = false;
            for (const Vec& z : r.nodes) found = found || (y + z).norm() < 1e-12;
            CHECK(found);
        }
    }
    // Random orthonormal frames with antipodes: the identity holds per frame.
    const SphereRule r3 = sphere_rule(3, 16, 5);
    CHECK(r3.kind == SphereKind::randomized_orthogonal_nd);
    CHECK((second_moment(r3) - Mat::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Delta_eps of |x|^2/2 is eps^2/2")
{
    for (int n : {1, 2}) {
        const SphereRule r = sphere_rule(n);
        const ScalarField f = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
        gen::for_all(10, 31, [&](gen::Gen& g) {
            const double eps = g.uniform(0.01, 2.0);
            CHECK(delta_epsilon(f, g.vec(n, 3.0), eps, r) == doctest::Approx(0.5 * eps * eps).epsilon(1e-12));
        });
    }
}

TEST_CASE("Delta_eps is linear and blind to affine terms")
{
    const SphereRule r = sphere_rule(2);
    gen::for_all(20, 32, [&](gen::Gen& g) {
        const Polynomial p = g.polynomial(2, 4), q = g.polynomial(2, 3);
        const double a = g.uniform(-2.0, 2.0), b = g.uniform(-2.0, 2.0);
        const Vec lin = g.vec(2);
        const double c0 = g.normal();
        const Vec x = g.vec(2);
        const double eps = g.uniform(0.05, 1.0);
        const ScalarField fp = [&](const Vec& y) { return p.eval(y); };
        const ScalarField fq = [&](const Vec& y) { return q.eval(y); };
        const ScalarField comb = [&](const Vec& y) { return a * p.eval(y) + b * q.eval(y); };
        const ScalarField shifted = [&](const Vec& y) { return p.eval(y) + lin.dot(y) + c0; };
        const double dp = delta_epsilon(fp, x, eps, r), dq = delta_epsilon(fq, x, eps, r);
        CHECK(delta_epsilon(comb, x, eps, r) == doctest::Approx(a * dp + b * dq).epsilon(1e-9));
        CHECK(delta_epsilon(shifted, x, eps, r) == doctest::Approx(dp).epsilon(1e-9));
    });
}

TEST_CASE("Delta_eps / eps^2 converges to Lap f / 2n at second order")
{
    const ScalarField f = [](const Vec& x) { return std::sin(x[0]) * std::cos(x[1]) + std::pow(x[0], 4) / 12.0; };
    Vec x(2);
    x << 0.3, -0.2;
    const double lap = -2.0 * std::sin(x[0]) * std::cos(x[1]) + x[0] * x[0];
    const DeltaLimitReport r = delta_epsilon_limit_check(f, lap, x, {0.2, 0.1, 0.05, 0.025}, sphere_rule(2));
    CHECK(r.order >= 1.9);
    CHECK_FALSE(r.non_monotone);
    CHECK(r.certificate.passed());
}

TEST_CASE("Delta_eps bound for concave quadratics")
{
    gen::for_all(5, 33, [](gen::Gen& g) {
        const int n = 2;
        const Mat A = g.spd(n, 0.1, 3.0);
        const Vec b = g.vec(n);
        const double ell = -A.trace();
        const ScalarField f = [&](const Vec& y) { return -0.5 * y.dot(A * y) + b.dot(y); };
        PointSet xs;
        std::vector<double> eps;
        for (int k = 0; k < 10; ++k) {
            xs.push_back(g.vec(n, 2.0));
            eps.push_back(g.uniform(0.01, 1.0));
        }
        const BoundCertificate c = check_delta_epsilon_bound(f, ell, xs, eps, sphere_rule(n));
        CHECK(c.passed());
    });
}

TEST_CASE("AM-GM on symmetric PSD Jacobians")
{
    gen::for_all(50, 34, [](gen::Gen& g) {
        const int n = g.integer(1, 4);
        const MapStatistics s = matrix_statistics(g.spd(n, 0.05, 5.0));
        CHECK(s.trace_jacobian >= n * std::pow(s.det_jacobian, 1.0 / n) - 1e-12);
        CHECK(s.min_eigenvalue > 0.0);
        CHECK(s.asymmetry < 1e-12);
        CHECK(s.op_norm <= s.trace_jacobian + 1e-12);
    });
}
