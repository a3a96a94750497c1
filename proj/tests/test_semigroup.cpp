#include "gen.hpp"
#include "lsot/semigroup.hpp"

using namespace lsot;

namespace {

SemigroupFunction random_mixture(gen::Gen& g, int n)
{
    const Polynomial r = g.polynomial(n, 2);
    const PolyGaussianTerm term{r * r + Polynomial::constant(n, 0.2), g.spd(n, 0.3, 1.5), g.vec(n, 0.3), 0.0};
    return SemigroupFunction::from_mixture(PolyGaussianMixture({term}), "random");
}

} // namespace

TEST_CASE("semigroup property on random (s, t, x)")
{
    gen::for_all(12, 21, [](gen::Gen& g) {
        const SemigroupFunction f = random_mixture(g, 2);
        const double s = g.uniform(0.05, 1.0), t = g.uniform(0.05, 1.0);
        const Vec x = g.vec(2);
        for (auto kind : {SemigroupKind::ornstein_uhlenbeck, SemigroupKind::heat}) {
            const PreparedSemigroup Ps(kind, *f.closed_form, s);
            const SemigroupFunction ps = SemigroupFunction::from_mixture(Ps.mixture(), "P_s f");
            const double direct = apply(kind, f, s + t, x).value;
            CHECK(apply(kind, ps, t, x).value == doctest::Approx(direct).epsilon(1e-10));
            // Same identity with the outer step by quadrature.
            ApplyOptions quad;
            quad.allow_closed_form = false;
            CHECK(apply(kind, ps, t, x, quad).value == doctest::Approx(direct).epsilon(1e-7));
        }
    });
}

TEST_CASE("Ornstein-Uhlenbeck preserves the Gaussian integral")
{
    gen::for_all(6, 22, [](gen::Gen& g) {
        const SemigroupFunction f = random_mixture(g, 2);
        const double t = g.uniform(0.05, 2.0);
        const Quadrature gh = gauss_hermite_tensor(Vec::Zero(2), Mat::Identity(2, 2), 40);
        const PreparedSemigroup P(SemigroupKind::ornstein_uhlenbeck, *f.closed_form, t);
        double before = 0.0, after = 0.0;
        for (std::size_t i = 0; i < gh.size(); ++i) {
            before += gh.weights[i] * f.value(gh.points[i]);
            after += gh.weights[i] * P.eval(gh.points[i], false).value;
        }
        CHECK(after == doctest::Approx(before).epsilon(1e-9));
    });
}

TEST_CASE("closed-form and quadrature routes agree")
{
    gen::for_all(6, 23, [](gen::Gen& g) {
        const SemigroupFunction f = random_mixture(g, 2);
        const double t = g.uniform(0.1, 1.5);
        const Vec x = g.vec(2);
        ApplyOptions quad;
        quad.allow_closed_form = false;
        for (auto kind : {SemigroupKind::ornstein_uhlenbeck, SemigroupKind::heat}) {
            const SemigroupEvaluation a = apply(kind, f, t, x);
            const SemigroupEvaluation b = apply(kind, f, t, x, quad);
            CHECK(a.method == EvalMethod::closed_form_quadratic);
            CHECK(b.method == EvalMethod::gauss_hermite);
            CHECK(b.value == doctest::Approx(a.value).epsilon(1e-8));
            CHECK((a.grad_log - b.grad_log).norm() < 1e-6);
            CHECK((a.hess_log - b.hess_log).norm() < 1e-5);
            CHECK(a.value > 0.0);
            CHECK((a.hess_log - a.hess_log.transpose()).norm() < 1e-10);
        }
    });
}

TEST_CASE("Gaussian inputs have closed-form log-Hessians")
{
    for (double beta : {0.5, 1.0, 3.0}) {
        const SemigroupFunction f =
            SemigroupFunction::quadratic_exponent(beta * Mat::Identity(2, 2), Vec::Zero(2), 0.0, "g");
        for (double t : {0.1, 0.7, 2.0}) {
            const Vec x = Vec::Constant(2, 0.4);
            const double heat = -beta / (1.0 + beta * t);
            CHECK((apply(SemigroupKind::heat, f, t, x).hess_log - heat * Mat::Identity(2, 2)).norm() < 1e-12);
            const double s = -std::expm1(-2.0 * t);
            const double ou = -beta * std::exp(-2.0 * t) / (1.0 + beta * s);
            CHECK((apply(SemigroupKind::ornstein_uhlenbeck, f, t, x).hess_log - ou * Mat::Identity(2, 2)).norm() <
                  1e-12);
        }
    }
}

TEST_CASE("smoothing bounds hold on random mixtures")
{
    // Unconditional lower bound needs nothing of f; random mixtures exercise it broadly.
    gen::for_all(6, 24, [](gen::Gen& g) {
        const SemigroupFunction f = random_mixture(g, 2);
        PointSet xs;
        for (int k = 0; k < 20; ++k) xs.push_back(g.vec(2, 1.5));
        for (auto kind : {SemigroupKind::ornstein_uhlenbeck, SemigroupKind::heat}) {
            const BoundCertificate c =
                check_smoothing_bounds(kind, f, 0.0, SmoothingClass::unconditional, g.uniform(0.1, 2.0), xs);
            CHECK(c.passed());
            CHECK(c.margin() >= -1e-8);
        }
    });
}

TEST_CASE("the log-concave window is enforced")
{
    const SemigroupFunction f = SemigroupFunction::quadratic_exponent(-2.0 * Mat::Identity(2, 2), Vec::Zero(2), 0.0,
                                                                      "e^{|x|^2}");
    const PointSet xs{Vec::Zero(2)};
    const double w = log_concave_window(SemigroupKind::ornstein_uhlenbeck, 2.0);
    CHECK(w == doctest::Approx(std::log(std::sqrt(2.0))));
    CHECK_NOTHROW(check_smoothing_bounds(SemigroupKind::ornstein_uhlenbeck, f, 2.0, SmoothingClass::log_concave,
                                         0.9 * w, xs));
    CHECK_THROWS_AS(check_smoothing_bounds(SemigroupKind::ornstein_uhlenbeck, f, 2.0, SmoothingClass::log_concave,
                                           1.1 * w, xs),
                    InvalidInput);
    CHECK_THROWS_AS(check_smoothing_bounds(SemigroupKind::heat, f, 1.0, SmoothingClass::log_convex, 0.1, xs),
                    InvalidInput);
    CHECK(std::isinf(log_concave_window(SemigroupKind::ornstein_uhlenbeck, 1.0)));
}

TEST_CASE("mollified kappa")
{
    gen::for_all(20, 25, [](gen::Gen& g) {
        const double kappa = std::exp(g.uniform(-2.0, 2.0));
        const int k = g.integer(1, 200);
        const double e = std::exp(-2.0 / k);
        const double kk = mollified_kappa(kappa, k);
        CHECK(kk == doctest::Approx(kappa * e / (1.0 + kappa * (1.0 - e))).epsilon(1e-14));
        CHECK(kk < kappa);
        CHECK(mollified_kappa(kappa, k + 1) > kk);
    });
    CHECK(mollified_kappa(2.0, 1000000) == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("mollify: target Hessian lower bound equals kappa_k for a Gaussian target")
{
    const Density mu = gaussian(Vec::Zero(2), 2.0 * Mat::Identity(2, 2));
    const Density nu = gaussian(Vec::Zero(2), 0.5 * Mat::Identity(2, 2));
    for (int k : {2, 5, 20}) {
        const MollifiedPair m = mollify(mu, nu, 0.5, 2.0, k);
        const Mat H = -m.target_k.hess_log(Vec::Constant(2, 0.3));
        CHECK(H.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() ==
              doctest::Approx(m.kappa_k).epsilon(1e-8));
    }
}

TEST_CASE("covariance identity")
{
    Mat H(2, 2);
    H << 0.0, -1.0, -1.0, 0.0;
    const SemigroupFunction f = SemigroupFunction::quadratic_exponent(H, Vec::Zero(2), 0.0, "e^{x1 x2}");
    const BoundCertificate c = covariance_identity_check(f, 0.5, Vec::Constant(2, 0.3), 1 << 14);
    CHECK(c.passed());
}
