#include "gen.hpp"
#include "lsot/heatflow.hpp"

using namespace lsot;

namespace {

FlowResult flow_for(const Mat& cov, std::size_t particles, std::uint64_t seed, int record_count = 20)
{
    const int n = static_cast<int>(cov.rows());
    const Density mu = gaussian(Vec::Zero(n), cov);
    FlowSchedule sch;
    sch.record_count = record_count;
    return integrate_flow(SemigroupFunction::relative_to_gaussian(mu), gaussian_samples(Vec::Zero(n), cov, particles, seed),
                          sch);
}

double bound(double t, double alpha, int n) { return std::pow(-std::expm1(-2.0 * t) * (alpha - 1.0) + 1.0, 0.5 * n); }

} // namespace

TEST_CASE("schedule validation")
{
    FlowSchedule s;
    CHECK_NOTHROW(s.validate());
    s.t_max = 2.5;
    CHECK_THROWS_AS(s.validate(), InvalidInput);
    s = FlowSchedule{};
    s.steps = 32;
    CHECK_THROWS_AS(s.validate(), InvalidInput);
    s = FlowSchedule{};
    s.rtol = 0.0;
    CHECK_THROWS_AS(s.validate(), InvalidInput);
    CHECK_THROWS_AS(integrate_flow(SemigroupFunction::relative_to_gaussian(gaussian(Vec::Zero(2), Mat::Identity(2, 2))),
                                   {}, FlowSchedule{}),
                    InvalidInput);
}

TEST_CASE("initial state is the identity")
{
    const FlowResult r = flow_for(0.25 * Mat::Identity(2, 2), 20, 71);
    REQUIRE(!r.states.empty());
    const FlowState& s0 = r.states.front();
    CHECK(s0.t == 0.0);
    const PointSet xs = gaussian_samples(Vec::Zero(2), 0.25 * Mat::Identity(2, 2), 20, 71);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK((s0.positions[i] - xs[i]).norm() == 0.0);
        CHECK((s0.jacobians[i] - Mat::Identity(2, 2)).norm() == 0.0);
        CHECK(s0.log_dets[i] == 0.0);
    }
}

TEST_CASE("Gaussian sources sit on the contraction bound at every time")
{
    gen::for_all(4, 72, [](gen::Gen& g) {
        const int n = g.integer(1, 3);
        const double sigma = std::exp(g.uniform(-1.0, 1.0));
        const double alpha = 1.0 / (sigma * sigma);
        const FlowResult r = flow_for(sigma * sigma * Mat::Identity(n, n), 30, g.integer(1, 1000));
        CHECK(r.max_route_gap <= 1e-6);
        for (const auto& s : r.states)
            for (const Mat& J : s.jacobians)
                CHECK(J.determinant() == doctest::Approx(bound(s.t, alpha, n)).epsilon(1e-7));
        for (const Mat& J : r.terminal.jacobians)
            CHECK(std::abs(J.determinant() - std::pow(alpha, 0.5 * n)) <= 1e-5);
        const KmContraction k = check_km_contraction(r, alpha);
        CHECK(k.per_time.passed());
        CHECK(k.terminal.passed());
    });
}

TEST_CASE("det DF_t moves monotonically toward alpha^{n/2}")
{
    for (double sigma : {2.0, 0.5}) {
        CAPTURE(sigma);
        const FlowResult r = flow_for(sigma * sigma * Mat::Identity(2, 2), 10, 73);
        const double dir = sigma > 1.0 ? -1.0 : 1.0;
        for (std::size_t k = 1; k < r.states.size(); ++k)
            for (std::size_t i = 0; i < r.states[k].jacobians.size(); ++i) {
                const double a = r.states[k - 1].jacobians[i].determinant();
                const double b = r.states[k].jacobians[i].determinant();
                CHECK(dir * (b - a) >= -1e-12);
            }
    }
}

TEST_CASE("anisotropic Gaussian: contraction with alpha the largest precision")
{
    gen::for_all(3, 74, [](gen::Gen& g) {
        const Mat S = g.spd(2, 0.3, 3.0);
        const double alpha = S.inverse().selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
        const FlowResult r = flow_for(S, 30, g.integer(1, 1000));
        const KmContraction k = check_km_contraction(r, alpha);
        CHECK(k.per_time.passed());
        CHECK(k.terminal.passed());
        CHECK(r.max_route_gap <= 1e-6);
    });
}

TEST_CASE("terminal particles are standard Gaussian")
{
    const Density mu = gaussian(Vec::Zero(2), 0.25 * Mat::Identity(2, 2));
    const SemigroupFunction f = SemigroupFunction::relative_to_gaussian(mu);
    const FlowResult r = flow_for(mu.gaussian()->cov, 2000, 75);
    const BoundCertificate c = km_pushforward_check(r, f, 2);
    CHECK(c.passed());
    CHECK_THROWS_AS(km_pushforward_check(r, f, 0), InvalidInput);
    // Starting from the wrong law is detected.
    const FlowResult wrong = integrate_flow(f, gaussian_samples(Vec::Zero(2), Mat::Identity(2, 2), 2000, 75), FlowSchedule{});
    CHECK_FALSE(km_pushforward_check(wrong, f, 2).passed());
}

TEST_CASE("f = 1 leaves the particles in place")
{
    const Density g = gaussian(Vec::Zero(2), Mat::Identity(2, 2));
    const PointSet xs = gaussian_samples(Vec::Zero(2), Mat::Identity(2, 2), 50, 77);
    const FlowResult r = integrate_flow(SemigroupFunction::relative_to_gaussian(g), xs, FlowSchedule{});
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK((r.terminal.positions[i] - xs[i]).norm() < 1e-12);
        CHECK(std::abs(r.terminal.jacobians[i].determinant() - 1.0) < 1e-12);
    }
}

TEST_CASE("sigma = 2 source, 10^4 particles: terminal covariance within 3 standard errors of Id")
{
    const Density mu = gaussian(Vec::Zero(2), 4.0 * Mat::Identity(2, 2));
    const FlowResult r = flow_for(mu.gaussian()->cov, 10000, 78);
    const BoundCertificate c = km_pushforward_check(r, SemigroupFunction::relative_to_gaussian(mu), 2, 3.0);
    CHECK(c.passed());
}

TEST_CASE("rk4 and rk45 agree")
{
    const Density mu = gaussian(Vec::Zero(2), Eigen::Vector2d(0.5, 2.0).asDiagonal().toDenseMatrix());
    const SemigroupFunction f = SemigroupFunction::relative_to_gaussian(mu);
    const PointSet xs = gaussian_samples(Vec::Zero(2), mu.gaussian()->cov, 10, 76);
    FlowSchedule a, b;
    a.stepper = Stepper::rk4;
    a.steps = 512;
    const FlowResult ra = integrate_flow(f, xs, a), rb = integrate_flow(f, xs, b);
    REQUIRE(ra.states.size() == rb.states.size());
    for (std::size_t k = 0; k < ra.states.size(); ++k)
        for (std::size_t i = 0; i < xs.size(); ++i)
            CHECK((ra.states[k].positions[i] - rb.states[k].positions[i]).norm() < 1e-6);
}
