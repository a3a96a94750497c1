#include "gen.hpp"
#include "lsot/scenarios.hpp"

using namespace lsot;

namespace {

ComplexPolynomial cpoly(std::vector<std::pair<int, std::complex<double>>> terms)
{
    ComplexPolynomial f;
    f.d = 1;
    for (auto& [k, c] : terms) f.coefficients.push_back({{k}, c});
    return f;
}

} // namespace

TEST_CASE("Fock norm: closed form at p = 2 against polar quadrature")
{
    gen::for_all(10, 81, [](gen::Gen& g) {
        std::vector<std::pair<int, std::complex<double>>> terms;
        const int deg = g.integer(0, 4);
        for (int k = 0; k <= deg; ++k) terms.push_back({k, {g.uniform(-1.0, 1.0), g.uniform(-1.0, 1.0)}});
        const ComplexPolynomial f = cpoly(terms);
        const double sigma = g.uniform(0.5, 2.0);
        const double exact = fock_norm(f, 2.0, sigma);
        const double s = sigma / 2.0;
        const Quadrature q = polar_quadrature(Vec::Zero(2), std::sqrt(s * 100.0), 64, 8, 64);
        double sum = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const Vec& x = q.points[i];
            const std::complex<double> z(x[0], x[1]);
            std::complex<double> v = 0.0;
            for (const auto& [k, c] : terms) v += c * std::pow(z, k);
            sum += q.weights[i] * std::norm(v) * std::exp(-0.5 * x.squaredNorm() / s) / (2.0 * M_PI * s);
        }
        CHECK(exact == doctest::Approx(std::sqrt(sum)).epsilon(1e-10));
        // The general-p quadrature route is continuous through p = 2.
        CHECK(fock_norm(f, 2.0 + 1e-9, sigma) == doctest::Approx(exact).epsilon(1e-7));
    });
    CHECK_THROWS_AS(fock_norm(cpoly({{1, 1.0}}), 0.5, 1.0), InvalidInput);
}

TEST_CASE("Fock instances are normalized and satisfy the growth bound")
{
    const auto zs = complex_probes(1000, 6.0, 82);
    for (const FockInstance& inst : builtin_fock_instances()) {
        CAPTURE(inst.name);
        CHECK(fock_norm(inst.f, inst.p, inst.sigma) == doctest::Approx(1.0).epsilon(1e-8));
        const BoundCertificate c = fock_growth_check(inst, zs);
        CHECK(c.passed());
        CHECK(c.margin() >= 0.0);
        CHECK(*inst.certificate.alpha == doctest::Approx(inst.p / inst.sigma));
    }
    CHECK_THROWS_AS(build_fock_instance(2.0, 1.0, ComplexPolynomial{}), InvalidInput);
}

TEST_CASE("log-subharmonic instances: normalization against gamma and growth")
{
    const auto lsh = builtin_lsh_instances();
    CHECK(lsh.size() == 5);
    for (const LshInstance& inst : lsh) {
        CAPTURE(inst.name);
        const Quadrature gh = gauss_hermite_tensor(Vec::Zero(inst.n), Mat::Identity(inst.n, inst.n), inst.n > 2 ? 24 : 60);
        double mass = 0.0;
        for (std::size_t i = 0; i < gh.size(); ++i) mass += gh.weights[i] * std::exp(inst.log_f(gh.points[i]));
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
        const BoundCertificate c = lsh_growth_check(inst, ball_probes(inst.n, 1000, 5.0, 83));
        CHECK(c.passed());
        CHECK(*inst.certificate.alpha == doctest::Approx(inst.beta + 1.0));
    }
    CHECK_THROWS_AS(build_lsh_instance(LshKind::radial_square, 1, 0.0), InvalidInput);
    CHECK_THROWS_AS(build_lsh_instance(LshKind::gaussian_ratio, 2, 1.5), InvalidInput);
    CHECK_THROWS_AS(build_lsh_instance(LshKind::hyperbolic, 2, 1.0), InvalidInput);
}

TEST_CASE("Husimi densities: unit mass and values at most one")
{
    for (const WehrlState& s : {WehrlState::fock(0), WehrlState::fock(1), WehrlState::fock(3),
                                WehrlState::fock_mixture({0.5, 0.5}), WehrlState::fock_mixture({0.2, 0.3, 0.5})}) {
        const WehrlInstance w = build_wehrl_instance(s);
        const Quadrature q = box_quadrature(wehrl_box(w), 48, 8);
        double mass = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) mass += q.weights[i] * w.mu.pdf(q.points[i]);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(w.probe_sup <= 1.0);
        CHECK(w.profile_mu.has_value());
        CHECK(*w.certificate.alpha == doctest::Approx(2.0 * M_PI));
    }
    // Glauber state: H = -1 exactly.
    const WehrlInstance g = build_wehrl_instance(WehrlState::fock(0));
    const Quadrature q = box_quadrature(wehrl_box(g), 48, 8);
    double h = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double v = g.mu.pdf(q.points[i]);
        if (v > 0.0) h -= q.weights[i] * v * std::log(v);
    }
    CHECK(h == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("Husimi construction rejects bad states")
{
    WehrlState overlap = WehrlState::fock(1);
    overlap.components.push_back({1.0, cpoly({{1, 1.0}, {0, 0.5}})});
    CHECK_THROWS_AS(build_wehrl_instance(overlap), InvalidInput);
    CHECK_THROWS_AS(build_wehrl_instance(WehrlState::fock_mixture({-0.5, 1.5})), InvalidInput);
    CHECK_THROWS_AS(build_wehrl_instance(WehrlState::fock_mixture({0.0, 0.0})), InvalidInput);
    CHECK_THROWS_AS(WehrlState::fock(-1), InvalidInput);
    WehrlState off = WehrlState::fock(1);
    off.center = Vec::Zero(3);
    CHECK_THROWS_AS(build_wehrl_instance(off), InvalidInput);
}

TEST_CASE("Coulomb gas: exchangeable, dimension 2N, parameter window")
{
    for (int N : {1, 2, 3}) {
        CoulombSpec spec;
        spec.N = N;
        const CoulombInstance inst = build_coulomb_instance(spec);
        CHECK(inst.mu.dim() == 2 * N);
        CHECK(*inst.certificate.alpha == doctest::Approx(spec.kappa2 * spec.beta * N));
        if (N < 2) continue;
        gen::for_all(10, 84, [&](gen::Gen& g) {
            const Vec x = g.vec(2 * N, 1.5);
            Vec y = x;
            y.segment(0, 2).swap(y.segment(2, 2));
            CHECK(inst.mu.normalized_log_density(y) == doctest::Approx(inst.mu.normalized_log_density(x)).epsilon(1e-12));
        });
    }
    CoulombSpec bad;
    bad.kappa2 = 0.0;
    CHECK_THROWS_AS(build_coulomb_instance(bad), InvalidInput);
    bad.kappa2 = 1.5;
    CHECK_THROWS_AS(build_coulomb_instance(bad), InvalidInput);
    bad = CoulombSpec{};
    bad.q_coeffs = {0.5, -0.1};
    CHECK_THROWS_AS(build_coulomb_instance(bad), InvalidInput);
}

TEST_CASE("Metropolis recovers Gaussian moments")
{
    Mat S(2, 2);
    S << 1.0, 0.3, 0.3, 0.5;
    const Density d = gaussian(Vec::Zero(2), S);
    const SampleSet s = metropolis(d, 8000, 1.0, 2000, 4, 5, 85);
    CHECK(s.converged());
    CHECK(s.points.size() == 8000);
    Mat m = Mat::Zero(2, 2);
    for (const Vec& x : s.points) m += x * x.transpose();
    m /= static_cast<double>(s.points.size());
    CHECK((m - S).cwiseAbs().maxCoeff() < 0.08);
    const SampleSet again = metropolis(d, 8000, 1.0, 2000, 4, 5, 85);
    CHECK(again.points == s.points);
    CHECK_THROWS_AS(metropolis(d, 0, 1.0, 10, 1, 1, 1), InvalidInput);
}
