#include "lsot/run.hpp"

#include "lsot/brenier.hpp"
#include "lsot/calculus.hpp"
#include "lsot/heatflow.hpp"
#include "lsot/majorize.hpp"
#include "lsot/scenarios.hpp"
#include "lsot/semigroup.hpp"
#include "lsot/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <sstream>

namespace lsot {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- plumbing -----------------------------------------------------------

template <class T>
class Lazy {
public:
    explicit Lazy(std::function<T()> make) : make_(std::move(make)) {}
    const T& get()
    {
        if (!done_) {
            done_ = true;
            try {
                value_.emplace(make_());
            } catch (...) {
                error_ = std::current_exception();
            }
        }
        if (error_) std::rethrow_exception(error_);
        return *value_;
    }

private:
    std::function<T()> make_;
    std::optional<T> value_;
    std::exception_ptr error_;
    bool done_ = false;
};

template <class T>
std::shared_ptr<Lazy<T>> lazy(std::function<T()> f)
{
    return std::make_shared<Lazy<T>>(std::move(f));
}

struct CheckOutput {
    std::vector<BoundCertificate> certificates;
    std::vector<json> entropy;
};

struct Check {
    std::string name;
    std::function<CheckOutput()> fn;
};

using SuiteFactory = std::function<std::vector<Check>(const RunConfig&)>;

struct SuiteDef {
    std::vector<std::string> solvers;  // first is the default
    std::vector<double> default_epsilons;
    SuiteFactory make;
};

double par(const RunConfig& c, const char* key, double def)
{
    return c.parameters.contains(key) ? c.parameters.at(key).get<double>() : def;
}

int pari(const RunConfig& c, const char* key, int def)
{
    return c.parameters.contains(key) ? c.parameters.at(key).get<int>() : def;
}

std::string solver_of(const RunConfig& c, const SuiteDef& s)
{
    for (const auto& name : c.solvers)
        if (std::find(s.solvers.begin(), s.solvers.end(), name) != s.solvers.end()) return name;
    return s.solvers.front();
}

std::vector<double> schedule_of(const RunConfig& c, const SuiteDef& s)
{
    return c.epsilons.empty() ? s.default_epsilons : c.epsilons;
}

BoundCertificate make_cert(BoundName name, std::string label, double observed, double rhs, Relation rel, double tol,
                           std::string provenance, std::size_t probes, std::uint64_t seed)
{
    BoundCertificate c;
    c.bound_name = name;
    c.label = std::move(label);
    c.observed = observed;
    c.theoretical_rhs = rhs;
    c.relation = rel;
    c.tolerance = tol;
    c.provenance = std::move(provenance);
    c.probe_count = probes;
    c.seed = seed;
    decide(c);
    return c;
}

CheckOutput one(BoundCertificate c) { return CheckOutput{{std::move(c)}, {}}; }

// One certificate for an exact map; the epsilon trend for an entropic schedule.
CheckOutput over_maps(const std::vector<TransportMap>& maps, const std::function<BoundCertificate(const TransportMap&)>& f)
{
    if (maps.empty()) throw InvalidInput("no maps to check");
    if (!is_entropic(maps.front().provenance)) return one(f(maps.front()));
    std::vector<BoundCertificate> per;
    for (const auto& T : maps) per.push_back(f(T));
    return one(with_trend(per));
}

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

std::string shortest(double v)
{
    return json(v).dump();
}

// Entropic schedule with an optional on-disk lattice cache keyed by scenario, grid and epsilon.
std::vector<TransportMap> cached_schedule(const RunConfig& cfg, const Density& mu, const Density& nu,
                                          const TruncationBox& box, const std::vector<double>& eps,
                                          const EntropicOptions& opt)
{
    if (cfg.cache_dir.empty()) return solve_entropic_schedule(mu, nu, box, eps, opt);
    std::ostringstream key;
    key << cfg.scenario << '|' << cfg.parameters.dump() << '|' << box.grid_points_per_axis << '|' << opt.debias
        << '|' << opt.tol;
    for (int i = 0; i < box.dim(); ++i) key << '|' << shortest(box.center[i]) << ',' << shortest(box.half_widths[i]);
    std::string schedule_key = key.str();
    for (double e : eps) schedule_key += '|' + shortest(e);

    std::vector<fs::path> files;
    for (double e : eps)
        files.push_back(fs::path(cfg.cache_dir) / ("lattice-" + hex(fnv1a(schedule_key + "@" + shortest(e))) + ".txt"));
    bool all = true;
    for (const auto& f : files) all = all && fs::exists(f);
    if (all) {
        std::vector<TransportMap> maps;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            std::ifstream is(files[i]);
            TransportMap T = map_from_lattice(read_lattice(is), MapProvenance::entropic_grid, eps[i]);
            T.debiased = opt.debias;
            T.note = "loaded from cache";
            maps.push_back(std::move(T));
        }
        return maps;
    }
    std::vector<TransportMap> maps = solve_entropic_schedule(mu, nu, box, eps, opt);
    fs::create_directories(cfg.cache_dir);
    for (std::size_t i = 0; i < maps.size(); ++i) {
        std::ofstream os(files[i]);
        write_lattice(os, *maps[i].grid);
        if (!os) throw Error("cache: cannot write " + files[i].string());
    }
    // Round-trip through the text format so fresh and cached runs see identical lattices.
    std::vector<TransportMap> out;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        std::ifstream is(files[i]);
        TransportMap T = map_from_lattice(read_lattice(is), MapProvenance::entropic_grid, eps[i]);
        T.debiased = maps[i].debiased;
        T.note = maps[i].note;
        out.push_back(std::move(T));
    }
    return out;
}

PointSet probes_for(const TransportMap& T, const Density& mu, const RunConfig& cfg)
{
    ProbeOptions po;
    po.seed = cfg.seed;
    po.random = cfg.probe_count;
    return default_probes(T, mu, po);
}

// Relative L2(mu) distance between two maps over lattice-interior or quadrature points.
double relative_l2(const TransportMap& T, const TransportMap& R, const Density& mu, const PointSet& pts)
{
    double num = 0.0, den = 0.0;
    for (const Vec& x : pts) {
        const double w = mu.pdf(x);
        const Vec r = R.eval(x);
        num += w * (T.eval(x) - r).squaredNorm();
        den += w * r.squaredNorm();
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// ---- gaussian pair -----------------------------------------------------

struct GaussianState {
    Density mu, nu;
    ConvexityCertificate cert;
    TruncationBox box;
    TransportMap reference;
    std::vector<TransportMap> maps;
    Quadrature q;
};

std::vector<Check> gaussian_suite(const RunConfig& cfg, const SuiteDef& def)
{
    const int n = pari(cfg, "n", 2);
    const double sm = par(cfg, "sigma_mu", 2.0);
    const double sn = par(cfg, "sigma_nu", 1.0);
    const std::string solver = solver_of(cfg, def);
    const std::vector<double> eps = schedule_of(cfg, def);
    const int grid = pari(cfg, "grid", 128);
    // Grids need resolution; table-based solvers need the truncated tail mass to be negligible.
    const double half = par(cfg, "half_width", (solver == "entropic_grid" ? 5.0 : 12.0) * std::max(sm, sn));

    auto st = lazy<GaussianState>([=]() {
        GaussianState s;
        s.box = TruncationBox::cube(n, half, grid);
        s.mu = gaussian(Vec::Zero(n), sm * sm * Mat::Identity(n, n)).with_box(s.box);
        s.nu = gaussian(Vec::Zero(n), sn * sn * Mat::Identity(n, n)).with_box(s.box);
        s.cert = pair_certificate(s.mu, s.nu);
        s.reference = solve_gaussian(s.mu, s.nu);
        if (solver == "closed_form_gaussian") {
            s.maps = {s.reference};
        } else if (solver == "quantile_1d") {
            if (n != 1) throw InvalidInput("quantile_1d solver needs n = 1");
            s.maps = {solve_quantile_1d(s.mu, s.nu)};
        } else if (solver == "radial") {
            const double a = 0.5 / (sm * sm), b = 0.5 / (sn * sn);
            s.maps = {solve_radial(s.mu, s.nu, [a](double r) { return std::exp(-a * r * r); },
                                   [b](double r) { return std::exp(-b * r * r); })};
        } else {
            if (n > 2) throw InvalidInput("entropic_grid solver needs n <= 2");
            s.maps = cached_schedule(cfg, s.mu, s.nu, s.box, eps, {});
        }
        s.q = box_quadrature(TruncationBox::cube(n, 10.0 * sm), n == 1 ? 64 : 24, 8);
        return s;
    });
    const std::uint64_t seed = cfg.seed;

    std::vector<Check> checks;
    checks.push_back({"trace", [=]() {
                          const auto& s = st->get();
                          return over_maps(s.maps, [&](const TransportMap& T) {
                              return check_trace_bound(T, s.cert, probes_for(T, s.mu, cfg));
                          });
                      }});
    checks.push_back({"lipschitz", [=]() {
                          const auto& s = st->get();
                          return over_maps(s.maps, [&](const TransportMap& T) {
                              return check_lipschitz_bound(T, s.cert, probes_for(T, s.mu, cfg));
                          });
                      }});
    checks.push_back({"determinant", [=]() {
                          const auto& s = st->get();
                          return over_maps(s.maps, [&](const TransportMap& T) {
                              return check_determinant_bound(T, s.cert, probes_for(T, s.mu, cfg));
                          });
                      }});
    checks.push_back({"lp_chain", [=]() {
                          const auto& s = st->get();
                          const TransportMap& T = s.maps.back();
                          CheckOutput out;
                          if (is_entropic(T.provenance)) {
                              BoundCertificate c = make_cert(BoundName::lp_moment, "L^p chain", 0.0, 0.0,
                                                             Relation::at_most, 0.0, to_string(T.provenance), 0, seed);
                              c.verdict = Verdict::inconclusive;
                              c.notes.push_back("moment chain is evaluated on exact maps only");
                              out.certificates.push_back(c);
                              return out;
                          }
                          out.certificates = check_lp_chain(T, s.cert, s.mu, s.q);
                          return out;
                      }});
    checks.push_back({"pushforward", [=]() {
                          const auto& s = st->get();
                          return over_maps(s.maps, [&](const TransportMap& T) {
                              const double tol = is_entropic(T.provenance) ? 0.05 : 1e-8;
                              return check_pushforward_moments(T, s.mu, *s.nu.gaussian(), s.q, tol);
                          });
                      }});
    checks.push_back({"cyclical_monotonicity", [=]() {
                          const auto& s = st->get();
                          return over_maps(s.maps, [&](const TransportMap& T) {
                              const double tol = is_entropic(T.provenance) ? 1e-6 : 1e-10;
                              return check_cyclical_monotonicity(T, probes_for(T, s.mu, cfg), 1000, seed, tol);
                          });
                      }});
    checks.push_back({"monge_ampere", [=]() {
                          const auto& s = st->get();
                          return over_maps(s.maps, [&](const TransportMap& T) {
                              const double tol = is_entropic(T.provenance) ? 0.05 : 1e-8;
                              return check_monge_ampere(T, s.mu, s.nu, probes_for(T, s.mu, cfg), tol);
                          });
                      }});
    checks.push_back({"method_agreement", [=]() {
                          const auto& s = st->get();
                          // The reference is the closed form; a closed-form primary is compared with the radial solve.
                          TransportMap ref = s.reference;
                          std::vector<TransportMap> maps = s.maps;
                          if (s.maps.front().provenance == MapProvenance::closed_form_gaussian) {
                              const double a = 0.5 / (sm * sm), b = 0.5 / (sn * sn);
                              maps = {solve_radial(s.mu, s.nu, [a](double r) { return std::exp(-a * r * r); },
                                                   [b](double r) { return std::exp(-b * r * r); })};
                          }
                          return over_maps(maps, [&](const TransportMap& T) {
                              const bool ent = is_entropic(T.provenance);
                              const PointSet pts = T.grid ? interior_nodes(*T.grid, 1) : s.q.points;
                              BoundCertificate c;
                              c.bound_name = BoundName::method_agreement;
                              c.label = "relative L2(mu) distance to the closed-form map";
                              c.observed = relative_l2(T, ref, s.mu, pts);
                              c.theoretical_rhs = ent ? 0.02 : 1e-6;
                              c.relation = Relation::at_most;
                              c.provenance = std::string(to_string(T.provenance)) + " vs closed_form_gaussian";
                              c.epsilon = T.entropic_epsilon;
                              c.probe_count = pts.size();
                              c.seed = seed;
                              decide(c, VerdictPolicy{ent});
                              return c;
                          });
                      }});
    return checks;
}

// ---- anisotropic Gaussian family ---------------------------------------

std::vector<Check> anisotropic_suite(const RunConfig& cfg, const SuiteDef& def)
{
    const int n = pari(cfg, "n", 2);
    const std::vector<double> eps = schedule_of(cfg, def);
    const std::uint64_t seed = cfg.seed;
    // mu = N(0, Sigma_eps), Sigma_eps = diag(1/n, 1/eps, ...), nu = N(0, Id); map Sigma_eps^{-1/2}.
    auto pair = [n](double e) {
        Vec d = Vec::Constant(n, 1.0 / e);
        d[0] = 1.0 / n;
        const Density mu = gaussian(Vec::Zero(n), Mat(d.asDiagonal()));
        const Density nu = gaussian(Vec::Zero(n), Mat::Identity(n, n));
        return std::make_pair(mu, nu);
    };
    std::vector<Check> checks;
    checks.push_back({"lipschitz_gap", [=]() {
                          CheckOutput out;
                          BoundCertificate summary;
                          double worst_increase = -std::numeric_limits<double>::infinity();
                          double prev = std::numeric_limits<double>::quiet_NaN();
                          for (double e : eps) {
                              const auto [mu, nu] = pair(e);
                              const TransportMap T = solve_gaussian(mu, nu);
                              ProbeOptions po;
                              po.seed = seed;
                              po.random = cfg.probe_count;
                              BoundCertificate c = check_lipschitz_bound(T, pair_certificate(mu, nu),
                                                                         sample_density(mu, cfg.probe_count, seed));
                              c.label += " eps=" + shortest(e);
                              c.seed = seed;
                              const double gap = std::abs(c.theoretical_rhs - c.observed);
                              summary.series.push_back({"gap", e, gap});
                              summary.series.push_back({"observed", e, c.observed});
                              summary.series.push_back({"rhs", e, c.theoretical_rhs});
                              if (!std::isnan(prev)) worst_increase = std::max(worst_increase, gap - prev);
                              prev = gap;
                              out.certificates.push_back(c);
                          }
                          summary.bound_name = BoundName::lipschitz;
                          summary.label = "anisotropic Lipschitz gap shrinks as eps decreases (max step increase)";
                          summary.observed = eps.size() < 2 ? 0.0 : worst_increase;
                          summary.theoretical_rhs = 0.0;
                          summary.relation = Relation::at_most;
                          summary.tolerance = 0.0;
                          summary.provenance = "closed_form_gaussian";
                          summary.probe_count = eps.size();
                          summary.seed = seed;
                          summary.notes.push_back("map Sigma_eps^{-1/2}: observed tends to sqrt(n), rhs to n");
                          if (eps.size() < 2) summary.notes.push_back("single epsilon: no trend");
                          decide(summary);
                          if (eps.size() < 2) summary.verdict = Verdict::inconclusive;
                          out.certificates.push_back(summary);
                          return out;
                      }});
    checks.push_back({"pushforward", [=]() {
                          CheckOutput out;
                          for (double e : eps) {
                              const auto [mu, nu] = pair(e);
                              const TransportMap T = solve_gaussian(mu, nu);
                              const Quadrature q = gauss_hermite_tensor(Vec::Zero(n),
                                                                        mu.gaussian()->cov.llt().matrixL(), 6);
                              // GH weights are probability weights; divide out the density to make them dx weights.
                              Quadrature qd = q;
                              for (std::size_t i = 0; i < q.size(); ++i) qd.weights[i] = q.weights[i] / mu.pdf(q.points[i]);
                              BoundCertificate c = check_pushforward_moments(T, mu, *nu.gaussian(), qd, 1e-9);
                              c.label += " eps=" + shortest(e);
                              c.seed = seed;
                              out.certificates.push_back(c);
                          }
                          return out;
                      }});
    return checks;
}

// ---- spherical averages ------------------------------------------------

std::vector<Check> delta_suite(const RunConfig& cfg, const SuiteDef&)
{
    const std::uint64_t seed = cfg.seed;
    std::vector<Check> checks;
    checks.push_back({"quadratic_exact", [=]() {
                          CheckOutput out;
                          for (int n : {1, 2}) {
                              const SphereRule rule = sphere_rule(n);
                              const ScalarField f = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
                              Rng rng(seed + static_cast<std::uint64_t>(n));
                              std::uniform_real_distribution<double> u(-3.0, 3.0);
                              double worst = 0.0;
                              std::size_t count = 0;
                              for (int i = 0; i < 10; ++i) {
                                  Vec x(n);
                                  for (int k = 0; k < n; ++k) x[k] = u(rng);
                                  for (double e : {1.0, 0.5, 0.1, 0.01}) {
                                      worst = std::max(worst, std::abs(delta_epsilon(f, x, e, rule) - 0.5 * e * e));
                                      ++count;
                                  }
                              }
                              out.certificates.push_back(make_cert(
                                  BoundName::delta_eps_limit, "|Delta_eps f - eps^2/2| for f = |x|^2/2, n=" + std::to_string(n),
                                  worst, 0.0, Relation::at_most, 1e-12, to_string(rule.kind), count, seed));
                          }
                          return out;
                      }});
    checks.push_back({"convergence_order", [=]() {
                          CheckOutput out;
                          const std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
                          {
                              const ScalarField f = [](const Vec& x) { return std::sin(x[0]) + std::pow(x[0], 4) / 12.0; };
                              const Vec x = Vec::Constant(1, 0.3);
                              const double lap = -std::sin(0.3) + 0.09;
                              auto r = delta_epsilon_limit_check(f, lap, x, eps, sphere_rule(1));
                              r.certificate.seed = seed;
                              out.certificates.push_back(r.certificate);
                          }
                          {
                              const ScalarField f = [](const Vec& x) {
                                  return std::sin(x[0]) * std::cos(x[1]) + std::pow(x[0], 4) / 12.0;
                              };
                              Vec x(2);
                              x << 0.3, -0.2;
                              const double lap = -2.0 * std::sin(0.3) * std::cos(-0.2) + 0.09;
                              auto r = delta_epsilon_limit_check(f, lap, x, eps, sphere_rule(2));
                              r.certificate.seed = seed;
                              out.certificates.push_back(r.certificate);
                          }
                          return out;
                      }});
    checks.push_back({"concave_bound", [=]() {
                          CheckOutput out;
                          for (int n : {1, 2}) {
                              Rng rng(seed * 31 + static_cast<std::uint64_t>(n));
                              std::normal_distribution<double> g(0.0, 1.0);
                              std::uniform_real_distribution<double> u(0.0, 1.0);
                              Mat B(n, n);
                              for (int i = 0; i < n; ++i)
                                  for (int j = 0; j < n; ++j) B(i, j) = g(rng);
                              const Mat A = B * B.transpose() + 0.1 * Mat::Identity(n, n);
                              const double ell = -A.trace();
                              const ScalarField f = [A](const Vec& x) { return -0.5 * x.dot(A * x); };
                              PointSet xs;
                              std::vector<double> es;
                              for (int i = 0; i < 50; ++i) {
                                  Vec x(n);
                                  for (int k = 0; k < n; ++k) x[k] = 6.0 * u(rng) - 3.0;
                                  xs.push_back(x);
                                  es.push_back(0.01 + 0.99 * u(rng));
                              }
                              BoundCertificate c = check_delta_epsilon_bound(f, ell, xs, es, sphere_rule(n), 1e-12);
                              c.seed = seed;
                              out.certificates.push_back(c);
                          }
                          return out;
                      }});
    return checks;
}

// ---- semigroups ----------------------------------------------------------

std::vector<Check> semigroup_suite(const RunConfig& cfg, const SuiteDef&)
{
    const std::uint64_t seed = cfg.seed;
    const std::size_t probe_n = std::min<std::size_t>(cfg.probe_count, 50);
    std::vector<Check> checks;
    checks.push_back({"closed_form_hessian", [=]() {
                          CheckOutput out;
                          const PointSet xs = ball_probes(2, probe_n, 3.0, seed);
                          const std::vector<double> ts{0.05, 0.25, 0.5, 1.0, 2.0};
                          for (double beta : {0.5, 1.0, 3.0}) {
                              const SemigroupFunction f = SemigroupFunction::quadratic_exponent(
                                  beta * Mat::Identity(2, 2), Vec::Zero(2), 0.0, "gaussian");
                              for (bool closed : {true, false}) {
                                  ApplyOptions opt;
                                  opt.allow_closed_form = closed;
                                  opt.gh_order = 32;
                                  double worst = 0.0;
                                  for (double t : ts) {
                                      const double s = -std::expm1(-2.0 * t);
                                      const double h = -beta * std::exp(-2.0 * t) / (1.0 + beta * s);
                                      for (const Vec& x : xs) {
                                          const SemigroupEvaluation e =
                                              apply(SemigroupKind::ornstein_uhlenbeck, f, t, x, opt);
                                          worst = std::max(worst, (e.hess_log - h * Mat::Identity(2, 2)).cwiseAbs().maxCoeff());
                                      }
                                  }
                                  out.certificates.push_back(make_cert(
                                      BoundName::smoothing,
                                      "Hess log P_t f against the closed form, beta=" + shortest(beta) +
                                          (closed ? " (mixture route)" : " (quadrature route)"),
                                      worst, 1e-8, Relation::at_most, 0.0,
                                      closed ? "semigroup:closed_form_quadratic" : "semigroup:gauss_hermite",
                                      xs.size() * ts.size(), seed));
                              }
                          }
                          return out;
                      }});
    checks.push_back({"smoothing_bounds", [=]() {
                          CheckOutput out;
                          const PointSet xs = ball_probes(2, probe_n, 3.0, seed + 1);
                          const Mat I = Mat::Identity(2, 2);
                          Mat H(2, 2);
                          H << 0.0, -1.0, -1.0, 0.0;  // exp(-x^T H x / 2) = e^{x1 x2}
                          const SemigroupFunction hyper =
                              SemigroupFunction::quadratic_exponent(H, Vec::Zero(2), 0.0, "e^{x1 x2}");
                          Polynomial p(2);
                          p.add_term({0, 0}, 1.0);
                          p.add_term({2, 0}, 1.0);
                          const SemigroupFunction bump = SemigroupFunction::from_mixture(
                              PolyGaussianMixture({PolyGaussianTerm{p, 0.5 * I, Vec::Zero(2), 0.0}}),
                              "(1 + x1^2) e^{-|x|^2/4}");
                          auto add = [&](SemigroupKind k, const SemigroupFunction& f, double c, SmoothingClass cls, double t) {
                              BoundCertificate cert = check_smoothing_bounds(k, f, c, cls, t, xs);
                              cert.label = f.name + ": " + cert.label;
                              cert.seed = seed;
                              out.certificates.push_back(cert);
                          };
                          for (auto kind : {SemigroupKind::ornstein_uhlenbeck, SemigroupKind::heat}) {
                              for (double t : {0.1, 0.5, 1.0, 2.0}) {
                                  for (double beta : {0.5, 1.0, 3.0})
                                      add(kind,
                                          SemigroupFunction::quadratic_exponent(beta * I, Vec::Zero(2), 0.0,
                                                                                "e^{-" + shortest(beta) + "|x|^2/2}"),
                                          -beta, SmoothingClass::log_concave, t);
                                  // Heat smoothing of e^{x1 x2} diverges once t >= 1.
                                  const bool finite = kind != SemigroupKind::heat || t < 1.0;
                                  if (finite && t <= log_concave_window(kind, 1.0))
                                      add(kind, hyper, 1.0, SmoothingClass::log_concave, t);
                                  if (finite) {
                                      add(kind, hyper, -1.0, SmoothingClass::log_convex, t);
                                      add(kind, hyper, 0.0, SmoothingClass::log_subharmonic, t);
                                  }
                                  add(kind, bump, 0.0, SmoothingClass::unconditional, t);
                              }
                          }
                          return out;
                      }});
    checks.push_back({"log_subharmonic_positive", [=]() {
                          CheckOutput out;
                          const PointSet xs = ball_probes(2, probe_n, 3.0, seed + 2);
                          Mat H(2, 2);
                          H << 0.0, -1.0, -1.0, 0.0;
                          const SemigroupFunction f = SemigroupFunction::quadratic_exponent(H, Vec::Zero(2), 0.0, "e^{x1 x2}");
                          for (double t : {0.1, 0.5, 1.0}) {
                              double worst = std::numeric_limits<double>::infinity();
                              for (const Vec& x : xs)
                                  worst = std::min(worst,
                                                   apply(SemigroupKind::ornstein_uhlenbeck, f, t, x).hess_log.trace());
                              BoundCertificate c = make_cert(BoundName::smoothing,
                                                             "min Delta log P_t e^{x1 x2} > 0, t=" + shortest(t), worst,
                                                             0.0, Relation::at_least, 0.0,
                                                             "semigroup:closed_form_quadratic", xs.size(), seed);
                              if (!(worst > 0.0)) c.verdict = Verdict::fail;  // strict inequality
                              out.certificates.push_back(c);
                          }
                          return out;
                      }});
    return checks;
}

// ---- mollification -------------------------------------------------------

std::vector<Check> mollify_suite(const RunConfig& cfg, const SuiteDef&)
{
    const std::uint64_t seed = cfg.seed;
    const double kappa = par(cfg, "kappa", 2.0);
    const double alpha = par(cfg, "alpha", 0.5);
    std::vector<Check> checks;
    checks.push_back({"kappa_match", [=]() {
                          CheckOutput out;
                          const TruncationBox box = TruncationBox::cube(2, 4.0, 32);
                          const Density mu = gaussian(Vec::Zero(2), Mat::Identity(2, 2) / alpha).with_box(box);
                          const Density nu = gaussian(Vec::Zero(2), Mat::Identity(2, 2) / kappa).with_box(box);
                          for (int k : {2, 5, 20}) {
                              const MollifiedPair m = mollify(mu, nu, alpha, kappa, k);
                              const ConvexityCertificate sampled = estimate_certificate(m.target_k, box, 400);
                              out.certificates.push_back(make_cert(
                                  BoundName::mollification,
                                  "|kappa_k - sampled Hessian lower bound|, k=" + std::to_string(k),
                                  std::abs(m.kappa_k - sampled.empirical_kappa), 1e-6, Relation::at_most, 0.0,
                                  "sampled", sampled.probes.size(), seed));
                          }
                          return out;
                      }});
    checks.push_back({"kappa_gap", [=]() {
                          double worst = -std::numeric_limits<double>::infinity();
                          BoundCertificate c;
                          std::size_t count = 0;
                          for (double kp : {0.5, 1.0, 2.0, 5.0})
                              for (int k : {5, 10, 20, 50, 100}) {
                                  const double gap = kp - mollified_kappa(kp, k);
                                  const double rhs = kp * (kp + 1.0) * 2.0 / k;
                                  worst = std::max(worst, gap - rhs);
                                  c.series.push_back({"gap kappa=" + shortest(kp), static_cast<double>(k), gap});
                                  ++count;
                              }
                          BoundCertificate r = make_cert(BoundName::mollification,
                                                         "max of kappa - kappa_k - kappa(kappa+1)(2/k), k >= 5", worst,
                                                         0.0, Relation::at_most, 0.0, "analytic", count, seed);
                          r.series = c.series;
                          return one(r);
                      }});
    return checks;
}

// ---- heat flow -------------------------------------------------------------

struct FlowBundle {
    SemigroupFunction f;
    FlowResult flow;
    double alpha;
    int n;
};

std::vector<Check> heatflow_suite(const RunConfig& cfg, const SuiteDef&)
{
    const std::uint64_t seed = cfg.seed;
    const double sigma = par(cfg, "sigma", 0.5);
    const int n = pari(cfg, "n", 2);
    const std::size_t particles = static_cast<std::size_t>(pari(cfg, "particles", 1000));
    const double t_max = par(cfg, "t_max", 8.0);
    const std::string stepper = cfg.parameters.value("stepper", std::string("rk45"));
    const int moments = pari(cfg, "moments", 2);
    if (stepper != "rk45" && stepper != "rk4") throw InvalidInput("heatflow: stepper must be rk4 or rk45");

    auto st = lazy<FlowBundle>([=]() {
        const Density mu = gaussian(Vec::Zero(n), sigma * sigma * Mat::Identity(n, n));
        FlowBundle b{SemigroupFunction::relative_to_gaussian(mu), {}, 1.0 / (sigma * sigma), n};
        FlowSchedule sch;
        sch.t_max = t_max;
        sch.stepper = stepper == "rk4" ? Stepper::rk4 : Stepper::adaptive_rk45;
        b.flow = integrate_flow(b.f, gaussian_samples(Vec::Zero(n), mu.gaussian()->cov, particles, seed), sch);
        return b;
    });
    std::vector<Check> checks;
    checks.push_back({"contraction", [=]() {
                          const auto& b = st->get();
                          KmContraction k = check_km_contraction(b.flow, b.alpha);
                          k.per_time.seed = k.terminal.seed = seed;
                          return CheckOutput{{k.per_time, k.terminal}, {}};
                      }});
    checks.push_back({"gaussian_equality", [=]() {
                          const auto& b = st->get();
                          double worst = 0.0;
                          BoundCertificate c;
                          std::size_t count = 0;
                          for (const auto& s : b.flow.states) {
                              if (s.t == 0.0) continue;
                              const double bound = std::pow(-std::expm1(-2.0 * s.t) * (b.alpha - 1.0) + 1.0, 0.5 * b.n);
                              double w = 0.0;
                              for (const Mat& J : s.jacobians) w = std::max(w, std::abs(J.determinant() / bound - 1.0));
                              c.series.push_back({"max relative det error", s.t, w});
                              worst = std::max(worst, w);
                              count += s.jacobians.size();
                          }
                          BoundCertificate per = make_cert(BoundName::km_contraction,
                                                           "Gaussian source: det DF_t equals the bound (relative)",
                                                           worst, 1e-6, Relation::at_most, 0.0, "heatflow", count, seed);
                          per.series = c.series;
                          double term = 0.0;
                          const double target = std::pow(b.alpha, 0.5 * b.n);
                          for (const Mat& J : b.flow.terminal.jacobians)
                              term = std::max(term, std::abs(J.determinant() - target));
                          BoundCertificate tc = make_cert(BoundName::km_contraction,
                                                          "Gaussian source: terminal det equals alpha^{n/2}", term,
                                                          1e-5, Relation::at_most, 0.0,
                                                          b.flow.exact_tail ? "heatflow+exact tail" : "heatflow+frozen tail",
                                                          b.flow.terminal.jacobians.size(), seed);
                          return CheckOutput{{per, tc}, {}};
                      }});
    checks.push_back({"route_agreement", [=]() {
                          const auto& b = st->get();
                          BoundCertificate c = make_cert(
                              BoundName::km_contraction, "max |log det DF_t - integrated log det| over the flow",
                              b.flow.max_route_gap, 1e-6, Relation::at_most, 0.0, "heatflow", particles, seed);
                          c.notes.push_back("accepted steps " + std::to_string(b.flow.accepted_steps) + ", rejected " +
                                            std::to_string(b.flow.rejected_steps));
                          return one(c);
                      }});
    checks.push_back({"pushforward", [=]() {
                          const auto& b = st->get();
                          BoundCertificate c = km_pushforward_check(b.flow, b.f, moments);
                          c.seed = seed;
                          return one(c);
                      }});
    return checks;
}

// ---- Husimi densities ----------------------------------------------------

struct WehrlBundle {
    WehrlInstance w;
    std::vector<TransportMap> maps;
    Quadrature q;
    TruncationBox box;
};

WehrlState state_from(const RunConfig& cfg)
{
    // weights[k] on the k-th Fock state; the default is the first excited state.
    std::vector<double> weights{0.0, 1.0};
    if (cfg.parameters.contains("weights")) weights = cfg.parameters.at("weights").get<std::vector<double>>();
    WehrlState s = WehrlState::fock_mixture(weights);
    if (cfg.parameters.contains("center")) {
        const auto c = cfg.parameters.at("center").get<std::vector<double>>();
        s.center = Eigen::Map<const Vec>(c.data(), static_cast<Eigen::Index>(c.size()));
    }
    return s;
}

std::vector<Check> wehrl_suite(const RunConfig& cfg, const SuiteDef& def)
{
    const std::uint64_t seed = cfg.seed;
    const std::string solver = solver_of(cfg, def);
    const std::vector<double> eps = schedule_of(cfg, def);
    const int grid = pari(cfg, "grid", 128);
    const int panels = pari(cfg, "panels", 24);
    const double maj_tol = par(cfg, "majorization_tolerance", solver == "entropic_grid" ? 1e-3 : 1e-10);
    const WehrlState state = state_from(cfg);

    auto st = lazy<WehrlBundle>([=]() {
        WehrlBundle b{build_wehrl_instance(state), {}, {}, {}};
        b.box = wehrl_box(b.w, grid);
        b.q = box_quadrature(b.box, panels, 8);
        if (solver == "radial") {
            if (!b.w.profile_mu) throw DomainError("radial solver needs a centred state of single monomials");
            b.maps = {solve_radial(b.w.mu, b.w.nu, *b.w.profile_mu, *b.w.profile_nu)};
        } else {
            b.maps = cached_schedule(cfg, b.w.mu, b.w.nu, b.box, eps, {});
        }
        return b;
    });
    auto trace_cert = lazy<CheckOutput>([=]() {
        const auto& b = st->get();
        return over_maps(b.maps, [&](const TransportMap& T) {
            return check_trace_bound(T, b.w.certificate, probes_for(T, b.w.mu, cfg));
        });
    });

    std::vector<Check> checks;
    checks.push_back({"trace", [=]() { return trace_cert->get(); }});
    checks.push_back({"determinant", [=]() {
                          const auto& b = st->get();
                          return over_maps(b.maps, [&](const TransportMap& T) {
                              return check_determinant_bound(T, b.w.certificate, probes_for(T, b.w.mu, cfg));
                          });
                      }});
    checks.push_back({"majorization", [=]() {
                          const auto& b = st->get();
                          const ConvexTestFamily fam = default_family(1.0);
                          MajorizationOptions mo;
                          mo.tolerance = maj_tol;
                          return over_maps(b.maps, [&](const TransportMap& T) {
                              return majorization_check(b.w.mu, b.w.nu, &T, b.w.certificate, fam, b.q, mo);
                          });
                      }});
    checks.push_back({"geodesic", [=]() {
                          const auto& b = st->get();
                          const BoundCertificate& tc = trace_cert->get().certificates.front();
                          Geodesic geo{b.maps.back(), {}};
                          for (int i = 0; i <= 10; ++i) geo.times.push_back(i / 10.0);
                          GeodesicResult r =
                              geodesic_monotonicity_check(b.w.mu, geo, default_family(1.0), b.q, &tc);
                          r.certificate.seed = seed;
                          return one(r.certificate);
                      }});
    checks.push_back({"entropy_stability", [=]() {
                          const auto& b = st->get();
                          CheckOutput out;
                          std::vector<BoundCertificate> per;
                          for (const auto& T : b.maps) {
                              EntropyStability es = entropy_stability_check(b.w.mu, b.w.nu, T, b.w.certificate, b.q, b.q);
                              per.push_back(es.certificate);
                              out.entropy.push_back({{"h_mu", es.report.h_mu},
                                                     {"h_nu", es.report.h_nu},
                                                     {"gap", es.report.gap},
                                                     {"stability_rhs", es.report.stability_rhs},
                                                     {"method", es.report.method},
                                                     {"epsilon", T.entropic_epsilon ? json(*T.entropic_epsilon) : json()}});
                          }
                          out.certificates.push_back(per.size() == 1 && !is_entropic(b.maps.front().provenance)
                                                         ? per.front()
                                                         : with_trend(per));
                          return out;
                      }});
    checks.push_back({"glauber_entropy", [=]() {
                          const auto& b = st->get();
                          const double h = entropy(b.w.nu, b.q);
                          const int d = b.w.state.d;
                          return one(make_cert(BoundName::entropy_stability, "|H(Glauber) + d|", std::abs(h + d), 1e-8,
                                               Relation::at_most, 0.0, "quadrature", b.q.size(), seed));
                      }});
    checks.push_back({"husimi_mass", [=]() {
                          const auto& b = st->get();
                          const double m = b.q.integrate([&](const Vec& x) { return b.w.mu.pdf(x); });
                          return one(make_cert(BoundName::certificate_probe, "|int Husimi density - 1|",
                                               std::abs(m - 1.0), 1e-6, Relation::at_most, 0.0, "quadrature",
                                               b.q.size(), seed));
                      }});
    checks.push_back({"husimi_sup", [=]() {
                          const auto& b = st->get();
                          return one(make_cert(BoundName::certificate_probe, "max Husimi density on the probe grid",
                                               b.w.probe_sup, 1.0, Relation::at_most, 1e-12, "probe grid", 81 * 81,
                                               seed));
                      }});
    return checks;
}

// ---- Coulomb gas -----------------------------------------------------------

struct CoulombBundle {
    CoulombInstance inst;
    SampleSet mu_samples;
    PointSet nu_samples;
};

std::vector<Check> coulomb_suite(const RunConfig& cfg, const SuiteDef& def)
{
    const std::uint64_t seed = cfg.seed;
    CoulombSpec spec;
    spec.N = pari(cfg, "N", 2);
    spec.beta = par(cfg, "beta", 1.0);
    if (cfg.parameters.contains("Q")) spec.q_coeffs = cfg.parameters.at("Q").get<std::vector<double>>();
    spec.kappa2 = par(cfg, "kappa2", 2.0 * spec.q_coeffs.front());
    spec.seed = seed;
    const std::size_t samples = static_cast<std::size_t>(pari(cfg, "samples", 2000));
    const std::size_t fit = static_cast<std::size_t>(pari(cfg, "fit_points", 200));
    const int k = pari(cfg, "neighbors", 40);
    const int cert_probes = pari(cfg, "certificate_probes", 20000);
    const double slack = par(cfg, "divergence_slack", 0.1);
    const std::vector<double> eps = schedule_of(cfg, def);
    if (spec.N > 3) throw InvalidInput("coulomb: the sample route supports N <= 3");

    auto st = lazy<CoulombBundle>([=]() {
        CoulombBundle b{build_coulomb_instance(spec), {}, {}};
        b.mu_samples = b.inst.sampler(b.inst.mu, samples, seed);
        if (b.inst.nu.gaussian())
            b.nu_samples = gaussian_samples(b.inst.nu.gaussian()->mean, b.inst.nu.gaussian()->cov, samples, seed + 1);
        else
            b.nu_samples = b.inst.sampler(b.inst.nu, samples, seed + 1).points;
        return b;
    });

    std::vector<Check> checks;
    checks.push_back({"certificate_probe", [=]() {
                          const auto& b = st->get();
                          const ConvexityCertificate c = estimate_certificate(b.inst.mu, b.inst.box, cert_probes, 1e-2);
                          const double a = *b.inst.certificate.alpha;
                          return one(make_cert(BoundName::certificate_probe,
                                               "sampled max Delta V / n off the diagonal tube", c.empirical_alpha, a,
                                               Relation::at_most, 1e-9, "sampled", c.probes.size(), seed));
                      }});
    checks.push_back({"exchangeability", [=]() {
                          const auto& b = st->get();
                          const int n = 2 * spec.N;
                          const PointSet xs = ball_probes(n, 200, 2.0, seed);
                          double worst = 0.0;
                          for (const Vec& x : xs) {
                              if (spec.N < 2) break;
                              Vec y = x;
                              y.segment<2>(0) = x.segment<2>(2);
                              y.segment<2>(2) = x.segment<2>(0);
                              const double a = b.inst.mu.log_density(x), c = b.inst.mu.log_density(y);
                              if (std::isfinite(a)) worst = std::max(worst, std::abs(a - c));
                          }
                          return one(make_cert(BoundName::certificate_probe,
                                               "max |log mu(x) - log mu(swap x)|", worst, 0.0, Relation::at_most, 1e-12,
                                               "analytic", xs.size(), seed));
                      }});
    checks.push_back({"sampling", [=]() {
                          const auto& b = st->get();
                          BoundCertificate c = make_cert(BoundName::sampling, "split-chain R-hat of the source sampler",
                                                         b.mu_samples.rhat, 1.1, Relation::at_most, 0.0, "metropolis",
                                                         b.mu_samples.points.size(), seed);
                          c.notes.push_back("acceptance " + shortest(b.mu_samples.acceptance));
                          for (const auto& w : b.mu_samples.warnings) c.notes.push_back(w);
                          return one(c);
                      }});
    checks.push_back({"divergence", [=]() {
                          const auto& b = st->get();
                          const double rhs = 2.0 * spec.N * std::sqrt(*b.inst.certificate.alpha / *b.inst.certificate.kappa);
                          PointSet fit_pts(b.mu_samples.points.begin(),
                                           b.mu_samples.points.begin() +
                                               static_cast<std::ptrdiff_t>(std::min(fit, b.mu_samples.points.size())));
                          std::vector<BoundCertificate> per;
                          for (double e : eps) {
                              SampleOptions so;
                              so.tol = 1e-5;  // marginal error on point masses of size 1/samples
                              so.max_iter = 20000;
                              const TransportMap T = solve_entropic_sample(b.mu_samples.points, b.nu_samples, e, so);
                              const DivergenceEstimate d = estimate_divergence(T, fit_pts, b.mu_samples.points, k);
                              std::size_t ok = 0;
                              BoundCertificate c;
                              for (double v : d.values) ok += v <= rhs * (1.0 + slack) ? 1 : 0;
                              c.bound_name = BoundName::trace;
                              c.label = "fraction of fit points with divergence <= 2N(1 + slack)";
                              c.observed = d.values.empty() ? 0.0 : static_cast<double>(ok) / d.values.size();
                              c.theoretical_rhs = 0.95;
                              c.relation = Relation::at_least;
                              c.provenance = "entropic_sample";
                              c.epsilon = e;
                              c.probe_count = d.values.size();
                              c.seed = seed;
                              double mx = -std::numeric_limits<double>::infinity(), mean = 0.0;
                              for (double v : d.values) {
                                  mx = std::max(mx, v);
                                  mean += v / d.values.size();
                              }
                              c.notes.push_back("2N = " + shortest(rhs) + ", slack " + shortest(slack) + ", max estimate " +
                                                shortest(mx) + ", mean " + shortest(mean) + ", excluded " +
                                                std::to_string(d.excluded.size()) + ", k " + std::to_string(k));
                              per.push_back(c);
                          }
                          BoundCertificate c = with_trend(per);
                          if (!b.mu_samples.converged()) {
                              c.verdict = Verdict::inconclusive;
                              c.notes.push_back("sampler did not converge; downgraded to inconclusive");
                          }
                          return one(c);
                      }});
    checks.push_back({"entropy_estimate", [=]() {
                          const auto& b = st->get();
                          const SampleEntropy hm = knn_entropy(b.mu_samples.points, 4, 200, seed);
                          const SampleEntropy hn = knn_entropy(b.nu_samples, 4, 200, seed + 1);
                          CheckOutput out;
                          out.entropy.push_back({{"h_mu", hm.estimate},
                                                 {"h_mu_ci", {hm.ci_low, hm.ci_high}},
                                                 {"h_nu", hn.estimate},
                                                 {"h_nu_ci", {hn.ci_low, hn.ci_high}},
                                                 {"method", "Kozachenko-Leonenko k=4, bootstrap 200, level 0.95"},
                                                 {"note", "estimate with interval only; not a certificate"}});
                          return out;
                      }});
    return checks;
}

// ---- growth bounds -----------------------------------------------------------

std::vector<Check> growth_suite(const RunConfig& cfg, const SuiteDef&)
{
    const std::uint64_t seed = cfg.seed;
    const std::size_t count = cfg.probe_count;
    std::vector<Check> checks;
    checks.push_back({"fock", [=]() {
                          CheckOutput out;
                          for (const auto& f : builtin_fock_instances()) {
                              BoundCertificate c = fock_growth_check(f, complex_probes(count, 4.0 * std::sqrt(f.sigma), seed));
                              c.seed = seed;
                              out.certificates.push_back(c);
                          }
                          return out;
                      }});
    checks.push_back({"lsh", [=]() {
                          CheckOutput out;
                          for (const auto& l : builtin_lsh_instances()) {
                              BoundCertificate c = lsh_growth_check(l, ball_probes(l.n, count, 6.0, seed));
                              c.seed = seed;
                              out.certificates.push_back(c);
                          }
                          return out;
                      }});
    return checks;
}

const std::map<std::string, SuiteDef>& registry()
{
    static const std::map<std::string, SuiteDef> r = [] {
        std::map<std::string, SuiteDef> m;
        m["gaussian"] = {{"closed_form_gaussian", "entropic_grid", "radial", "quantile_1d"}, {1.0, 0.3, 0.1, 0.03}, {}};
        m["gaussian"].make = [](const RunConfig& c) { return gaussian_suite(c, registry().at("gaussian")); };
        m["anisotropic"] = {{"closed_form_gaussian"}, {1.0, 0.1, 0.01}, {}};
        m["anisotropic"].make = [](const RunConfig& c) { return anisotropic_suite(c, registry().at("anisotropic")); };
        m["delta_eps"] = {{"none"}, {}, [](const RunConfig& c) { return delta_suite(c, registry().at("delta_eps")); }};
        m["semigroup"] = {{"none"}, {}, [](const RunConfig& c) { return semigroup_suite(c, registry().at("semigroup")); }};
        m["mollify"] = {{"none"}, {}, [](const RunConfig& c) { return mollify_suite(c, registry().at("mollify")); }};
        m["heatflow"] = {{"none"}, {}, [](const RunConfig& c) { return heatflow_suite(c, registry().at("heatflow")); }};
        m["wehrl"] = {{"radial", "entropic_grid"}, {0.04, 0.02, 0.01, 0.005}, {}};
        m["wehrl"].make = [](const RunConfig& c) { return wehrl_suite(c, registry().at("wehrl")); };
        m["coulomb"] = {{"entropic_sample"}, {0.1, 0.05}, {}};
        m["coulomb"].make = [](const RunConfig& c) { return coulomb_suite(c, registry().at("coulomb")); };
        m["growth"] = {{"none"}, {}, [](const RunConfig& c) { return growth_suite(c, registry().at("growth")); }};
        return m;
    }();
    return r;
}

std::string error_kind(const std::exception& e)
{
    if (dynamic_cast<const InvalidInput*>(&e)) return "InvalidInput";
    if (dynamic_cast<const CertificateConflict*>(&e)) return "CertificateConflict";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
    if (dynamic_cast<const UnderflowError*>(&e)) return "UnderflowError";
    if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
    if (dynamic_cast<const ConvexityViolation*>(&e)) return "ConvexityViolation";
    if (dynamic_cast<const SupportError*>(&e)) return "SupportError";
    if (dynamic_cast<const FitError*>(&e)) return "FitError";
    if (dynamic_cast<const IntegrationAccuracyError*>(&e)) return "IntegrationAccuracyError";
    if (dynamic_cast<const DegeneracyError*>(&e)) return "DegeneracyError";
    if (dynamic_cast<const AccuracyError*>(&e)) return "AccuracyError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    return "std::exception";
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string o = "\"";
    for (char ch : s) {
        if (ch == '"') o += '"';
        o += ch;
    }
    return o + "\"";
}

} // namespace

// ---- config ------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j)
{
    RunConfig c;
    try {
        if (j.contains("scenario")) {
            const json& s = j.at("scenario");
            if (s.is_string()) {
                c.scenario = s.get<std::string>();
            } else {
                c.scenario = s.at("name").get<std::string>();
                if (s.contains("parameters")) c.parameters = s.at("parameters");
            }
        }
        if (j.contains("parameters")) c.parameters = j.at("parameters");
        if (j.contains("solvers")) c.solvers = j.at("solvers").get<std::vector<std::string>>();
        if (j.contains("epsilons")) c.epsilons = j.at("epsilons").get<std::vector<double>>();
        if (j.contains("probes")) {
            const json& p = j.at("probes");
            if (p.contains("count")) c.probe_count = p.at("count").get<std::size_t>();
            if (p.contains("seed")) c.seed = p.at("seed").get<std::uint64_t>();
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("checks")) c.checks = j.at("checks").get<std::vector<std::string>>();
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    if (!c.parameters.is_object()) throw InvalidInput("config: parameters must be an object");
    return c;
}

json RunConfig::to_json() const
{
    json j;
    j["scenario"] = {{"name", scenario}, {"parameters", parameters}};
    j["solvers"] = solvers;
    j["epsilons"] = epsilons;
    j["probes"] = {{"count", probe_count}, {"seed", seed}};
    j["checks"] = checks ? json(*checks) : json(nullptr);
    return j;
}

void RunConfig::validate() const
{
    const auto& reg = registry();
    const auto it = reg.find(scenario);
    if (it == reg.end()) {
        std::string names;
        for (const auto& [k, v] : reg) names += (names.empty() ? "" : ", ") + k;
        throw InvalidInput("config: unknown scenario '" + scenario + "' (known: " + names + ")");
    }
    for (const auto& s : solvers)
        if (std::find(it->second.solvers.begin(), it->second.solvers.end(), s) == it->second.solvers.end())
            throw InvalidInput("config: solver '" + s + "' does not apply to scenario '" + scenario + "'");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0)) throw InvalidInput("config: epsilons must be positive");
        if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw InvalidInput("config: epsilons must decrease");
    }
    if (probe_count == 0) throw InvalidInput("config: probe count must be positive");
    if (checks) {
        const auto names = suite_checks(scenario);
        for (const auto& c : *checks)
            if (std::find(names.begin(), names.end(), c) == names.end())
                throw InvalidInput("config: scenario '" + scenario + "' has no check named '" + c + "'");
    }
}

std::vector<std::string> suite_names()
{
    std::vector<std::string> out;
    for (const auto& [k, v] : registry()) out.push_back(k);
    return out;
}

std::vector<std::string> suite_checks(const std::string& suite)
{
    const auto it = registry().find(suite);
    if (it == registry().end()) throw InvalidInput("unknown scenario '" + suite + "'");
    RunConfig c;
    c.scenario = suite;
    std::vector<std::string> out;
    for (const auto& ch : it->second.make(c)) out.push_back(ch.name);
    std::sort(out.begin(), out.end());
    return out;
}

// ---- report -------------------------------------------------------------

Verdict RunReport::overall() const
{
    std::vector<Verdict> vs;
    for (const auto& [n, c] : certificates) vs.push_back(c.verdict);
    return combine(vs);
}

int RunReport::exit_code() const
{
    if (!errors.empty()) return 3;
    switch (overall()) {
    case Verdict::fail: return 1;
    case Verdict::inconclusive: return 2;
    default: return 0;
    }
}

json RunReport::structured() const
{
    json j;
    j["config"] = config;
    json certs = json::array();
    for (const auto& [name, c] : certificates) {
        json e = lsot::to_json(c);
        e["check"] = name;
        certs.push_back(e);
    }
    j["certificates"] = certs;
    json ent = json::array();
    for (const auto& [name, e] : entropy_reports) ent.push_back({{"check", name}, {"report", e}});
    j["entropy_reports"] = ent;
    json errs = json::array();
    for (const auto& e : errors) errs.push_back({{"check", e.check}, {"kind", e.kind}, {"message", e.message}});
    j["errors"] = errs;
    j["overall"] = to_string(overall());
    j["exit_code"] = exit_code();
    j["versions"] = {{"lsot", "0.1.0"},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    return j;
}

void RunReport::append(const RunReport& other, const std::string& prefix)
{
    if (config.is_null()) config = json::array();
    if (config.is_array()) config.push_back({{"name", prefix}, {"config", other.config}});
    for (const auto& [n, c] : other.certificates) certificates.push_back({prefix + "/" + n, c});
    for (const auto& [n, e] : other.entropy_reports) entropy_reports.push_back({prefix + "/" + n, e});
    for (auto e : other.errors) {
        e.check = prefix + "/" + e.check;
        errors.push_back(e);
    }
    for (const auto& [n, t] : other.timings) timings[prefix + "/" + n] = t;
}

RunReport run(const RunConfig& config)
{
    config.validate();
    RunReport report;
    report.config = config.to_json();
    const auto& def = registry().at(config.scenario);
    std::vector<Check> checks = def.make(config);
    std::sort(checks.begin(), checks.end(), [](const Check& a, const Check& b) { return a.name < b.name; });
    std::set<std::string> wanted;
    if (config.checks) wanted.insert(config.checks->begin(), config.checks->end());
    for (const auto& ch : checks) {
        if (config.checks && !wanted.count(ch.name)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            CheckOutput out = ch.fn();
            for (auto& c : out.certificates) report.certificates.push_back({ch.name, std::move(c)});
            for (auto& e : out.entropy) report.entropy_reports.push_back({ch.name, std::move(e)});
        } catch (const std::exception& e) {
            report.errors.push_back({ch.name, error_kind(e), e.what()});
        }
        report.timings[ch.name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return report;
}

std::vector<RunConfig> selftest_configs(std::uint64_t seed)
{
    auto cfg = [seed](std::string scenario, json params = json::object()) {
        RunConfig c;
        c.scenario = std::move(scenario);
        c.parameters = std::move(params);
        c.seed = seed;
        c.probe_count = 200;
        return c;
    };
    std::vector<RunConfig> out;
    out.push_back(cfg("gaussian"));
    {
        RunConfig c = cfg("gaussian", {{"n", 1}, {"sigma_mu", 3.0}, {"sigma_nu", 1.0}});
        c.solvers = {"quantile_1d"};
        out.push_back(c);
    }
    out.push_back(cfg("anisotropic"));
    out.push_back(cfg("delta_eps"));
    out.push_back(cfg("semigroup"));
    out.push_back(cfg("mollify"));
    out.push_back(cfg("heatflow", {{"particles", 200}}));
    out.push_back(cfg("wehrl", {{"weights", {0.0, 1.0}}}));
    out.push_back(cfg("wehrl", {{"weights", {0.5, 0.5}}}));
    out.push_back(cfg("growth"));
    {
        // N = 1 is the equality case of the divergence bound (identity map), where the
        // sample estimator straddles the threshold; only the sampler and certificate run.
        RunConfig c = cfg("coulomb", {{"N", 1}, {"samples", 500}, {"fit_points", 50}, {"certificate_probes", 400}});
        c.checks = std::vector<std::string>{"certificate_probe", "entropy_estimate", "exchangeability", "sampling"};
        out.push_back(c);
    }
    out.push_back(cfg("coulomb", {{"samples", 1000}, {"fit_points", 100}, {"certificate_probes", 4096}}));
    return out;
}

RunReport selftest(std::uint64_t seed)
{
    RunReport report;
    report.config = json::array();
    const auto configs = selftest_configs(seed);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        std::ostringstream prefix;
        prefix << (i < 9 ? "0" : "") << (i + 1) << '-' << configs[i].scenario;
        report.append(run(configs[i]), prefix.str());
    }
    return report;
}

std::vector<Format> parse_formats(const std::string& comma_list)
{
    std::vector<Format> out;
    std::stringstream ss(comma_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "structured") out.push_back(Format::structured);
        else if (item == "tabular") out.push_back(Format::tabular);
        else if (item == "plotdata") out.push_back(Format::plotdata);
        else if (!item.empty()) throw InvalidInput("unknown format '" + item + "'");
    }
    if (out.empty()) throw InvalidInput("no output format given");
    return out;
}

std::string tabular(const RunReport& report)
{
    std::ostringstream os;
    os << "check,name,label,relation,observed,rhs,slack,tolerance,margin,verdict,epsilon,probes,seed,provenance\n";
    for (const auto& [check, c] : report.certificates) {
        os << csv_field(check) << ',' << to_string(c.bound_name) << ',' << csv_field(c.label) << ','
           << to_string(c.relation) << ',' << shortest(c.observed) << ',' << shortest(c.theoretical_rhs) << ','
           << shortest(c.slack) << ',' << shortest(c.tolerance) << ',' << shortest(c.margin()) << ','
           << to_string(c.verdict) << ',' << (c.epsilon ? shortest(*c.epsilon) : "") << ',' << c.probe_count << ','
           << c.seed << ',' << csv_field(c.provenance) << '\n';
    }
    return os.str();
}

std::string plotdata(const RunReport& report)
{
    std::ostringstream os;
    os << "check,label,series,x,y\n";
    for (const auto& [check, c] : report.certificates) {
        for (const auto& p : c.series)
            os << csv_field(check) << ',' << csv_field(c.label) << ',' << csv_field(p.series) << ',' << shortest(p.x)
               << ',' << shortest(p.y) << '\n';
        for (const auto& t : c.trend)
            os << csv_field(check) << ',' << csv_field(c.label) << ",trend," << shortest(t.epsilon) << ','
               << shortest(t.observed) << '\n';
    }
    return os.str();
}

std::vector<std::string> emit(const RunReport& report, const std::vector<Format>& formats, const std::string& dir)
{
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const std::string& body) {
        const fs::path p = fs::path(dir) / name;
        std::ofstream os(p, std::ios::binary);
        os << body;
        os.close();
        if (!os) throw Error("emit: cannot write " + p.string());
        written.push_back(p.string());
    };
    try {
        fs::create_directories(dir);
        for (Format f : formats) {
            switch (f) {
            case Format::structured: put("report.json", report.structured().dump(2) + "\n"); break;
            case Format::tabular: put("report.csv", tabular(report)); break;
            case Format::plotdata: put("plot.csv", plotdata(report)); break;
            }
        }
        json t = json::object();
        for (const auto& [k, v] : report.timings) t[k] = v;
        put("timings.json", t.dump(2) + "\n");
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        throw;
    }
    return written;
}

} // namespace lsot
