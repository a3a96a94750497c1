#pragma once

#include "lsot/core.hpp"

#include <nlohmann/json.hpp>

#include <optional>

namespace lsot {

enum class BoundName {
    trace,
    lipschitz,
    determinant,
    lp_moment,
    smoothing,
    geodesic_monotonicity,
    entropy_stability,
    growth,
    delta_eps_limit,
    covariance_identity,
    majorization,
    km_contraction,
    km_pushforward,
    monge_ampere,
    mollification,
    certificate_probe,
    pushforward,
    cyclical_monotonicity,
    method_agreement,
    sampling,
};

enum class Verdict { pass, pass_with_slack, fail, inconclusive };

// at_most: observed <= rhs is the claim. at_least: observed >= rhs.
enum class Relation { at_most, at_least };

const char* to_string(BoundName b);
const char* to_string(Verdict v);
const char* to_string(Relation r);

struct TrendPoint {
    double epsilon;
    double observed;
};

struct SeriesPoint {
    std::string series;
    double x;
    double y;
};

struct BoundCertificate {
    BoundName bound_name = BoundName::trace;
    std::string label;
    double theoretical_rhs = 0.0;
    double observed = 0.0;
    double slack = 0.0;
    Verdict verdict = Verdict::inconclusive;
    Relation relation = Relation::at_most;
    double tolerance = 0.0;  // absolute allowance; the larger of it and 1e-9 |rhs| applies
    std::string provenance;
    std::optional<double> epsilon;
    std::vector<TrendPoint> trend;  // (epsilon, observed), epsilon decreasing
    std::vector<SeriesPoint> series;
    std::size_t probe_count = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> notes;

    // Signed distance from the bound; positive when the claim holds.
    double margin() const;
    bool passed() const { return verdict == Verdict::pass || verdict == Verdict::pass_with_slack; }
};

struct VerdictPolicy {
    bool entropic = false;  // single-epsilon results are never certificates
};

// Fills `verdict` from observed, rhs, slack, tolerance and the trend.
void decide(BoundCertificate& c, VerdictPolicy policy = {});

// Excess over the bound per trend entry; non-increasing as epsilon decreases counts as tightening.
bool excess_non_increasing(const BoundCertificate& c);

nlohmann::json to_json(const BoundCertificate& c);

// Worst verdict of a set: fail > inconclusive > pass_with_slack > pass.
Verdict combine(const std::vector<Verdict>& vs);

} // namespace lsot
