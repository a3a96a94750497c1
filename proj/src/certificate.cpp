#include "lsot/certificate.hpp"

#include <algorithm>
#include <cmath>

namespace lsot {

const char* to_string(BoundName b)
{
    switch (b) {
    case BoundName::trace: return "trace";
    case BoundName::lipschitz: return "lipschitz";
    case BoundName::determinant: return "determinant";
    case BoundName::lp_moment: return "lp_moment";
    case BoundName::smoothing: return "smoothing";
    case BoundName::geodesic_monotonicity: return "geodesic_monotonicity";
    case BoundName::entropy_stability: return "entropy_stability";
    case BoundName::growth: return "growth";
    case BoundName::delta_eps_limit: return "delta_eps_limit";
    case BoundName::covariance_identity: return "covariance_identity";
    case BoundName::majorization: return "majorization";
    case BoundName::km_contraction: return "km_contraction";
    case BoundName::km_pushforward: return "km_pushforward";
    case BoundName::monge_ampere: return "monge_ampere";
    case BoundName::mollification: return "mollification";
    case BoundName::certificate_probe: return "certificate_probe";
    case BoundName::pushforward: return "pushforward";
    case BoundName::cyclical_monotonicity: return "cyclical_monotonicity";
    case BoundName::method_agreement: return "method_agreement";
    case BoundName::sampling: return "sampling";
    }
    return "unknown";
}

const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::pass_with_slack: return "pass_with_slack";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

const char* to_string(Relation r) { return r == Relation::at_most ? "at_most" : "at_least"; }

double BoundCertificate::margin() const
{
    return relation == Relation::at_most ? theoretical_rhs - observed : observed - theoretical_rhs;
}

namespace {

double excess(Relation r, double rhs, double obs)
{
    return std::max(0.0, r == Relation::at_most ? obs - rhs : rhs - obs);
}

} // namespace

bool excess_non_increasing(const BoundCertificate& c)
{
    if (c.trend.size() < 2) return false;
    for (std::size_t i = 1; i < c.trend.size(); ++i) {
        const double prev = excess(c.relation, c.theoretical_rhs, c.trend[i - 1].observed);
        const double cur = excess(c.relation, c.theoretical_rhs, c.trend[i].observed);
        if (cur > prev * (1.0 + 1e-12) + 1e-15) return false;
    }
    return true;
}

void decide(BoundCertificate& c, VerdictPolicy policy)
{
    if (!std::isfinite(c.observed) || !std::isfinite(c.theoretical_rhs)) {
        c.verdict = Verdict::inconclusive;
        c.notes.push_back("non-finite observed or rhs");
        return;
    }
    const double allow = std::max(1e-9 * std::abs(c.theoretical_rhs), c.tolerance);
    const double m = c.margin();
    const bool single_eps = policy.entropic && c.trend.size() < 2;
    if (m >= -allow) {
        c.verdict = single_eps ? Verdict::inconclusive : Verdict::pass;
        if (single_eps) c.notes.push_back("entropic result at a single epsilon is not a certificate");
        return;
    }
    const double scaled_allow = c.slack * std::abs(c.theoretical_rhs);
    const bool within_slack = c.slack > 0.0 && m >= -allow - scaled_allow;
    const bool tightening = excess_non_increasing(c);
    if (within_slack) {
        if (tightening) {
            c.verdict = Verdict::pass_with_slack;
        } else {
            c.verdict = Verdict::inconclusive;
            c.notes.push_back("within slack but the epsilon trend is not tightening");
        }
        return;
    }
    if (policy.entropic && tightening) {
        c.verdict = Verdict::inconclusive;
        c.notes.push_back("entropic excess is decreasing with epsilon; downgraded from fail");
        return;
    }
    c.verdict = Verdict::fail;
}

nlohmann::json to_json(const BoundCertificate& c)
{
    nlohmann::json j;
    j["name"] = to_string(c.bound_name);
    j["label"] = c.label;
    j["rhs"] = c.theoretical_rhs;
    j["observed"] = c.observed;
    j["relation"] = to_string(c.relation);
    j["margin"] = c.margin();
    j["slack"] = c.slack;
    j["tolerance"] = c.tolerance;
    j["verdict"] = to_string(c.verdict);
    j["provenance"] = c.provenance;
    j["epsilon"] = c.epsilon ? nlohmann::json(*c.epsilon) : nlohmann::json(nullptr);
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& t : c.trend) tr.push_back({t.epsilon, t.observed});
    j["trend"] = tr;
    if (!c.series.empty()) {
        nlohmann::json se = nlohmann::json::array();
        for (const auto& p : c.series) se.push_back({p.series, p.x, p.y});
        j["series"] = se;
    }
    j["probes"] = c.probe_count;
    j["seed"] = c.seed;
    j["notes"] = c.notes;
    return j;
}

Verdict combine(const std::vector<Verdict>& vs)
{
    auto rank = [](Verdict v) {
        switch (v) {
        case Verdict::pass: return 0;
        case Verdict::pass_with_slack: return 1;
        case Verdict::inconclusive: return 2;
        case Verdict::fail: return 3;
        }
        return 3;
    };
    Verdict w = Verdict::pass;
    for (Verdict v : vs)
        if (rank(v) > rank(w)) w = v;
    return w;
}

} // namespace lsot
