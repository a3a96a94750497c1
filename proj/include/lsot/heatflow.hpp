#pragma once

#include "lsot/certificate.hpp"
#include "lsot/semigroup.hpp"

namespace lsot {

struct FlowState {
    double t = 0.0;
    PointSet positions;
    std::vector<Mat> jacobians;
    std::vector<double> log_dets;  // integrated scalar Jacobi equation
};

enum class Stepper { rk4, adaptive_rk45 };
const char* to_string(Stepper s);

struct FlowSchedule {
    double t_max = 8.0;
    int steps = 64;  // rk4 step count; initial step t_max / steps for rk45
    Stepper stepper = Stepper::adaptive_rk45;
    bool tail_extrapolation = true;
    double atol = 1e-9;
    double rtol = 1e-8;
    int record_count = 20;  // equally spaced in (0, t_max]

    void validate() const;
};

struct FlowResult {
    std::vector<FlowState> states;  // t = 0 then the record times
    FlowState terminal;             // t = infinity after the tail treatment
    bool exact_tail = false;
    double position_error_bar = 0.0;  // frozen-tail bound; 0 with an exact tail
    double log_det_error_bar = 0.0;
    double max_route_gap = 0.0;       // max |log det J - integrated log det|
    int accepted_steps = 0;
    int rejected_steps = 0;
};

// -grad log P_t f(x) for the Ornstein-Uhlenbeck semigroup.
Vec flow_step_field(const SemigroupFunction& f, double t, const Vec& x, const ApplyOptions& opt = {});

FlowResult integrate_flow(const SemigroupFunction& f, const PointSet& particles, const FlowSchedule& schedule,
                          const ApplyOptions& opt = {});

struct KmContraction {
    // max over times and particles of det / [(1 - e^{-2t})(alpha - 1) + 1]^{n/2}, claimed <= 1
    BoundCertificate per_time;
    // terminal det against alpha^{n/2}
    BoundCertificate terminal;
};

KmContraction check_km_contraction(const FlowResult& flow, double alpha);

// Empirical moments (all monomials up to `moments`) of the terminal particles
// against the standard Gaussian, in units of the Monte Carlo standard error
// (claimed <= max_z). With a closed-form f, the second moments at the middle
// record time are also compared with those of P_t f dgamma.
BoundCertificate km_pushforward_check(const FlowResult& flow, const SemigroupFunction& f, int moments,
                                      double max_z = 3.0);

} // namespace lsot
