#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using PointSet = std::vector<Vec>;

// Error hierarchy. Every failure mode named by an operation contract maps to
// one of these so callers can tell a rejected input from a numerical failure.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class CertificateConflict : public Error {
public:
    using Error::Error;
};

class NumericalDerivativeError : public Error {
public:
    using Error::Error;
};

class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double estimate)
        : Error(what), estimate_(estimate) {}
    double estimate() const { return estimate_; }

private:
    double estimate_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double final_error)
        : Error(what), final_error_(final_error) {}
    double final_error() const { return final_error_; }

private:
    double final_error_;
};

class UnderflowError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConvexityViolation : public Error {
public:
    ConvexityViolation(const std::string& what, Vec probe)
        : Error(what), probe_(std::move(probe)) {}
    const Vec& probe() const { return probe_; }

private:
    Vec probe_;
};

class SupportError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

class IntegrationAccuracyError : public Error {
public:
    using Error::Error;
};

class DegeneracyError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, std::size_t node)
        : Error(what), node_(node) {}
    std::size_t node() const { return node_; }

private:
    std::size_t node_;
};

/// Axis-aligned box used as the numerical domain for quadrature and grids.
struct TruncationBox {
    Vec center;
    Vec half_widths;
    int grid_points_per_axis = 64;

    int dim() const { return static_cast<int>(center.size()); }
    Vec lower() const { return center - half_widths; }
    Vec upper() const { return center + half_widths; }
    double volume() const { return (2.0 * half_widths).prod(); }
    bool contains(const Vec& x) const;

    static TruncationBox cube(int dim, double half_width, int points = 64);
};

inline bool TruncationBox::contains(const Vec& x) const
{
    for (int i = 0; i < dim(); ++i)
        if (std::abs(x[i] - center[i]) > half_widths[i]) return false;
    return true;
}

inline TruncationBox TruncationBox::cube(int dim, double half_width, int points)
{
    return TruncationBox{Vec::Zero(dim), Vec::Constant(dim, half_width), points};
}

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

} // namespace lsot
