#pragma once

#include "lsot/core.hpp"

#include <complex>
#include <map>

namespace lsot {

/// Sparse real multivariate polynomial.
class Polynomial {
public:
    using Exponent = std::vector<int>;

    Polynomial() = default;
    explicit Polynomial(int dim) : dim_(dim) {}
    static Polynomial constant(int dim, double c);
    static Polynomial variable(int dim, int i);

    int dim() const { return dim_; }
    int degree() const;
    bool is_constant() const;
    bool is_zero() const { return terms_.empty(); }
    const std::map<Exponent, double>& terms() const { return terms_; }

    void add_term(const Exponent& e, double c);
    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double s) const;

    double eval(const Vec& x) const;
    Vec grad(const Vec& x) const;
    Mat hess(const Vec& x) const;

    // g(x) = p(L x + m)
    Polynomial compose_affine(const Mat& L, const Vec& m) const;
    // E_xi p(mu + L xi), xi ~ N(0, I_k) with L of shape dim x k; result is a polynomial in mu.
    Polynomial gaussian_smooth(const Mat& L) const;

private:
    int dim_ = 0;
    std::map<Exponent, double> terms_;
};

/// Complex polynomial in d complex variables z_j = q_j + i p_j, viewed on R^{2d}
/// with coordinates (q_1..q_d, p_1..p_d).
struct ComplexPolynomial {
    int d = 1;
    std::vector<std::pair<std::vector<int>, std::complex<double>>> coefficients;

    std::complex<double> eval(const std::vector<std::complex<double>>& z) const;
    // |f(q + ip)|^2 as a real polynomial on R^{2d}.
    Polynomial modulus_squared() const;
    int degree() const;
};

/// Sum of terms P(y) exp(-y^T A y / 2 + b^T y + c). A need not be definite.
struct PolyGaussianTerm {
    Polynomial poly;
    Mat A;
    Vec b;
    double c = 0.0;
};

class PolyGaussianMixture {
public:
    PolyGaussianMixture() = default;
    explicit PolyGaussianMixture(std::vector<PolyGaussianTerm> terms);

    static PolyGaussianMixture quadratic_exponent(const Mat& A, const Vec& b, double c);

    int dim() const { return dim_; }
    const std::vector<PolyGaussianTerm>& terms() const { return terms_; }
    bool single_quadratic() const;

    double value(const Vec& x) const;
    double log_value(const Vec& x) const;
    Vec grad_log(const Vec& x) const;
    Mat hess_log(const Vec& x) const;
    Vec grad(const Vec& x) const;
    Mat hess(const Vec& x) const;

    // x -> f(L x + m)
    PolyGaussianMixture compose_affine(const Mat& L, const Vec& m) const;
    // x -> f(x) * exp(-x^T A x / 2 + b^T x + c)
    PolyGaussianMixture times_exponential(const Mat& A, const Vec& b, double c) const;
    PolyGaussianMixture scaled(double s) const;
    PolyGaussianMixture operator+(const PolyGaussianMixture& o) const;

private:
    int dim_ = 0;
    std::vector<PolyGaussianTerm> terms_;
};

// Exact z -> E f(z + sqrt(s) Y), Y ~ N(0, I). Each term stays polynomial times Gaussian:
// with M = I + sA, A' = A M^{-1}, b' = M^{-1} b, and the polynomial smoothed by the
// conditional Gaussian of covariance s M^{-1}. Throws InvalidInput when M is not positive definite.
PolyGaussianMixture gaussian_smooth(const PolyGaussianMixture& f, double s);

} // namespace lsot
