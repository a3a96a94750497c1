#include "lsot/polynomial.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace lsot {

Polynomial Polynomial::constant(int dim, double c)
{
    Polynomial p(dim);
    p.add_term(Exponent(dim, 0), c);
    return p;
}

Polynomial Polynomial::variable(int dim, int i)
{
    Polynomial p(dim);
    Exponent e(dim, 0);
    e[i] = 1;
    p.add_term(e, 1.0);
    return p;
}

int Polynomial::degree() const
{
    int d = 0;
    for (const auto& [e, c] : terms_) {
        int s = 0;
        for (int k : e) s += k;
        d = std::max(d, s);
    }
    return d;
}

bool Polynomial::is_constant() const
{
    return terms_.empty() || (terms_.size() == 1 && degree() == 0);
}

void Polynomial::add_term(const Exponent& e, double c)
{
    if (static_cast<int>(e.size()) != dim_) throw InvalidInput("Polynomial: exponent dimension mismatch");
    if (c == 0.0) return;
    auto it = terms_.find(e);
    if (it == terms_.end()) {
        terms_.emplace(e, c);
        return;
    }
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
}

Polynomial Polynomial::operator+(const Polynomial& o) const
{
    Polynomial r = *this;
    if (r.dim_ == 0) r.dim_ = o.dim_;
    for (const auto& [e, c] : o.terms_) r.add_term(e, c);
    return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const
{
    Polynomial r(std::max(dim_, o.dim_));
    for (const auto& [e1, c1] : terms_)
        for (const auto& [e2, c2] : o.terms_) {
            Exponent e(r.dim_);
            for (int k = 0; k < r.dim_; ++k) e[k] = e1[k] + e2[k];
            r.add_term(e, c1 * c2);
        }
    return r;
}

Polynomial Polynomial::operator*(double s) const
{
    Polynomial r(dim_);
    for (const auto& [e, c] : terms_) r.add_term(e, c * s);
    return r;
}

namespace {

double ipow(double x, int k)
{
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

} // namespace

double Polynomial::eval(const Vec& x) const
{
    double s = 0.0;
    for (const auto& [e, c] : terms_) {
        double m = c;
        for (int k = 0; k < dim_; ++k) m *= ipow(x[k], e[k]);
        s += m;
    }
    return s;
}

Vec Polynomial::grad(const Vec& x) const
{
    Vec g = Vec::Zero(dim_);
    for (const auto& [e, c] : terms_) {
        for (int i = 0; i < dim_; ++i) {
            if (e[i] == 0) continue;
            double m = c * e[i];
            for (int k = 0; k < dim_; ++k) m *= ipow(x[k], k == i ? e[k] - 1 : e[k]);
            g[i] += m;
        }
    }
    return g;
}

Mat Polynomial::hess(const Vec& x) const
{
    Mat h = Mat::Zero(dim_, dim_);
    for (const auto& [e, c] : terms_) {
        for (int i = 0; i < dim_; ++i) {
            for (int j = i; j < dim_; ++j) {
                Exponent f = e;
                double m = c;
                m *= f[i];
                if (f[i] == 0) continue;
                --f[i];
                m *= f[j];
                if (f[j] == 0) continue;
                --f[j];
                for (int k = 0; k < dim_; ++k) m *= ipow(x[k], f[k]);
                h(i, j) += m;
            }
        }
    }
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < i; ++j) h(i, j) = h(j, i);
    return h;
}

Polynomial Polynomial::compose_affine(const Mat& L, const Vec& m) const
{
    const int k = static_cast<int>(L.cols());
    if (L.rows() != dim_ || m.size() != dim_) throw InvalidInput("compose_affine: shape mismatch");
    std::vector<Polynomial> lin;
    for (int i = 0; i < dim_; ++i) {
        Polynomial p = Polynomial::constant(k, m[i]);
        for (int j = 0; j < k; ++j) p = p + Polynomial::variable(k, j) * L(i, j);
        lin.push_back(p);
    }
    Polynomial r(k);
    for (const auto& [e, c] : terms_) {
        Polynomial t = Polynomial::constant(k, c);
        for (int i = 0; i < dim_; ++i)
            for (int p = 0; p < e[i]; ++p) t = t * lin[i];
        r = r + t;
    }
    return r;
}

Polynomial Polynomial::gaussian_smooth(const Mat& L) const
{
    const int k = static_cast<int>(L.cols());
    // Substitute y = mu + L xi in 2-block variables (mu, xi), then take E over xi.
    Mat big(dim_, dim_ + k);
    big << Mat::Identity(dim_, dim_), L;
    const Polynomial joint = compose_affine(big, Vec::Zero(dim_));
    Polynomial r(dim_);
    for (const auto& [e, c] : joint.terms()) {
        double moment = 1.0;
        for (int j = 0; j < k && moment != 0.0; ++j) {
            const int a = e[dim_ + j];
            if (a % 2) moment = 0.0;
            for (int q = a - 1; q > 0; q -= 2) moment *= q;
        }
        if (moment == 0.0) continue;
        r.add_term(Exponent(e.begin(), e.begin() + dim_), c * moment);
    }
    return r;
}

std::complex<double> ComplexPolynomial::eval(const std::vector<std::complex<double>>& z) const
{
    std::complex<double> s = 0.0;
    for (const auto& [e, c] : coefficients) {
        std::complex<double> m = c;
        for (int j = 0; j < d; ++j)
            for (int p = 0; p < e[j]; ++p) m *= z[j];
        s += m;
    }
    return s;
}

int ComplexPolynomial::degree() const
{
    int deg = 0;
    for (const auto& [e, c] : coefficients) {
        int s = 0;
        for (int k : e) s += k;
        deg = std::max(deg, s);
    }
    return deg;
}

Polynomial ComplexPolynomial::modulus_squared() const
{
    const int n = 2 * d;
    // Track (Re, Im) of each z_j = q_j + i p_j power as real polynomials.
    Polynomial re(n), im(n);
    for (const auto& [e, c] : coefficients) {
        Polynomial mr = Polynomial::constant(n, c.real());
        Polynomial mi = Polynomial::constant(n, c.imag());
        for (int j = 0; j < d; ++j) {
            const Polynomial q = Polynomial::variable(n, j);
            const Polynomial p = Polynomial::variable(n, d + j);
            for (int k = 0; k < e[j]; ++k) {
                Polynomial nr = mr * q + mi * p * -1.0;
                Polynomial ni = mr * p + mi * q;
                mr = nr;
                mi = ni;
            }
        }
        re = re + mr;
        im = im + mi;
    }
    return re * re + im * im;
}

PolyGaussianMixture::PolyGaussianMixture(std::vector<PolyGaussianTerm> terms) : terms_(std::move(terms))
{
    if (terms_.empty()) throw InvalidInput("PolyGaussianMixture: no terms");
    dim_ = static_cast<int>(terms_.front().A.rows());
    for (auto& t : terms_) {
        if (t.A.rows() != dim_ || t.A.cols() != dim_ || t.b.size() != dim_ || t.poly.dim() != dim_)
            throw InvalidInput("PolyGaussianMixture: inconsistent term dimensions");
        t.A = symmetrize(t.A);
    }
}

PolyGaussianMixture PolyGaussianMixture::quadratic_exponent(const Mat& A, const Vec& b, double c)
{
    const int n = static_cast<int>(A.rows());
    return PolyGaussianMixture({PolyGaussianTerm{Polynomial::constant(n, 1.0), A, b, c}});
}

bool PolyGaussianMixture::single_quadratic() const
{
    return terms_.size() == 1 && terms_.front().poly.is_constant();
}

namespace {

double exponent(const PolyGaussianTerm& t, const Vec& x)
{
    return -0.5 * x.dot(t.A * x) + t.b.dot(x) + t.c;
}

// Shared accumulation: per-term log magnitude, sign, gradient of the term and Hessian of the term,
// each relative to exp(exponent).
struct TermParts {
    double q;      // exponent
    double p;      // polynomial value
    Vec gp;        // grad polynomial
    Mat hp;        // hess polynomial
    Vec gq;        // grad exponent
};

TermParts parts(const PolyGaussianTerm& t, const Vec& x, bool want_hess)
{
    TermParts r;
    r.q = exponent(t, x);
    r.p = t.poly.eval(x);
    r.gp = t.poly.grad(x);
    if (want_hess) r.hp = t.poly.hess(x);
    r.gq = t.b - t.A * x;
    return r;
}

} // namespace

double PolyGaussianMixture::log_value(const Vec& x) const
{
    double qmax = -std::numeric_limits<double>::infinity();
    std::vector<TermParts> ps;
    for (const auto& t : terms_) {
        ps.push_back({exponent(t, x), t.poly.eval(x), {}, {}, {}});
        qmax = std::max(qmax, ps.back().q);
    }
    double s = 0.0;
    for (const auto& p : ps) s += p.p * std::exp(p.q - qmax);
    if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
    return qmax + std::log(s);
}

double PolyGaussianMixture::value(const Vec& x) const { return std::exp(log_value(x)); }

Vec PolyGaussianMixture::grad_log(const Vec& x) const
{
    double qmax = -std::numeric_limits<double>::infinity();
    std::vector<TermParts> ps;
    for (const auto& t : terms_) {
        ps.push_back(parts(t, x, false));
        qmax = std::max(qmax, ps.back().q);
    }
    double s = 0.0;
    Vec g = Vec::Zero(dim_);
    for (const auto& p : ps) {
        const double e = std::exp(p.q - qmax);
        s += p.p * e;
        g += (p.gp + p.p * p.gq) * e;
    }
    return g / s;
}

Mat PolyGaussianMixture::hess_log(const Vec& x) const
{
    double qmax = -std::numeric_limits<double>::infinity();
    std::vector<TermParts> ps;
    for (const auto& t : terms_) {
        ps.push_back(parts(t, x, true));
        qmax = std::max(qmax, ps.back().q);
    }
    double s = 0.0;
    Vec g = Vec::Zero(dim_);
    Mat h = Mat::Zero(dim_, dim_);
    for (std::size_t k = 0; k < ps.size(); ++k) {
        const auto& p = ps[k];
        const double e = std::exp(p.q - qmax);
        s += p.p * e;
        g += (p.gp + p.p * p.gq) * e;
        h += (p.hp + p.gp * p.gq.transpose() + p.gq * p.gp.transpose() +
              p.p * (p.gq * p.gq.transpose() - terms_[k].A)) * e;
    }
    g /= s;
    h /= s;
    return symmetrize(h - g * g.transpose());
}

Vec PolyGaussianMixture::grad(const Vec& x) const { return value(x) * grad_log(x); }

Mat PolyGaussianMixture::hess(const Vec& x) const
{
    const Vec g = grad_log(x);
    return value(x) * (hess_log(x) + g * g.transpose());
}

PolyGaussianMixture PolyGaussianMixture::compose_affine(const Mat& L, const Vec& m) const
{
    std::vector<PolyGaussianTerm> out;
    for (const auto& t : terms_) {
        PolyGaussianTerm r;
        r.poly = t.poly.compose_affine(L, m);
        r.A = L.transpose() * t.A * L;
        r.b = L.transpose() * (t.b - t.A * m);
        r.c = t.c - 0.5 * m.dot(t.A * m) + t.b.dot(m);
        out.push_back(std::move(r));
    }
    return PolyGaussianMixture(std::move(out));
}

PolyGaussianMixture PolyGaussianMixture::times_exponential(const Mat& A, const Vec& b, double c) const
{
    std::vector<PolyGaussianTerm> out = terms_;
    for (auto& t : out) {
        t.A += A;
        t.b += b;
        t.c += c;
    }
    return PolyGaussianMixture(std::move(out));
}

PolyGaussianMixture PolyGaussianMixture::scaled(double s) const
{
    if (!(s > 0.0)) throw InvalidInput("PolyGaussianMixture::scaled: factor must be positive");
    std::vector<PolyGaussianTerm> out = terms_;
    for (auto& t : out) t.c += std::log(s);
    return PolyGaussianMixture(std::move(out));
}

PolyGaussianMixture PolyGaussianMixture::operator+(const PolyGaussianMixture& o) const
{
    std::vector<PolyGaussianTerm> out = terms_;
    out.insert(out.end(), o.terms_.begin(), o.terms_.end());
    return PolyGaussianMixture(std::move(out));
}

PolyGaussianMixture gaussian_smooth(const PolyGaussianMixture& f, double s)
{
    if (s < 0.0) throw InvalidInput("gaussian_smooth: negative smoothing time");
    if (s == 0.0) return f;
    const int n = f.dim();
    const Mat I = Mat::Identity(n, n);
    std::vector<PolyGaussianTerm> out;
    for (const auto& t : f.terms()) {
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(I + s * t.A));
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw InvalidInput("gaussian_smooth: I + sA is not positive definite, the average diverges");
        const Mat& U = es.eigenvectors();
        const Mat Minv = U * es.eigenvalues().cwiseInverse().asDiagonal() * U.transpose();
        PolyGaussianTerm r;
        r.A = symmetrize(t.A * Minv);
        r.b = Minv * t.b;
        r.c = t.c - 0.5 * es.eigenvalues().array().log().sum() + 0.5 * s * t.b.dot(Minv * t.b);
        if (t.poly.is_constant()) {
            r.poly = t.poly;
        } else {
            const Mat L = U * (s * es.eigenvalues().cwiseInverse()).cwiseSqrt().asDiagonal();
            r.poly = t.poly.gaussian_smooth(L).compose_affine(Minv, s * (Minv * t.b));
        }
        out.push_back(std::move(r));
    }
    return PolyGaussianMixture(std::move(out));
}

} // namespace lsot
