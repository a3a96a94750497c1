#pragma once

// Hand-rolled generators for property tests. Every case draws from its own
// seeded stream so a failure can be replayed from the printed seed alone.

#include "lsot/core.hpp"
#include "lsot/polynomial.hpp"
#include "lsot/quadrature.hpp"

#include <doctest.h>

#include <functional>
#include <random>

namespace gen {

using lsot::Mat;
using lsot::Vec;

struct Gen {
    lsot::Rng rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    double normal() { return std::normal_distribution<double>()(rng); }

    Vec vec(int n, double scale = 1.0)
    {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = scale * normal();
        return v;
    }

    Vec in_ball(int n, double radius)
    {
        Vec v = vec(n);
        return v / v.norm() * radius * std::pow(uniform(0.0, 1.0), 1.0 / n);
    }

    // Random orthogonal frame times eigenvalues drawn log-uniformly from [lo, hi].
    Mat spd(int n, double lo = 0.25, double hi = 4.0)
    {
        Mat g(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g(i, j) = normal();
        Eigen::HouseholderQR<Mat> qr(g);
        const Mat q = qr.householderQ();
        Vec ev(n);
        for (int i = 0; i < n; ++i) ev[i] = std::exp(uniform(std::log(lo), std::log(hi)));
        return lsot::symmetrize(q * ev.asDiagonal() * q.transpose());
    }

    // Dense polynomial with coefficients in [-1, 1] up to `degree`.
    lsot::Polynomial polynomial(int dim, int degree)
    {
        lsot::Polynomial p(dim);
        std::vector<int> e(dim, 0);
        std::function<void(int, int)> rec = [&](int axis, int left) {
            if (axis == dim) {
                p.add_term(e, uniform(-1.0, 1.0));
                return;
            }
            for (int k = 0; k <= left; ++k) {
                e[axis] = k;
                rec(axis + 1, left - k);
            }
            e[axis] = 0;
        };
        rec(0, degree);
        return p;
    }
};

// Runs `body` on `cases` independent generators derived from `seed`.
inline void for_all(int cases, std::uint64_t seed, const std::function<void(Gen&)>& body)
{
    for (int c = 0; c < cases; ++c) {
        const std::uint64_t s = seed * 1000003ull + static_cast<std::uint64_t>(c);
        CAPTURE(s);
        Gen g(s);
        body(g);
    }
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace gen
