#pragma once

#include "lsot/core.hpp"

#include <functional>
#include <random>

namespace lsot {

using Rng = std::mt19937_64;

struct Rule1D {
    std::vector<double> x;
    std::vector<double> w;
};

// Nodes/weights on [-1, 1].
Rule1D gauss_legendre(int order);
// Probabilists' Hermite rule: sum w_i g(x_i) ~ E g(Z), Z ~ N(0,1). Weights sum to 1.
Rule1D gauss_hermite(int order);

/// A weighted point set. Weights are dx-weights unless the description says otherwise.
struct Quadrature {
    PointSet points;
    std::vector<double> weights;
    // Points lie on the first axis and weights carry the sphere area factor;
    // only valid for radially symmetric integrands.
    bool radial_only = false;
    std::string description;

    std::size_t size() const { return points.size(); }
    double integrate(const std::function<double(const Vec&)>& f) const;
    double weight_sum() const;
};

double unit_sphere_area(int dim);

// Composite Gauss-Legendre tensor product: `panels` panels per axis, `order` nodes each.
Quadrature box_quadrature(const TruncationBox& box, int panels, int order);

// Radial rule on [0, r_max] about `center` for radially symmetric integrands.
Quadrature radial_quadrature(const Vec& center, double r_max, int panels, int order);

// Polar rule in 2-D: composite GL in r times `angles` uniform angles.
Quadrature polar_quadrature(const Vec& center, double r_max, int panels, int order, int angles);

// Tensor Gauss-Hermite rule for E g(m + L Z), Z ~ N(0, I). Weights sum to 1.
Quadrature gauss_hermite_tensor(const Vec& mean, const Mat& chol, int order);

PointSet gaussian_samples(const Vec& mean, const Mat& cov, std::size_t count, std::uint64_t seed);

// Tensor grid with `per_axis` points per axis spanning the box (inclusive of the faces).
PointSet tensor_grid(const TruncationBox& box, int per_axis);

} // namespace lsot
