#pragma once

// Closed-form covariance of the triangulated position as a function of
// node geometry, with the anchor at the origin.
//
// The triangulation solves A [alpha beta]^T = B where B is linear in the
// observed squared ranges, so for given variances {sigma_q^2} of the
// squared-range estimates the error propagation is exact:
//
//   var(alpha) = [s0 (y_k - y_j)^2 + sj y_k^2 + sk y_j^2] / (4 D^2)
//   var(beta)  = [s0 (x_j - x_k)^2 + sj x_k^2 + sk x_j^2] / (4 D^2)
//
// with D = x_j y_k - x_k y_j (twice the triangle area). Position errors
// along the two axes are treated as independent, so the covariance is
// diagonal and kappa_max is the larger per-axis variance. The denominator
// grows with the triangle area, which is why the deployment wants that
// area optimized; both scores shrink by 1/N^3 when every node carries N
// independent antennas and all N^3 triangulation samples are averaged.

#include <vector>

#include "ddisac/geometry.hpp"
#include "ddisac/types.hpp"

namespace ddisac {

// Variances of the *squared* range estimates (m^4) per node role.
struct RangeVarianceSpec {
    double anchor = 1.0;
    double rx_j = 1.0;
    double rx_k = 1.0;

    void validate() const;
};

struct GeometryScore {
    double trace = 0.0;          // m^2
    double kappa_max = 0.0;      // m^2
    double triangle_area = 0.0;  // m^2
    double var_x = 0.0;          // per-axis components of the trace
    double var_y = 0.0;
    bool degenerate = false;     // collinear geometry encountered
};

// Single triangle (anchor at the origin, receivers at rj / rk).
// Collinear input yields the infinite-score sentinel with the flag set.
GeometryScore covariance_general(const Vec2& rj, const Vec2& rk, const RangeVarianceSpec& vars);

struct Triangulation {
    Vec2 rj{0.0, 0.0};
    Vec2 rk{0.0, 0.0};
    RangeVarianceSpec vars;
};

// Score of the mean over fusion_count independent triangulation estimates;
// collinear members are excluded (flagged) rather than propagated.
GeometryScore covariance_multi(const std::vector<Triangulation>& triangulations, int fusion_count);

// Score after averaging the N^3 samples produced by N independent
// antennas per node (equal per-sample variances).
GeometryScore nant_reduction_check(const GeometryScore& base, int antennas_per_node);

// Receivers at (L, 0) and (0, L): the orthogonal-axes layout with maximum
// span inside [0, L]^2.
NodeLayout place_orthogonal_optimal(double region_side, int antennas_per_node = 1);

// First-order conversion of range noise to squared-range variance,
// var(rho^2) ~= 4 rho^2 sigma_rho^2.
double squared_range_variance(double range, double range_std);

}  // namespace ddisac
