#include "ddisac/deployment.hpp"

#include <cmath>
#include <limits>

namespace ddisac {

namespace {

struct AxisNumerators {
    double num_x = 0.0;
    double num_y = 0.0;
    double det = 0.0;
};

AxisNumerators axis_numerators(const Vec2& rj, const Vec2& rk, const RangeVarianceSpec& vars) {
    AxisNumerators n;
    n.det = rj.x() * rk.y() - rk.x() * rj.y();
    const double dx = rj.x() - rk.x();
    const double dy = rk.y() - rj.y();
    n.num_x = vars.anchor * dy * dy + vars.rx_j * rk.y() * rk.y() + vars.rx_k * rj.y() * rj.y();
    n.num_y = vars.anchor * dx * dx + vars.rx_j * rk.x() * rk.x() + vars.rx_k * rj.x() * rj.x();
    return n;
}

}  // namespace

void RangeVarianceSpec::validate() const {
    if (anchor <= 0.0 || rx_j <= 0.0 || rx_k <= 0.0)
        throw std::invalid_argument("RangeVarianceSpec: variances must be positive");
}

GeometryScore covariance_general(const Vec2& rj, const Vec2& rk, const RangeVarianceSpec& vars) {
    vars.validate();
    const AxisNumerators n = axis_numerators(rj, rk, vars);
    GeometryScore score;
    score.triangle_area = std::abs(n.det) / 2.0;
    if (n.det == 0.0) {
        score.trace = std::numeric_limits<double>::infinity();
        score.kappa_max = std::numeric_limits<double>::infinity();
        score.degenerate = true;
        return score;
    }
    const double denom = 4.0 * n.det * n.det;
    score.var_x = n.num_x / denom;
    score.var_y = n.num_y / denom;
    score.trace = score.var_x + score.var_y;
    score.kappa_max = std::max(score.var_x, score.var_y);
    return score;
}

GeometryScore covariance_multi(const std::vector<Triangulation>& triangulations, int fusion_count) {
    if (triangulations.empty()) throw std::invalid_argument("covariance_multi: empty triangulation list");
    if (fusion_count < 1) throw std::invalid_argument("covariance_multi: fusion_count must be >= 1");
    GeometryScore score;
    double sum_x = 0.0, sum_y = 0.0, area_sum = 0.0;
    int used = 0;
    for (const auto& t : triangulations) {
        t.vars.validate();
        const AxisNumerators n = axis_numerators(t.rj, t.rk, t.vars);
        if (n.det == 0.0) {
            score.degenerate = true;  // dropped, mirroring the fusion drop policy
            continue;
        }
        const double denom = 4.0 * n.det * n.det;
        sum_x += n.num_x / denom;
        sum_y += n.num_y / denom;
        area_sum += std::abs(n.det) / 2.0;
        ++used;
    }
    if (used == 0) {
        score.trace = std::numeric_limits<double>::infinity();
        score.kappa_max = std::numeric_limits<double>::infinity();
        return score;
    }
    const double nn = static_cast<double>(fusion_count) * fusion_count;
    score.var_x = sum_x / nn;
    score.var_y = sum_y / nn;
    score.trace = score.var_x + score.var_y;
    score.kappa_max = std::max(score.var_x, score.var_y);
    score.triangle_area = area_sum / used;
    return score;
}

GeometryScore nant_reduction_check(const GeometryScore& base, int antennas_per_node) {
    if (antennas_per_node < 1) throw std::invalid_argument("nant_reduction_check: antennas must be >= 1");
    const double factor = static_cast<double>(antennas_per_node) * antennas_per_node * antennas_per_node;
    GeometryScore score = base;
    score.trace /= factor;
    score.kappa_max /= factor;
    score.var_x /= factor;
    score.var_y /= factor;
    return score;
}

NodeLayout place_orthogonal_optimal(double region_side, int antennas_per_node) {
    if (region_side <= 0.0) throw std::invalid_argument("place_orthogonal_optimal: region side must be positive");
    NodeLayout layout;
    layout.anchor = Vec2(0.0, 0.0);
    layout.receivers = {Vec2(region_side, 0.0), Vec2(0.0, region_side)};
    layout.antennas_per_node = antennas_per_node;
    layout.region_side = region_side;
    layout.validate();
    return layout;
}

double squared_range_variance(double range, double range_std) {
    return 4.0 * range * range * range_std * range_std;
}

}  // namespace ddisac
