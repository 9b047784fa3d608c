#include "ddisac/fusion.hpp"

#include <cmath>
#include <limits>

namespace ddisac {

Vec2 triangulate(double range_anchor, double range_j, double range_k, const Vec2& anchor, const Vec2& node_j,
                 const Vec2& node_k) {
    Mat2 a;
    a.row(0) = (node_j - anchor).transpose();
    a.row(1) = (node_k - anchor).transpose();
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double scale = std::max(a.row(0).norm() * a.row(1).norm(), std::numeric_limits<double>::min());
    if (std::abs(det) < 1e-9 * scale)
        throw CollinearityError("triangulate: anchor and receivers are (near-)collinear");

    auto rhs = [&](const Vec2& node, double range) {
        return 0.5 * (range_anchor * range_anchor - range * range -
                      (anchor.squaredNorm() - node.squaredNorm()));
    };
    const Vec2 b(rhs(node_j, range_j), rhs(node_k, range_k));
    return Vec2((a(1, 1) * b(0) - a(0, 1) * b(1)) / det, (a(0, 0) * b(1) - a(1, 0) * b(0)) / det);
}

Vec2 solve_velocity(const Vec2& position, double vrad_j, double vrad_k, const Vec2& node_j, const Vec2& node_k) {
    const Vec2 dj = node_j - position;
    const Vec2 dk = node_k - position;
    const double rj = dj.norm();
    const double rk = dk.norm();
    if (rj <= 0.0 || rk <= 0.0) throw DegenerateBearingError("solve_velocity: target coincides with a node");
    Mat2 c;
    c.row(0) = (dj / rj).transpose();
    c.row(1) = (dk / rk).transpose();
    const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
    if (std::abs(det) < 1e-9) throw DegenerateBearingError("solve_velocity: bearings are (near-)parallel");
    return Vec2((c(1, 1) * vrad_j - c(0, 1) * vrad_k) / det, (c(0, 0) * vrad_k - c(1, 0) * vrad_j) / det);
}

Vec2 fuse_average(const std::vector<Vec2>& estimates) {
    if (estimates.empty()) throw std::invalid_argument("fuse_average: empty estimate list");
    Vec2 sum(0.0, 0.0);
    for (const auto& e : estimates) sum += e;
    return sum / static_cast<double>(estimates.size());
}

Fused2 fuse_nearest_neighbor(const std::vector<Vec2>& estimates, double xi) {
    if (estimates.empty()) throw std::invalid_argument("fuse_nearest_neighbor: empty estimate list");
    if (xi <= 0.0) throw std::invalid_argument("fuse_nearest_neighbor: xi must be positive");
    const int n = static_cast<int>(estimates.size());
    int best = 0, best_count = -1;
    for (int i = 0; i < n; ++i) {
        int count = 0;
        for (int m = 0; m < n; ++m)
            if (m != i && (estimates[static_cast<std::size_t>(i)] - estimates[static_cast<std::size_t>(m)]).norm() <= xi)
                ++count;
        if (count > best_count) {  // strict: ties keep the smallest index
            best_count = count;
            best = i;
        }
    }
    Fused2 out;
    Vec2 sum(0.0, 0.0);
    for (int m = 0; m < n; ++m) {
        if (m == best ||
            (estimates[static_cast<std::size_t>(best)] - estimates[static_cast<std::size_t>(m)]).norm() <= xi) {
            sum += estimates[static_cast<std::size_t>(m)];
            ++out.contributing;
        }
    }
    out.value = sum / out.contributing;
    return out;
}

std::vector<DelayDoppler> reconstruct_channel_params(const TargetState& fused, const NodeLayout& layout,
                                                     const OtfsConfig& cfg) {
    if (!fused.position.allFinite() || !fused.velocity.allFinite())
        throw std::invalid_argument("reconstruct_channel_params: non-finite fused state");
    std::vector<DelayDoppler> out;
    out.reserve(static_cast<std::size_t>(layout.num_receivers()) + 1);
    out.push_back(monostatic_dd(fused, layout.anchor, cfg.carrier_freq));
    for (int j = 1; j <= layout.num_receivers(); ++j)
        out.push_back(bistatic_dd(fused, layout.anchor, layout.node(j), cfg.carrier_freq));
    return out;
}

}  // namespace ddisac
