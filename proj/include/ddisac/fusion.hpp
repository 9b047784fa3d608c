#pragma once

// Cooperative localization: triangulation from three ranges, radial
// velocity inversion, and fusion of the per-pair estimates by averaging or
// nearest-neighbor selection.

#include <vector>

#include "ddisac/geometry.hpp"
#include "ddisac/otfs.hpp"
#include "ddisac/types.hpp"

namespace ddisac {

struct CollinearityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateBearingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Position from ranges to the anchor and two receivers, by pairwise
// subtraction of the squared-distance circle equations. Throws
// CollinearityError when the three nodes are (near-)collinear.
Vec2 triangulate(double range_anchor, double range_j, double range_k, const Vec2& anchor, const Vec2& node_j,
                 const Vec2& node_k);

// Velocity from two radial velocities (positive toward the node) observed
// at node_j / node_k, given the target position. Throws
// DegenerateBearingError when the two bearings are (near-)parallel.
Vec2 solve_velocity(const Vec2& position, double vrad_j, double vrad_k, const Vec2& node_j, const Vec2& node_k);

// Componentwise mean; throws on an empty list.
Vec2 fuse_average(const std::vector<Vec2>& estimates);

struct Fused2 {
    Vec2 value{0.0, 0.0};
    int contributing = 0;  // points averaged into the result
};

// Picks the estimate with the most neighbors within xi (ties to the
// smallest index) and averages it with its neighbor set.
Fused2 fuse_nearest_neighbor(const std::vector<Vec2>& estimates, double xi);

// Position + velocity fused across triangulation combinations.
struct FusedEstimate {
    Vec2 position{0.0, 0.0};
    Vec2 velocity{0.0, 0.0};
    int contributing_pairs = 0;
};

// Delay/Doppler per receiver (index 0 = anchor) implied by a fused target
// state; the inverse of the geometry-to-channel mapping. Gains are re-fit
// separately against the received frames (see refit_gains).
std::vector<DelayDoppler> reconstruct_channel_params(const TargetState& fused, const NodeLayout& layout,
                                                     const OtfsConfig& cfg);

}  // namespace ddisac
