#pragma once

// Shared planar geometry: node layout, target kinematic state, and the
// range/radial-velocity to delay/Doppler mapping used by both the channel
// synthesis and the sensing-side inverse.

#include <cmath>
#include <vector>

#include "ddisac/types.hpp"

namespace ddisac {

// One moving point target in the plane.
struct TargetState {
    Vec2 position{0.0, 0.0};   // m
    Vec2 velocity{0.0, 0.0};   // m/s
};

// Anchor (transmitter, receiver 0) plus Z auxiliary receivers inside the
// square region [0, region_side]^2.
struct NodeLayout {
    Vec2 anchor{0.0, 0.0};
    std::vector<Vec2> receivers;
    int antennas_per_node = 1;
    double region_side = 400.0;

    int num_receivers() const { return static_cast<int>(receivers.size()); }
    // Node position by index: 0 is the anchor, j >= 1 the (j-1)th receiver.
    const Vec2& node(int j) const { return j == 0 ? anchor : receivers.at(static_cast<std::size_t>(j - 1)); }
    void validate() const;
};

// Radial velocity of the target toward `node`: positive when closing.
inline double radial_velocity(const TargetState& target, const Vec2& node) {
    const Vec2 diff = node - target.position;
    const double range = diff.norm();
    if (range <= 0.0) return 0.0;
    return target.velocity.dot(diff) / range;
}

struct DelayDoppler {
    double delay_s = 0.0;
    double doppler_hz = 0.0;
};

// Monostatic echo at the anchor: two-way range and Doppler.
inline DelayDoppler monostatic_dd(const TargetState& target, const Vec2& anchor, double carrier_freq_hz) {
    const double range = (target.position - anchor).norm();
    const double vrad = radial_velocity(target, anchor);
    return {2.0 * range / kSpeedOfLight, 2.0 * vrad * carrier_freq_hz / kSpeedOfLight};
}

// Bistatic leg anchor -> target -> receiver. The Doppler accumulates the
// radial rates of both legs; the delay spans both path segments.
inline DelayDoppler bistatic_dd(const TargetState& target, const Vec2& anchor, const Vec2& receiver,
                                double carrier_freq_hz) {
    const double range_anchor = (target.position - anchor).norm();
    const double range_rx = (target.position - receiver).norm();
    const double vrad = radial_velocity(target, anchor) + radial_velocity(target, receiver);
    return {(range_anchor + range_rx) / kSpeedOfLight, vrad * carrier_freq_hz / kSpeedOfLight};
}

}  // namespace ddisac
