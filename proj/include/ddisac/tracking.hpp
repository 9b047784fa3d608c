#pragma once

// Correlated-random-walk motion model (discretized mean-reverting OU
// velocity process) and the matching Kalman filter.
//
// State order is [alpha, beta, v_x, v_y]. The transition has the block form
//   [ I_2  phi I_2 ]          phi = (1 - e^{-delta dt}) / delta
//   [ 0    e   I_2 ]          e   = e^{-delta dt}
// and the observation matrix is the identity (position and velocity are
// both measured). The posterior covariance uses the Joseph form so it
// stays positive semidefinite under roundoff.

#include <cstdint>

#include "ddisac/geometry.hpp"
#include "ddisac/types.hpp"

namespace ddisac {

struct CrwParams {
    double reversion_rate = 1.5;      // delta, 1/s
    double diffusion = 0.5;           // psi, m s^{-3/2}
    Vec2 mean_velocity{0.0, 0.0};     // omega, m/s
    double dt = 0.5;                  // s

    void validate() const;
    double decay() const;             // e^{-delta dt}
    double position_gain() const;     // (1 - e^{-delta dt}) / delta
};

Mat4 build_transition(const CrwParams& params);

// Exact discretized OU process noise (position/velocity cross terms
// included); diagonal_only zeroes the cross terms for ablation runs.
Mat4 build_process_noise(const CrwParams& params, bool diagonal_only = false);

// One motion-model step: v' = omega + (v - omega) e^{-delta dt} + n_v,
// l' = l + omega dt + (v - omega) phi + n_l, noise drawn from the exact
// discretization covariance.
TargetState crw_step(const TargetState& state, const CrwParams& params, std::uint64_t seed);

struct KfState {
    Vec4 state = Vec4::Zero();            // posterior s^a
    Mat4 covariance = Mat4::Zero();       // posterior P
    Mat4 transition = Mat4::Identity();   // T
    Mat4 observation = Mat4::Identity();  // V
    Mat4 process_noise = Mat4::Zero();    // Q used in the last update
    Mat4 measurement_noise = Mat4::Zero();// R used in the last update
};

// First measurement initializes the state; P_0 = 10 R_0.
KfState kf_init(const Vec4& first_measurement, const Mat4& transition, const Mat4& process_noise,
                const Mat4& measurement_noise);

// One forecast/correct cycle per the standard KF recursion with the
// Joseph-form covariance update. Throws on a singular innovation
// covariance, reporting its condition number.
KfState kf_update(const KfState& prev, const Vec4& measurement, const Mat4& process_noise,
                  const Mat4& measurement_noise);

}  // namespace ddisac
