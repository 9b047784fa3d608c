#pragma once

// Reproducible scenarios: random vehicle trajectories with bounded speed,
// acceleration and region, plus node layouts (random or orthogonal-span).
// Every draw is keyed off (master_seed, target_index) so adding targets
// never perturbs existing trajectories.

#include <cstdint>
#include <string>
#include <vector>

#include "ddisac/geometry.hpp"
#include "ddisac/types.hpp"

namespace ddisac {

struct TrajectoryConfig {
    int n_steps = 20;
    double dt = 0.5;                   // s
    double accel_noise_std = 0.5;      // sigma_a; declared by the source model but unused by it (jerk drives accel)
    double jerk_std = 0.2;             // m/s^2 added to acceleration per step
    double heading_std = 0.06981317007977318;  // pi/45 rad, small-turn noise
    double sudden_turn_prob = 0.1;
    double sudden_turn_std = 0.5235987755982988;  // pi/6 rad
    double region_side = 400.0;        // m
    double speed_init_min = 10.0, speed_init_max = 15.0;  // m/s
    double accel_min = -2.0, accel_max = 2.0;             // m/s^2
    double speed_min = 5.0, speed_max = 20.0;             // m/s

    void validate() const;
};

struct Trajectory {
    Eigen::MatrixX2d positions;   // n_steps x 2, m
    Eigen::MatrixX2d velocities;  // n_steps x 2, m/s
    int sudden_turns = 0;

    TargetState state_at(int step) const;
};

// Jerk -> accel clamp -> speed update -> speed clamp -> turn -> velocity
// -> position update clamped to the region (heading reflects off walls).
Trajectory generate_trajectory(const TrajectoryConfig& cfg, std::uint64_t seed);

enum class LayoutMode { kRandom, kOrthogonalOptimal };

LayoutMode layout_mode_from_string(const std::string& name);
std::string to_string(LayoutMode mode);

// Random mode rejects layouts whose anchor/receiver triples are
// near-collinear (|D| < 0.01 L^2); orthogonal mode spans the axes, with
// receivers beyond two split evenly between the two axis points.
NodeLayout generate_layout(LayoutMode mode, int num_receivers, int antennas_per_node, double region_side,
                           std::uint64_t seed);

// A fully regenerable scenario: config + seeds + the realized geometry.
struct Scenario {
    std::uint64_t master_seed = 1;
    LayoutMode layout_mode = LayoutMode::kOrthogonalOptimal;
    int num_receivers = 2;
    int antennas_per_node = 1;
    TrajectoryConfig trajectory_cfg;
    NodeLayout layout;
    std::vector<Trajectory> trajectories;
};

Scenario make_scenario(const TrajectoryConfig& cfg, LayoutMode mode, int num_receivers, int antennas_per_node,
                       int num_targets, std::uint64_t master_seed);

void save_scenario(const Scenario& scenario, const std::string& path);
Scenario load_scenario(const std::string& path);

// Regenerates from the stored seeds and compares bit-exactly.
bool replay_matches(const Scenario& scenario);

}  // namespace ddisac
