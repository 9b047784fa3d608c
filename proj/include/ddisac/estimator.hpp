#pragma once

// Per-receiver delay-Doppler parameter estimation.
//
// Active sensing: sequential correlation maximization (matching-pursuit
// style) against the known transmit frame, subtracting each found path
// from the residual before searching for the next. Passive sensing: the
// same machinery seeded with the pilot-only probe, followed by an
// alternating data-detection / channel-re-estimation outer loop.
//
// Contract-wise the search evaluates |(T(tau,nu) d)^H residual|^2 on the
// delay-Doppler grid; the FFT cross-correlation below is an algebraically
// identical evaluation order, not an approximation. Argmax ties resolve to
// the smallest delay bin, then the smallest Doppler bin.

#include <cstdint>
#include <utility>
#include <vector>

#include "ddisac/channel.hpp"
#include "ddisac/otfs.hpp"
#include "ddisac/types.hpp"

namespace ddisac {

struct StepSizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Delay/Doppler search grid. oversample > 1 evaluates fractional bins at
// 1/oversample spacing; the default covers exactly the integer bins.
struct SearchGrid {
    int delay_points = 0;
    int doppler_points = 0;
    int oversample = 1;

    static SearchGrid for_config(const OtfsConfig& cfg, int oversample = 1);
    void validate(const OtfsConfig& cfg) const;
};

struct PathEstimate {
    cplx gain{0.0, 0.0};
    double delay_s = 0.0;
    double doppler_hz = 0.0;        // signed
    double delay_bins = 0.0;
    double doppler_bins = 0.0;      // wrapped to [0, N)
    double correlation_peak = 0.0;  // |(T d)^H residual|^2 at the argmax
};

// Paths in decreasing correlation-peak order; requires ||d|| > 0 and
// num_paths within the grid capacity.
std::vector<PathEstimate> estimate_paths_active(const CVec& y, const CVec& d, int num_paths,
                                                const OtfsConfig& cfg, const SearchGrid& grid);

// Same sequential procedure with the pilot-only grid as the probe, the
// information data acting as interference.
std::vector<PathEstimate> coarse_estimate_passive(const CVec& y, const PilotSpec& pilot, int num_paths,
                                                  const OtfsConfig& cfg, const SearchGrid& grid);

// Least-squares gains at fixed (delay, Doppler) bins, fitted sequentially
// against the residual of the previously fitted paths.
std::vector<cplx> refit_gains(const CVec& y, const CVec& d,
                              const std::vector<std::pair<double, double>>& bins, const OtfsConfig& cfg);

// Ranges and radial velocities from per-receiver path estimates.
// Receiver 0 must be the anchor's monostatic estimate set; entry [j][i]
// corresponds to path/target i seen from receiver j.
struct SensingReport {
    struct Entry {
        double range = 0.0;            // m
        double radial_velocity = 0.0;  // m/s, positive toward the node
        bool clamped = false;          // bistatic range went negative pre-clamp
    };
    std::vector<std::vector<Entry>> by_receiver;
};

SensingReport extract_target_params(const std::vector<std::vector<PathEstimate>>& per_receiver,
                                    double carrier_freq);

// Regularized LS data detection by gradient descent,
//   d_{t+1} = d_t - eta (2 Hbar^H (Hbar d_t - y) + 2 mu d_t),
// stopping when the step norm falls below eps_d. Negative option values
// select the documented defaults.
struct DetectOptions {
    double mu = -1.0;      // default 1e-2 tr(Hbar^H Hbar)/(MN)
    double eta = -1.0;     // default 1/(2 lambda_max + 2 mu), power-iteration bound
    double eps_d = -1.0;   // default 1e-6 sqrt(MN)
    int max_iter = 20000;
};

struct DetectResult {
    CVec data;
    int iterations = 0;
    bool converged = false;
};

DetectResult detect_data(const CVec& y, const DdChannelOp& channel, const DetectOptions& opt = {});

double default_mu(const DdChannelOp& channel);
double default_eta(const DdChannelOp& channel, double mu);

// Convergence thresholds of the passive outer loop; gain/delay/Doppler
// thresholds are relative to the current estimate norms.
struct PassiveThresholds {
    double eps_d = -1.0;
    double eps_h_rel = 1e-3;
    double eps_tau_rel = 1e-3;
    double eps_nu_rel = 1e-3;
};

struct PassiveResult {
    std::vector<PathEstimate> paths;
    std::vector<std::uint8_t> bits;
    int outer_iterations = 0;
    bool converged = false;
    double residual = 0.0;  // ||y - Hbar(theta) d_hat|| of the accepted state
};

// Alternates data detection, symbol projection and active re-estimation
// with the detected frame until the parameter deltas fall below the
// thresholds. Outer iterations that would increase the data-fit residual
// are rejected and terminate the loop; after max_outer the best-so-far
// state is returned with converged = false.
PassiveResult passive_outer_loop(const CVec& y, const PilotSpec& pilot, int num_paths,
                                 const OtfsConfig& cfg, const SearchGrid& grid,
                                 const PassiveThresholds& thresholds, int max_outer,
                                 const DetectOptions& detect_opt = {});

}  // namespace ddisac
