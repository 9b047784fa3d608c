#pragma once

// OTFS modem: maps a delay-Doppler symbol grid to/from the time-domain
// sample stream, with superimposed single-bin pilot and Gray-coded QAM.
//
// Conventions (fixed project-wide):
//   * grids are M x N complex matrices, delay along rows, Doppler along
//     columns; vec() stacks columns (Eigen's native order);
//   * all DFTs are unitary (1/sqrt(N) both ways), so the modem conserves
//     energy and modulate/demodulate are exact inverses;
//   * pulse shaping is rectangular: the tx/rx pulse matrices are kept in
//     the data path as diagonal operators but default to identity.

#include <cstdint>
#include <vector>

#include "ddisac/types.hpp"

namespace ddisac {

struct OtfsConfig {
    int delay_bins = 256;                  // M, subcarriers
    int doppler_bins = 16;                 // N, symbols
    double subcarrier_spacing = 240e3;     // Hz
    double carrier_freq = 30e9;            // Hz
    int cp_len = 0;                        // cyclic-prefix samples
    int qam_order = 4;                     // 4, 16 or 64

    int grid_size() const { return delay_bins * doppler_bins; }
    double symbol_duration() const { return 1.0 / subcarrier_spacing; }              // T, T*delta_f = 1
    double frame_duration() const { return doppler_bins * symbol_duration(); }       // N*T
    double delay_resolution() const { return 1.0 / (delay_bins * subcarrier_spacing); }
    double doppler_resolution() const { return 1.0 / frame_duration(); }
    int bits_per_frame() const;

    void validate() const;  // throws std::invalid_argument on bad fields
};

// Single superimposed pilot: one nonzero grid entry of value
// sqrt(M*N*power) at (delay_idx, doppler_idx), average grid power = power.
struct PilotSpec {
    int delay_idx = 0;
    int doppler_idx = 0;
    double power = 1.0;  // sigma_P^2, linear

    double amplitude(const OtfsConfig& cfg) const;
    CMat grid(const OtfsConfig& cfg) const;
};

// Unitary DFT matrix, F[j][k] = exp(-i 2 pi j k / n) / sqrt(n).
CMat dft_matrix(int n);

// Column-major vectorization and its inverse.
CVec vec_grid(const CMat& grid);
CMat unvec_grid(const CVec& v, int rows, int cols);

// CP-free frame transforms shared by the modem and the channel operator.
CVec dd_to_time(const CVec& d, const OtfsConfig& cfg);  // (F_N^H (x) P_tx) d
CVec time_to_dd(const CVec& s, const OtfsConfig& cfg);  // (F_N (x) P_rx) s

// d -> s = (F_N^H (x) P_tx) vec(D); prepends cp_len samples when configured.
CVec modulate(const CMat& grid, const OtfsConfig& cfg);

// r -> Y via (F_N (x) P_rx); accepts a frame with or without cyclic prefix.
CMat demodulate(const CVec& r, const OtfsConfig& cfg);

// data + pilot grid; throws if the pilot index is out of range.
CMat embed_pilot(const CMat& data, const PilotSpec& pilot, const OtfsConfig& cfg);

// Gray-mapped unit-average-energy QAM alphabet, indexed by bit-pattern value.
std::vector<cplx> qam_alphabet(int order);

// Nearest constellation point; ties resolved toward the smallest index.
int nearest_symbol_index(cplx x, const std::vector<cplx>& alphabet);

// bits (M*N*log2(order) of them, 0/1) -> grid, column-major symbol order.
CMat map_bits(const std::vector<std::uint8_t>& bits, const OtfsConfig& cfg);

// Nearest-neighbor demapping of a (possibly noisy) grid back to bits.
std::vector<std::uint8_t> demap_bits(const CMat& grid, const OtfsConfig& cfg);

// Per-entry projection onto the QAM alphabet (symbol-wise demodulation).
CMat project_to_alphabet(const CMat& grid, const OtfsConfig& cfg);

}  // namespace ddisac
