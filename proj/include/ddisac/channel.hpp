#pragma once

// Doubly-dispersive multipath channel over one OTFS frame.
//
// Each path applies a cyclic delay (powers of the MN forward-shift
// permutation) and a Doppler phase ramp diag(c^0..c^{MN-1}), c =
// exp(i 2 pi / MN), to the time-domain frame. Bin indices are kept as
// doubles so that oversampled (fractional-bin) grids reuse the same
// operator; integer bins take the exact permutation fast path.

#include <cstdint>
#include <vector>

#include "ddisac/geometry.hpp"
#include "ddisac/otfs.hpp"
#include "ddisac/types.hpp"

namespace ddisac {

struct RangeAmbiguityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One propagation path. delay_bins in [0, M), doppler_bins in [0, N)
// (wrap-around convention: negative Doppler stored as N - |k|). The signed
// physical doppler_hz is kept alongside for reporting.
struct PathParams {
    cplx gain{0.0, 0.0};
    double delay_s = 0.0;
    double doppler_hz = 0.0;
    double delay_bins = 0.0;
    double doppler_bins = 0.0;
};

// Build a path from grid indices (exact on-grid delay/Doppler).
PathParams path_from_bins(cplx gain, double delay_bins, double doppler_bins, const OtfsConfig& cfg);

// Build a path from physical delay/Doppler; snaps to the nearest bin when
// requested. Throws RangeAmbiguityError when the delay exceeds the frame.
PathParams path_from_physical(cplx gain, double delay_s, double doppler_hz, const OtfsConfig& cfg, bool snap);

// Doppler bin in [0, N) -> signed physical Doppler (bins >= N/2 are negative).
double signed_doppler_bins(double doppler_bins, int doppler_grid);

struct ChannelRealization {
    std::vector<PathParams> paths;
    int receiver_id = 0;     // 0 = anchor (monostatic), 1..Z bistatic
    double noise_var = 0.0;  // per-sample complex noise variance sigma_j^2

    void validate() const;
};

// Pi^l Delta^k s in the time domain; integer bins use the exact cyclic
// shift, fractional bins a band-limited (DFT phase ramp) shift.
CVec delay_doppler_shift(const CVec& s, double delay_bins, double doppler_bins, int frame_len);

// Adjoint (Pi^l Delta^k)^H s.
CVec delay_doppler_shift_adjoint(const CVec& s, double delay_bins, double doppler_bins, int frame_len);

// r = sum_q h_q Pi^{l_q} Delta^{k_q} s + n,  n ~ CN(0, sigma^2 I) from seed.
CVec apply_channel(const CVec& s, const ChannelRealization& ch, const OtfsConfig& cfg, std::uint64_t noise_seed);

// Matrix-free effective delay-Doppler channel
//   Hbar = sum_q h_q (F_N (x) P_rx) Pi^{l_q} Delta^{k_q} (F_N^H (x) P_tx),
// satisfying demodulate(apply_channel(modulate(d))) = Hbar d + noise.
class DdChannelOp {
  public:
    DdChannelOp(OtfsConfig cfg, std::vector<PathParams> paths);

    CVec apply(const CVec& d) const;          // Hbar d
    CVec apply_adjoint(const CVec& y) const;  // Hbar^H y
    CMat dense() const;                       // explicit MN x MN matrix

    const std::vector<PathParams>& paths() const { return paths_; }
    const OtfsConfig& config() const { return cfg_; }
    double gain_energy() const;    // sum_q |h_q|^2
    double gain_abs_sum() const;   // sum_q |h_q|, upper-bounds the operator norm
    double gram_trace() const;     // tr(Hbar^H Hbar), exact for integer bins

  private:
    OtfsConfig cfg_;
    std::vector<PathParams> paths_;
};

CMat effective_dd_matrix(const ChannelRealization& ch, const OtfsConfig& cfg);

struct GeometryChannelOptions {
    bool snap_to_grid = true;            // snap delays/Dopplers to the nearest bin
    bool inverse_square_gain = false;    // |h| ~ 1/rho^2 instead of unit magnitude
    std::uint64_t phase_seed = 0;        // uniform random path phases
};

// Per-receiver channels for the given layout and targets. Receiver 0 is the
// anchor's monostatic echo channel; receivers j >= 1 see the bistatic legs.
// noise_var is left at 0 for the caller to set from the SNR definition.
std::vector<ChannelRealization> geometry_to_channel(const NodeLayout& layout,
                                                    const std::vector<TargetState>& targets,
                                                    const OtfsConfig& cfg,
                                                    const GeometryChannelOptions& opt);

}  // namespace ddisac
