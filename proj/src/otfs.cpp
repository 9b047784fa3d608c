#include "ddisac/otfs.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ddisac {

namespace {

int int_log2(int v) {
    int b = 0;
    while ((1 << b) < v) ++b;
    return b;
}

int gray_decode(int g) {
    int b = 0;
    for (; g; g >>= 1) b ^= g;
    return b;
}

}  // namespace

void OtfsConfig::validate() const {
    if (delay_bins <= 0 || doppler_bins <= 0)
        throw std::invalid_argument("OtfsConfig: delay_bins and doppler_bins must be positive");
    if (subcarrier_spacing <= 0.0) throw std::invalid_argument("OtfsConfig: subcarrier_spacing must be positive");
    if (carrier_freq <= 0.0) throw std::invalid_argument("OtfsConfig: carrier_freq must be positive");
    if (cp_len < 0) throw std::invalid_argument("OtfsConfig: cp_len must be non-negative");
    if (qam_order != 4 && qam_order != 16 && qam_order != 64)
        throw std::invalid_argument("OtfsConfig: qam_order must be 4, 16 or 64");
}

int OtfsConfig::bits_per_frame() const { return grid_size() * int_log2(qam_order); }

double PilotSpec::amplitude(const OtfsConfig& cfg) const {
    return std::sqrt(static_cast<double>(cfg.grid_size()) * power);
}

CMat PilotSpec::grid(const OtfsConfig& cfg) const {
    if (delay_idx < 0 || delay_idx >= cfg.delay_bins || doppler_idx < 0 || doppler_idx >= cfg.doppler_bins)
        throw std::out_of_range("PilotSpec: pilot index outside the grid");
    CMat g = CMat::Zero(cfg.delay_bins, cfg.doppler_bins);
    g(delay_idx, doppler_idx) = amplitude(cfg);
    return g;
}

CMat dft_matrix(int n) {
    CMat f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const double ang = -2.0 * std::numbers::pi * j * k / n;
            f(j, k) = cplx(std::cos(ang), std::sin(ang)) * scale;
        }
    return f;
}

CVec vec_grid(const CMat& grid) {
    return CVec(Eigen::Map<const CVec>(grid.data(), grid.size()));
}

CMat unvec_grid(const CVec& v, int rows, int cols) {
    if (v.size() != static_cast<Eigen::Index>(rows) * cols)
        throw DimensionError("unvec_grid: vector length " + std::to_string(v.size()) + " != " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    return CMat(Eigen::Map<const CMat>(v.data(), rows, cols));
}

CVec dd_to_time(const CVec& d, const OtfsConfig& cfg) {
    // (F_N^H (x) I_M) vec(D) == vec(D F_N^H): an inverse N-point DFT per delay row.
    return vec_grid(unvec_grid(d, cfg.delay_bins, cfg.doppler_bins) * dft_matrix(cfg.doppler_bins).adjoint());
}

CVec time_to_dd(const CVec& s, const OtfsConfig& cfg) {
    return vec_grid(unvec_grid(s, cfg.delay_bins, cfg.doppler_bins) * dft_matrix(cfg.doppler_bins));
}

CVec modulate(const CMat& grid, const OtfsConfig& cfg) {
    cfg.validate();
    if (grid.rows() != cfg.delay_bins || grid.cols() != cfg.doppler_bins)
        throw DimensionError("modulate: grid shape mismatch");
    const CVec s = dd_to_time(vec_grid(grid), cfg);
    if (cfg.cp_len == 0) return s;
    CVec out(s.size() + cfg.cp_len);
    out.head(cfg.cp_len) = s.tail(cfg.cp_len);
    out.tail(s.size()) = s;
    return out;
}

CMat demodulate(const CVec& r, const OtfsConfig& cfg) {
    cfg.validate();
    const int mn = cfg.grid_size();
    CVec body;
    if (r.size() == mn)
        body = r;
    else if (r.size() == mn + cfg.cp_len && cfg.cp_len > 0)
        body = r.tail(mn);
    else
        throw DimensionError("demodulate: expected " + std::to_string(mn) + " or " +
                             std::to_string(mn + cfg.cp_len) + " samples, got " + std::to_string(r.size()));
    return unvec_grid(time_to_dd(body, cfg), cfg.delay_bins, cfg.doppler_bins);
}

CMat embed_pilot(const CMat& data, const PilotSpec& pilot, const OtfsConfig& cfg) {
    if (data.rows() != cfg.delay_bins || data.cols() != cfg.doppler_bins)
        throw DimensionError("embed_pilot: grid shape mismatch");
    CMat out = data;
    out += pilot.grid(cfg);  // grid() range-checks the pilot index
    return out;
}

std::vector<cplx> qam_alphabet(int order) {
    if (order != 4 && order != 16 && order != 64) throw std::invalid_argument("qam_alphabet: order must be 4, 16 or 64");
    const int bits_per_axis = int_log2(order) / 2;
    const int levels = 1 << bits_per_axis;
    // unit average energy: E|x|^2 = 2(levels^2 - 1)/3 before scaling
    const double scale = 1.0 / std::sqrt(2.0 * (levels * levels - 1) / 3.0);
    std::vector<cplx> alphabet(static_cast<std::size_t>(order));
    for (int idx = 0; idx < order; ++idx) {
        const int gi = idx >> bits_per_axis;          // first bits: in-phase
        const int gq = idx & (levels - 1);            // last bits: quadrature
        const double re = 2 * gray_decode(gi) - (levels - 1);
        const double im = 2 * gray_decode(gq) - (levels - 1);
        alphabet[static_cast<std::size_t>(idx)] = cplx(re, im) * scale;
    }
    return alphabet;
}

int nearest_symbol_index(cplx x, const std::vector<cplx>& alphabet) {
    int best = 0;
    double best_d = std::norm(x - alphabet[0]);
    for (int i = 1; i < static_cast<int>(alphabet.size()); ++i) {
        const double d = std::norm(x - alphabet[static_cast<std::size_t>(i)]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

CMat map_bits(const std::vector<std::uint8_t>& bits, const OtfsConfig& cfg) {
    cfg.validate();
    const int bps = int_log2(cfg.qam_order);
    if (static_cast<int>(bits.size()) != cfg.bits_per_frame())
        throw DimensionError("map_bits: expected " + std::to_string(cfg.bits_per_frame()) + " bits, got " +
                             std::to_string(bits.size()));
    const auto alphabet = qam_alphabet(cfg.qam_order);
    CVec symbols(cfg.grid_size());
    for (int s = 0; s < cfg.grid_size(); ++s) {
        int idx = 0;
        for (int b = 0; b < bps; ++b) idx = (idx << 1) | bits[static_cast<std::size_t>(s * bps + b)];
        symbols(s) = alphabet[static_cast<std::size_t>(idx)];
    }
    return unvec_grid(symbols, cfg.delay_bins, cfg.doppler_bins);
}

std::vector<std::uint8_t> demap_bits(const CMat& grid, const OtfsConfig& cfg) {
    cfg.validate();
    if (grid.rows() != cfg.delay_bins || grid.cols() != cfg.doppler_bins)
        throw DimensionError("demap_bits: grid shape mismatch");
    const int bps = int_log2(cfg.qam_order);
    const auto alphabet = qam_alphabet(cfg.qam_order);
    const CVec symbols = vec_grid(grid);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(cfg.bits_per_frame()));
    for (int s = 0; s < cfg.grid_size(); ++s) {
        const int idx = nearest_symbol_index(symbols(s), alphabet);
        for (int b = 0; b < bps; ++b)
            bits[static_cast<std::size_t>(s * bps + b)] = static_cast<std::uint8_t>((idx >> (bps - 1 - b)) & 1);
    }
    return bits;
}

CMat project_to_alphabet(const CMat& grid, const OtfsConfig& cfg) {
    const auto alphabet = qam_alphabet(cfg.qam_order);
    CMat out(grid.rows(), grid.cols());
    for (Eigen::Index c = 0; c < grid.cols(); ++c)
        for (Eigen::Index r = 0; r < grid.rows(); ++r)
            out(r, c) = alphabet[static_cast<std::size_t>(nearest_symbol_index(grid(r, c), alphabet))];
    return out;
}

}  // namespace ddisac
