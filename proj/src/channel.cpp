#include "ddisac/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <unsupported/Eigen/FFT>

namespace ddisac {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_integer(double v) { return v == std::floor(v); }

double wrap_bins(double bins, int grid) {
    double w = std::fmod(bins, static_cast<double>(grid));
    if (w < 0.0) w += grid;
    // fmod can return grid itself after the negative fix-up
    if (w >= grid) w -= grid;
    return w;
}

// Band-limited circular shift by a fractional number of samples via a
// signed-frequency phase ramp. Reduces to the exact cyclic shift for
// integer delays.
CVec fractional_shift(const CVec& s, double delay_samples) {
    const int n = static_cast<int>(s.size());
    Eigen::FFT<double> fft;
    std::vector<cplx> in(s.data(), s.data() + n), freq(static_cast<std::size_t>(n));
    fft.fwd(freq, in);
    for (int f = 0; f < n; ++f) {
        const double fs = (f <= n / 2) ? f : f - n;  // signed frequency
        const double ang = -kTwoPi * fs * delay_samples / n;
        freq[static_cast<std::size_t>(f)] *= cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> out(static_cast<std::size_t>(n));
    fft.inv(out, freq);
    return Eigen::Map<const CVec>(out.data(), n);
}

}  // namespace

double signed_doppler_bins(double doppler_bins, int doppler_grid) {
    return doppler_bins >= doppler_grid / 2.0 ? doppler_bins - doppler_grid : doppler_bins;
}

PathParams path_from_bins(cplx gain, double delay_bins, double doppler_bins, const OtfsConfig& cfg) {
    PathParams p;
    p.gain = gain;
    p.delay_bins = wrap_bins(delay_bins, cfg.delay_bins);
    p.doppler_bins = wrap_bins(doppler_bins, cfg.doppler_bins);
    p.delay_s = p.delay_bins * cfg.delay_resolution();
    p.doppler_hz = signed_doppler_bins(p.doppler_bins, cfg.doppler_bins) * cfg.doppler_resolution();
    return p;
}

PathParams path_from_physical(cplx gain, double delay_s, double doppler_hz, const OtfsConfig& cfg, bool snap) {
    if (delay_s < 0.0) throw std::invalid_argument("path_from_physical: negative delay");
    double delay_bins = delay_s / cfg.delay_resolution();
    double doppler_bins = doppler_hz / cfg.doppler_resolution();
    if (snap) {
        delay_bins = std::round(delay_bins);
        doppler_bins = std::round(doppler_bins);
    }
    // Cyclic delay aliasing is physically meaningless: reject instead of wrapping.
    if (delay_bins >= cfg.delay_bins)
        throw RangeAmbiguityError("path delay " + std::to_string(delay_s) +
                                  " s exceeds the unambiguous frame span of " +
                                  std::to_string(cfg.delay_bins * cfg.delay_resolution()) + " s");
    if (std::abs(doppler_bins) >= cfg.doppler_bins / 2.0)
        throw RangeAmbiguityError("path Doppler " + std::to_string(doppler_hz) +
                                  " Hz exceeds half the unambiguous Doppler span");
    PathParams p;
    p.gain = gain;
    p.delay_bins = delay_bins;
    p.doppler_bins = wrap_bins(doppler_bins, cfg.doppler_bins);
    if (snap) {
        p.delay_s = p.delay_bins * cfg.delay_resolution();
        p.doppler_hz = signed_doppler_bins(p.doppler_bins, cfg.doppler_bins) * cfg.doppler_resolution();
    } else {
        p.delay_s = delay_s;
        p.doppler_hz = doppler_hz;
    }
    return p;
}

void ChannelRealization::validate() const {
    if (paths.empty()) throw std::invalid_argument("ChannelRealization: at least one path required");
    if (noise_var < 0.0) throw std::invalid_argument("ChannelRealization: negative noise variance");
    for (const auto& p : paths)
        if (!std::isfinite(p.gain.real()) || !std::isfinite(p.gain.imag()))
            throw std::invalid_argument("ChannelRealization: non-finite path gain");
}

CVec delay_doppler_shift(const CVec& s, double delay_bins, double doppler_bins, int frame_len) {
    if (s.size() != frame_len) throw DimensionError("delay_doppler_shift: frame length mismatch");
    // Doppler ramp first (Delta^k), then the cyclic delay (Pi^l).
    CVec ramped(frame_len);
    for (int n = 0; n < frame_len; ++n) {
        const double ang = kTwoPi * doppler_bins * n / frame_len;
        ramped(n) = s(n) * cplx(std::cos(ang), std::sin(ang));
    }
    if (is_integer(delay_bins)) {
        const int l = static_cast<int>(wrap_bins(delay_bins, frame_len));
        CVec out(frame_len);
        for (int n = 0; n < frame_len; ++n) out(n) = ramped((n - l + frame_len) % frame_len);
        return out;
    }
    return fractional_shift(ramped, delay_bins);
}

CVec delay_doppler_shift_adjoint(const CVec& s, double delay_bins, double doppler_bins, int frame_len) {
    if (s.size() != frame_len) throw DimensionError("delay_doppler_shift_adjoint: frame length mismatch");
    // (Pi^l Delta^k)^H = Delta^{-k} Pi^{-l}: inverse shift, conjugate ramp.
    CVec advanced(frame_len);
    if (is_integer(delay_bins)) {
        const int l = static_cast<int>(wrap_bins(delay_bins, frame_len));
        for (int n = 0; n < frame_len; ++n) advanced(n) = s((n + l) % frame_len);
    } else {
        advanced = fractional_shift(s, -delay_bins);
    }
    CVec out(frame_len);
    for (int n = 0; n < frame_len; ++n) {
        const double ang = -kTwoPi * doppler_bins * n / frame_len;
        out(n) = advanced(n) * cplx(std::cos(ang), std::sin(ang));
    }
    return out;
}

CVec apply_channel(const CVec& s, const ChannelRealization& ch, const OtfsConfig& cfg, std::uint64_t noise_seed) {
    ch.validate();
    const int mn = cfg.grid_size();
    if (s.size() != mn) throw DimensionError("apply_channel: expected a CP-free frame of M*N samples");
    CVec r = CVec::Zero(mn);
    for (const auto& p : ch.paths) r += p.gain * delay_doppler_shift(s, p.delay_bins, p.doppler_bins, mn);
    if (ch.noise_var > 0.0) {
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(ch.noise_var / 2.0));
        for (int n = 0; n < mn; ++n) r(n) += cplx(gauss(rng), gauss(rng));
    }
    return r;
}

DdChannelOp::DdChannelOp(OtfsConfig cfg, std::vector<PathParams> paths)
    : cfg_(std::move(cfg)), paths_(std::move(paths)) {
    cfg_.validate();
}

CVec DdChannelOp::apply(const CVec& d) const {
    const int mn = cfg_.grid_size();
    if (d.size() != mn) throw DimensionError("DdChannelOp::apply: length mismatch");
    const CVec s = dd_to_time(d, cfg_);
    CVec acc = CVec::Zero(mn);
    for (const auto& p : paths_) acc += p.gain * delay_doppler_shift(s, p.delay_bins, p.doppler_bins, mn);
    return time_to_dd(acc, cfg_);
}

CVec DdChannelOp::apply_adjoint(const CVec& y) const {
    const int mn = cfg_.grid_size();
    if (y.size() != mn) throw DimensionError("DdChannelOp::apply_adjoint: length mismatch");
    // Hbar^H = (F_N^H (x) I)^H H^H (F_N (x) I)^H, same unitary sandwich reversed
    const CVec s = dd_to_time(y, cfg_);
    CVec acc = CVec::Zero(mn);
    for (const auto& p : paths_)
        acc += std::conj(p.gain) * delay_doppler_shift_adjoint(s, p.delay_bins, p.doppler_bins, mn);
    return time_to_dd(acc, cfg_);
}

double DdChannelOp::gram_trace() const {
    // tr(Hbar^H Hbar) = sum_{q,q'} conj(h_q) h_q' tr(T_q^H T_q'); for integer
    // bins the cross trace is MN when the bins coincide and 0 otherwise.
    const double mn = cfg_.grid_size();
    cplx acc = 0.0;
    for (const auto& a : paths_)
        for (const auto& b : paths_)
            if (a.delay_bins == b.delay_bins && a.doppler_bins == b.doppler_bins)
                acc += std::conj(a.gain) * b.gain * mn;
    return acc.real();
}

CMat DdChannelOp::dense() const {
    const int mn = cfg_.grid_size();
    CMat h(mn, mn);
    CVec e = CVec::Zero(mn);
    for (int c = 0; c < mn; ++c) {
        e(c) = 1.0;
        h.col(c) = apply(e);
        e(c) = 0.0;
    }
    return h;
}

double DdChannelOp::gain_energy() const {
    double e = 0.0;
    for (const auto& p : paths_) e += std::norm(p.gain);
    return e;
}

double DdChannelOp::gain_abs_sum() const {
    double e = 0.0;
    for (const auto& p : paths_) e += std::abs(p.gain);
    return e;
}

CMat effective_dd_matrix(const ChannelRealization& ch, const OtfsConfig& cfg) {
    ch.validate();
    return DdChannelOp(cfg, ch.paths).dense();
}

std::vector<ChannelRealization> geometry_to_channel(const NodeLayout& layout,
                                                    const std::vector<TargetState>& targets,
                                                    const OtfsConfig& cfg,
                                                    const GeometryChannelOptions& opt) {
    layout.validate();
    if (targets.empty()) throw std::invalid_argument("geometry_to_channel: no targets");
    std::vector<ChannelRealization> channels;
    channels.reserve(static_cast<std::size_t>(layout.num_receivers()) + 1);
    for (int j = 0; j <= layout.num_receivers(); ++j) {
        ChannelRealization ch;
        ch.receiver_id = j;
        for (int i = 0; i < static_cast<int>(targets.size()); ++i) {
            const auto& tgt = targets[static_cast<std::size_t>(i)];
            const DelayDoppler dd = (j == 0) ? monostatic_dd(tgt, layout.anchor, cfg.carrier_freq)
                                             : bistatic_dd(tgt, layout.anchor, layout.node(j), cfg.carrier_freq);
            double amp = 1.0;
            if (opt.inverse_square_gain) {
                const double rho = std::max(1.0, (tgt.position - layout.node(j)).norm() *
                                                     (tgt.position - layout.anchor).norm());
                amp = 1.0 / rho;  // free-space two-leg amplitude law
            }
            std::mt19937_64 rng(mix_seed(opt.phase_seed, static_cast<std::uint64_t>(j),
                                         static_cast<std::uint64_t>(i)));
            const double phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
            const cplx gain = amp * cplx(std::cos(phase), std::sin(phase));
            ch.paths.push_back(path_from_physical(gain, dd.delay_s, dd.doppler_hz, cfg, opt.snap_to_grid));
        }
        channels.push_back(std::move(ch));
    }
    return channels;
}

}  // namespace ddisac
