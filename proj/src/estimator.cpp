#include "ddisac/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

namespace ddisac {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct CorrPeak {
    double delay_bins = 0.0;
    double doppler_bins = 0.0;
    cplx corr{0.0, 0.0};
    double peak = -1.0;  // |corr|^2
};

// Evaluates corr(l, k) = (Pi^l Delta^k probe)^H residual over the whole
// grid via FFT cross-correlation, one Doppler row at a time. Identical to
// the direct inner products because all transforms involved are unitary.
CorrPeak correlation_search(const CVec& probe_time, const CVec& res_time, const OtfsConfig& cfg,
                            const SearchGrid& grid) {
    const int len = cfg.grid_size();
    const int os = grid.oversample;
    const int padded = len * os;
    Eigen::FFT<double> fft;

    std::vector<cplx> buf(res_time.data(), res_time.data() + len);
    std::vector<cplx> res_f(static_cast<std::size_t>(len));
    fft.fwd(res_f, buf);

    std::vector<cplx> w(static_cast<std::size_t>(len)), w_f(static_cast<std::size_t>(len));
    std::vector<cplx> prod(static_cast<std::size_t>(padded)), corr(static_cast<std::size_t>(padded));

    CorrPeak best;
    for (int gk = 0; gk < grid.doppler_points; ++gk) {
        const double k = static_cast<double>(gk) / os;
        for (int m = 0; m < len; ++m) {
            const double ang = kTwoPi * k * m / len;
            w[static_cast<std::size_t>(m)] = probe_time(m) * cplx(std::cos(ang), std::sin(ang));
        }
        fft.fwd(w_f, w);
        std::fill(prod.begin(), prod.end(), cplx(0.0, 0.0));
        for (int f = 0; f < len; ++f) {
            const cplx v = std::conj(w_f[static_cast<std::size_t>(f)]) * res_f[static_cast<std::size_t>(f)];
            // signed-frequency placement so fractional lags interpolate the
            // same way as the fractional-shift channel operator
            const int fs = (f <= len / 2) ? f : f - len;
            prod[static_cast<std::size_t>(fs >= 0 ? fs : padded + fs)] = v;
        }
        fft.inv(corr, prod);  // scales by 1/padded; true correlation needs 1/len
        for (int gl = 0; gl < grid.delay_points; ++gl) {
            const cplx c = corr[static_cast<std::size_t>(gl)] * static_cast<double>(os);
            const double p = std::norm(c);
            const double l = static_cast<double>(gl) / os;
            if (p > best.peak ||
                (p == best.peak && (l < best.delay_bins || (l == best.delay_bins && k < best.doppler_bins))))
                best = CorrPeak{l, k, c, p};
        }
    }
    return best;
}

PathEstimate to_estimate(const CorrPeak& peak, cplx gain, const OtfsConfig& cfg) {
    PathEstimate e;
    e.gain = gain;
    e.delay_bins = peak.delay_bins;
    e.doppler_bins = peak.doppler_bins;
    e.delay_s = peak.delay_bins * cfg.delay_resolution();
    e.doppler_hz = signed_doppler_bins(peak.doppler_bins, cfg.doppler_bins) * cfg.doppler_resolution();
    e.correlation_peak = peak.peak;
    return e;
}

std::vector<PathEstimate> sequential_estimate(const CVec& y, const CVec& probe_dd, int num_paths,
                                              const OtfsConfig& cfg, const SearchGrid& grid) {
    grid.validate(cfg);
    if (y.size() != cfg.grid_size()) throw DimensionError("sequential_estimate: received vector length mismatch");
    if (probe_dd.size() != cfg.grid_size()) throw DimensionError("sequential_estimate: probe length mismatch");
    if (num_paths < 1) throw std::invalid_argument("sequential_estimate: need at least one path");
    if (static_cast<long>(num_paths) > static_cast<long>(grid.delay_points) * grid.doppler_points)
        throw std::invalid_argument("sequential_estimate: more paths than grid points");
    const double probe_energy = probe_dd.squaredNorm();
    if (probe_energy <= 0.0) throw std::invalid_argument("sequential_estimate: zero-energy probe");

    const CVec probe_time = dd_to_time(probe_dd, cfg);
    CVec residual = dd_to_time(y, cfg);

    std::vector<PathEstimate> estimates;
    estimates.reserve(static_cast<std::size_t>(num_paths));
    for (int i = 0; i < num_paths; ++i) {
        const CorrPeak peak = correlation_search(probe_time, residual, cfg, grid);
        // LS-optimal gain against the current residual; T is unitary, so
        // ||T probe||^2 = ||probe||^2.
        const cplx gain = peak.corr / probe_energy;
        residual -= gain * delay_doppler_shift(probe_time, peak.delay_bins, peak.doppler_bins, cfg.grid_size());
        estimates.push_back(to_estimate(peak, gain, cfg));
    }
    std::stable_sort(estimates.begin(), estimates.end(),
                     [](const PathEstimate& a, const PathEstimate& b) {
                         return a.correlation_peak > b.correlation_peak;
                     });
    return estimates;
}

std::vector<PathParams> to_paths(const std::vector<PathEstimate>& estimates, const OtfsConfig& cfg) {
    std::vector<PathParams> paths;
    paths.reserve(estimates.size());
    for (const auto& e : estimates) paths.push_back(path_from_bins(e.gain, e.delay_bins, e.doppler_bins, cfg));
    return paths;
}

double resolve_eps_d(double eps_d, const OtfsConfig& cfg) {
    return eps_d > 0.0 ? eps_d : 1e-6 * std::sqrt(static_cast<double>(cfg.grid_size()));
}

}  // namespace

SearchGrid SearchGrid::for_config(const OtfsConfig& cfg, int oversample) {
    if (oversample < 1) throw std::invalid_argument("SearchGrid: oversample must be >= 1");
    return SearchGrid{cfg.delay_bins * oversample, cfg.doppler_bins * oversample, oversample};
}

void SearchGrid::validate(const OtfsConfig& cfg) const {
    if (oversample < 1) throw std::invalid_argument("SearchGrid: oversample must be >= 1");
    if (delay_points < cfg.delay_bins || doppler_points < cfg.doppler_bins)
        throw std::invalid_argument("SearchGrid: grid must cover all integer bins");
    if (delay_points > cfg.delay_bins * oversample || doppler_points > cfg.doppler_bins * oversample)
        throw std::invalid_argument("SearchGrid: grid exceeds the unambiguous bin span");
}

std::vector<PathEstimate> estimate_paths_active(const CVec& y, const CVec& d, int num_paths,
                                                const OtfsConfig& cfg, const SearchGrid& grid) {
    return sequential_estimate(y, d, num_paths, cfg, grid);
}

std::vector<PathEstimate> coarse_estimate_passive(const CVec& y, const PilotSpec& pilot, int num_paths,
                                                  const OtfsConfig& cfg, const SearchGrid& grid) {
    return sequential_estimate(y, vec_grid(pilot.grid(cfg)), num_paths, cfg, grid);
}

std::vector<cplx> refit_gains(const CVec& y, const CVec& d,
                              const std::vector<std::pair<double, double>>& bins, const OtfsConfig& cfg) {
    const double probe_energy = d.squaredNorm();
    if (probe_energy <= 0.0) throw std::invalid_argument("refit_gains: zero-energy probe");
    const CVec probe_time = dd_to_time(d, cfg);
    CVec residual = dd_to_time(y, cfg);
    std::vector<cplx> gains;
    gains.reserve(bins.size());
    for (const auto& [delay, doppler] : bins) {
        const CVec atom = delay_doppler_shift(probe_time, delay, doppler, cfg.grid_size());
        const cplx g = atom.dot(residual) / probe_energy;
        residual -= g * atom;
        gains.push_back(g);
    }
    return gains;
}

SensingReport extract_target_params(const std::vector<std::vector<PathEstimate>>& per_receiver,
                                    double carrier_freq) {
    if (per_receiver.empty() || per_receiver.front().empty())
        throw std::invalid_argument("extract_target_params: monostatic (receiver 0) estimates required");
    const std::size_t num_paths = per_receiver.front().size();
    for (const auto& r : per_receiver)
        if (r.size() != num_paths)
            throw std::invalid_argument("extract_target_params: inconsistent path counts across receivers");

    SensingReport report;
    report.by_receiver.resize(per_receiver.size());
    auto& mono = report.by_receiver.front();
    mono.resize(num_paths);
    for (std::size_t i = 0; i < num_paths; ++i) {
        mono[i].range = per_receiver[0][i].delay_s * kSpeedOfLight / 2.0;
        mono[i].radial_velocity = per_receiver[0][i].doppler_hz * kSpeedOfLight / (2.0 * carrier_freq);
    }
    for (std::size_t j = 1; j < per_receiver.size(); ++j) {
        auto& entries = report.by_receiver[j];
        entries.resize(num_paths);
        for (std::size_t i = 0; i < num_paths; ++i) {
            double range = per_receiver[j][i].delay_s * kSpeedOfLight - mono[i].range;
            entries[i].clamped = range < 0.0;
            entries[i].range = std::max(0.0, range);
            // self-consistent inverse of the bistatic Doppler composition
            entries[i].radial_velocity =
                per_receiver[j][i].doppler_hz * kSpeedOfLight / carrier_freq - mono[i].radial_velocity;
        }
    }
    return report;
}

double default_mu(const DdChannelOp& channel) {
    return 1e-2 * channel.gram_trace() / channel.config().grid_size();
}

double default_eta(const DdChannelOp& channel, double mu) {
    const int mn = channel.config().grid_size();
    double bound = channel.gain_abs_sum();
    bound *= bound;  // lambda_max(Hbar^H Hbar) <= (sum |h|)^2
    CVec v = CVec::Ones(mn) / std::sqrt(static_cast<double>(mn));
    double lambda = 0.0;
    for (int it = 0; it < 30; ++it) {
        CVec w = channel.apply_adjoint(channel.apply(v));
        const double nw = w.norm();
        if (nw <= 0.0) {
            lambda = 0.0;
            break;
        }
        lambda = nw;
        v = w / nw;
    }
    const double lambda_used = std::min(1.1 * lambda, bound);
    const double denom = 2.0 * lambda_used + 2.0 * mu;
    return denom > 0.0 ? 1.0 / denom : 1.0;
}

DetectResult detect_data(const CVec& y, const DdChannelOp& channel, const DetectOptions& opt) {
    const OtfsConfig& cfg = channel.config();
    if (y.size() != cfg.grid_size()) throw DimensionError("detect_data: length mismatch");
    const double mu = opt.mu >= 0.0 ? opt.mu : default_mu(channel);
    const double eta = opt.eta > 0.0 ? opt.eta : default_eta(channel, mu);
    const double eps_d = resolve_eps_d(opt.eps_d, cfg);
    const double diverged = 1e3 * std::max(y.norm(), 1.0);

    DetectResult result;
    result.data = CVec::Zero(cfg.grid_size());
    for (int it = 1; it <= opt.max_iter; ++it) {
        const CVec grad = 2.0 * channel.apply_adjoint(channel.apply(result.data) - y) + 2.0 * mu * result.data;
        const CVec next = result.data - eta * grad;
        const double step = (next - result.data).norm();
        result.data = next;
        result.iterations = it;
        if (result.data.norm() > diverged)
            throw StepSizeError("detect_data: iterate norm grew past 1e3 of the data scale; reduce eta");
        if (step < eps_d) {
            result.converged = true;
            break;
        }
    }
    return result;
}

PassiveResult passive_outer_loop(const CVec& y, const PilotSpec& pilot, int num_paths,
                                 const OtfsConfig& cfg, const SearchGrid& grid,
                                 const PassiveThresholds& thresholds, int max_outer,
                                 const DetectOptions& detect_opt) {
    if (max_outer < 1) throw std::invalid_argument("passive_outer_loop: max_outer must be >= 1");
    const CMat pilot_grid = pilot.grid(cfg);

    DetectOptions dopt = detect_opt;
    if (dopt.eps_d < 0.0) dopt.eps_d = resolve_eps_d(thresholds.eps_d, cfg);

    PassiveResult out;
    out.paths = coarse_estimate_passive(y, pilot, num_paths, cfg, grid);
    out.residual = std::numeric_limits<double>::infinity();

    auto sorted_by_bin = [](std::vector<PathEstimate> v) {
        std::sort(v.begin(), v.end(), [](const PathEstimate& a, const PathEstimate& b) {
            return a.delay_bins != b.delay_bins ? a.delay_bins < b.delay_bins : a.doppler_bins < b.doppler_bins;
        });
        return v;
    };

    for (int outer = 1; outer <= max_outer; ++outer) {
        const DdChannelOp channel(cfg, to_paths(out.paths, cfg));
        const DetectResult det = detect_data(y, channel, dopt);

        const CMat detected = unvec_grid(det.data, cfg.delay_bins, cfg.doppler_bins);
        const CMat info_soft = detected - pilot_grid;
        const CMat info_symbols = project_to_alphabet(info_soft, cfg);
        std::vector<std::uint8_t> bits = demap_bits(info_symbols, cfg);
        const CVec d_hat = vec_grid(info_symbols + pilot_grid);

        std::vector<PathEstimate> refreshed = estimate_paths_active(y, d_hat, num_paths, cfg, grid);
        const double residual = (y - DdChannelOp(cfg, to_paths(refreshed, cfg)).apply(d_hat)).norm();
        if (residual > out.residual) {
            // would undo progress: keep the accepted state and finish
            out.converged = true;
            break;
        }

        // parameter deltas between successive accepted iterations, matched by bin order
        const auto prev = sorted_by_bin(out.paths);
        const auto next = sorted_by_bin(refreshed);
        double dh = 0.0, dtau = 0.0, dnu = 0.0, nh = 0.0, ntau = 0.0, nnu = 0.0;
        for (std::size_t i = 0; i < prev.size(); ++i) {
            dh += std::norm(next[i].gain - prev[i].gain);
            dtau += (next[i].delay_s - prev[i].delay_s) * (next[i].delay_s - prev[i].delay_s);
            dnu += (next[i].doppler_hz - prev[i].doppler_hz) * (next[i].doppler_hz - prev[i].doppler_hz);
            nh += std::norm(prev[i].gain);
            ntau += prev[i].delay_s * prev[i].delay_s;
            nnu += prev[i].doppler_hz * prev[i].doppler_hz;
        }
        const bool settled = std::sqrt(dh) < thresholds.eps_h_rel * std::max(std::sqrt(nh), 1e-12) &&
                             std::sqrt(dtau) < thresholds.eps_tau_rel * std::max(std::sqrt(ntau), 1e-12) &&
                             std::sqrt(dnu) < thresholds.eps_nu_rel * std::max(std::sqrt(nnu), 1e-12);

        out.paths = std::move(refreshed);
        out.bits = std::move(bits);
        out.residual = residual;
        out.outer_iterations = outer;
        if (settled) {
            out.converged = true;
            break;
        }
    }
    return out;
}

}  // namespace ddisac
