#include "ddisac/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "ddisac/channel.hpp"
#include "ddisac/deployment.hpp"
#include "ddisac/fusion.hpp"

namespace ddisac {

namespace {

using nlohmann::json;

constexpr std::uint64_t kLayoutSalt = 0x4c41594fULL;
constexpr std::uint64_t kTrajSalt = 0x54524aULL;
constexpr std::uint64_t kPhaseSalt = 0x504853ULL;
constexpr std::uint64_t kBitsSalt = 0x424954ULL;
constexpr std::uint64_t kNoiseSalt = 0x4e4f49ULL;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void require_keys(const json& obj, const std::set<std::string>& allowed, const std::string& section) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.contains(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + section);
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
}

// ---------------------------------------------------------------------------
// trial internals
// ---------------------------------------------------------------------------

struct Track {
    bool initialized = false;
    TargetState basis;  // prediction basis: last fused measurement or KF posterior
    KfState kf;
    bool kf_ready = false;
};

TargetState state_from(const Vec2& pos, const Vec2& vel) {
    TargetState s;
    s.position = pos;
    s.velocity = vel;
    return s;
}

Vec4 to_vec4(const TargetState& s) {
    Vec4 v;
    v << s.position.x(), s.position.y(), s.velocity.x(), s.velocity.y();
    return v;
}

double predicted_delay(const TargetState& st, const NodeLayout& layout, int receiver, double fc) {
    return receiver == 0 ? monostatic_dd(st, layout.anchor, fc).delay_s
                         : bistatic_dd(st, layout.anchor, layout.node(receiver), fc).delay_s;
}

// Greedy one-to-one matching of estimated delays to predicted ones.
std::vector<int> associate_nearest(const std::vector<PathEstimate>& ests, const std::vector<double>& predicted) {
    const int p = static_cast<int>(predicted.size());
    std::vector<int> map(static_cast<std::size_t>(p), -1);
    std::vector<char> used(ests.size(), 0);
    for (int round = 0; round < p; ++round) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, be = -1;
        for (int i = 0; i < p; ++i) {
            if (map[static_cast<std::size_t>(i)] >= 0) continue;
            for (int e = 0; e < static_cast<int>(ests.size()); ++e) {
                if (used[static_cast<std::size_t>(e)]) continue;
                const double d = std::abs(ests[static_cast<std::size_t>(e)].delay_s -
                                          predicted[static_cast<std::size_t>(i)]);
                if (d < best) {
                    best = d;
                    bi = i;
                    be = e;
                }
            }
        }
        map[static_cast<std::size_t>(bi)] = be;
        used[static_cast<std::size_t>(be)] = 1;
    }
    return map;
}

// Track identity at the first step: the i-th track is the i-th smallest delay.
std::vector<int> associate_by_rank(const std::vector<PathEstimate>& ests, int num_tracks) {
    std::vector<int> order(ests.size());
    for (std::size_t e = 0; e < ests.size(); ++e) order[e] = static_cast<int>(e);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return ests[static_cast<std::size_t>(a)].delay_s < ests[static_cast<std::size_t>(b)].delay_s;
    });
    order.resize(static_cast<std::size_t>(num_tracks));
    return order;
}

using EstimateGrid = std::vector<std::vector<std::vector<PathEstimate>>>;  // [receiver][antenna]
using AssocGrid = std::vector<std::vector<std::vector<int>>>;              // [receiver][antenna][track]

struct TargetMeasurement {
    bool ok = false;
    Vec2 position{0.0, 0.0};
    Vec2 velocity{0.0, 0.0};
    int contributing = 0;
};

struct MeasureContext {
    const ExperimentConfig* cfg = nullptr;
    const NodeLayout* layout = nullptr;
    double snr_lin = 1.0;
    int antennas = 1;
};

// Quantization-plus-noise calibration of the per-node range / radial
// velocity standard deviations used for both the NN threshold and the KF
// measurement covariance.
struct NoiseCal {
    double range_std_mono = 0.0;
    double range_std_bist = 0.0;  // includes the propagated monostatic term
    double vel_std_mono = 0.0;
    double vel_std_bist = 0.0;
};

NoiseCal noise_calibration(const ExperimentConfig& cfg, double snr_lin) {
    const double mult = cfg.r_scale * std::sqrt(1.0 + 1.0 / snr_lin);
    const double range_bin_mono = kSpeedOfLight * cfg.otfs.delay_resolution() / 2.0;
    const double range_bin_bist = kSpeedOfLight * cfg.otfs.delay_resolution();
    const double vel_bin_mono = kSpeedOfLight * cfg.otfs.doppler_resolution() / (2.0 * cfg.otfs.carrier_freq);
    const double vel_bin_bist = kSpeedOfLight * cfg.otfs.doppler_resolution() / cfg.otfs.carrier_freq;
    const double q = 1.0 / std::sqrt(12.0);
    NoiseCal cal;
    cal.range_std_mono = range_bin_mono * q * mult;
    cal.range_std_bist = std::hypot(range_bin_bist * q * mult, cal.range_std_mono);
    cal.vel_std_mono = vel_bin_mono * q * mult;
    cal.vel_std_bist = std::hypot(vel_bin_bist * q * mult, cal.vel_std_mono);
    return cal;
}

// Fused position/velocity covariance at the given basis state, via the
// closed-form deployment scores (position) and the bearing-matrix
// sensitivity (velocity).
Mat4 measurement_covariance(const MeasureContext& mc, const TargetState& basis, int contributing) {
    const auto& layout = *mc.layout;
    const NoiseCal cal = noise_calibration(*mc.cfg, mc.snr_lin);
    const int z = layout.num_receivers();
    const int combos_per_pair = mc.antennas * mc.antennas * mc.antennas;
    const int fusion_count = std::max(contributing, 1);

    const double rho0 = (basis.position - layout.anchor).norm();
    std::vector<Triangulation> tris;
    Mat2 vel_sum = Mat2::Zero();
    int vel_terms = 0;
    for (int p = 1; p <= z; ++p) {
        for (int q = p + 1; q <= z; ++q) {
            Triangulation t;
            t.rj = layout.node(p) - layout.anchor;
            t.rk = layout.node(q) - layout.anchor;
            const double rp = (basis.position - layout.node(p)).norm();
            const double rq = (basis.position - layout.node(q)).norm();
            t.vars.anchor = squared_range_variance(std::max(rho0, 1.0), cal.range_std_mono);
            t.vars.rx_j = squared_range_variance(std::max(rp, 1.0), cal.range_std_bist);
            t.vars.rx_k = squared_range_variance(std::max(rq, 1.0), cal.range_std_bist);
            for (int c = 0; c < combos_per_pair; ++c) tris.push_back(t);

            const Vec2 dj = layout.node(p) - basis.position;
            const Vec2 dk = layout.node(q) - basis.position;
            if (dj.norm() > 0.0 && dk.norm() > 0.0) {
                Mat2 c;
                c.row(0) = (dj / dj.norm()).transpose();
                c.row(1) = (dk / dk.norm()).transpose();
                const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
                if (std::abs(det) > 1e-6) {
                    const Mat2 cinv = c.inverse();
                    Mat2 d = Mat2::Zero();
                    d(0, 0) = cal.vel_std_bist * cal.vel_std_bist;
                    d(1, 1) = cal.vel_std_bist * cal.vel_std_bist;
                    vel_sum += combos_per_pair * (cinv * d * cinv.transpose());
                    vel_terms += combos_per_pair;
                }
            }
        }
    }

    Mat4 r = Mat4::Zero();
    if (!tris.empty()) {
        const GeometryScore gs = covariance_multi(tris, fusion_count);
        r(0, 0) = gs.degenerate || !std::isfinite(gs.var_x) ? 1e6 : gs.var_x;
        r(1, 1) = gs.degenerate || !std::isfinite(gs.var_y) ? 1e6 : gs.var_y;
    } else {
        r(0, 0) = r(1, 1) = 1e6;
    }
    if (vel_terms > 0) {
        const Mat2 vel_cov = vel_sum / (static_cast<double>(fusion_count) * fusion_count);
        r.block<2, 2>(2, 2) = vel_cov;
    } else {
        r(2, 2) = r(3, 3) = 1e6;
    }
    // keep the innovation covariance comfortably positive definite
    const double floor = 1e-9 * std::max(1.0, r.diagonal().maxCoeff());
    r += floor * Mat4::Identity();
    return r;
}

// Triangulates every receiver pair and antenna combination for one target
// and fuses the samples; the per-combo range/velocity extraction goes
// through extract_target_params so the sensing-side inverse has a single
// home.
TargetMeasurement measure_target(int track, const EstimateGrid& est, const AssocGrid& assoc,
                                 const MeasureContext& mc, long& failures) {
    const auto& layout = *mc.layout;
    const double fc = mc.cfg->otfs.carrier_freq;
    const int z = layout.num_receivers();
    const int na = mc.antennas;

    std::vector<Vec2> positions, velocities;
    for (int p = 1; p <= z; ++p) {
        for (int q = p + 1; q <= z; ++q) {
            for (int a0 = 0; a0 < na; ++a0) {
                const auto& e0 =
                    est[0][static_cast<std::size_t>(a0)]
                       [static_cast<std::size_t>(assoc[0][static_cast<std::size_t>(a0)][static_cast<std::size_t>(track)])];
                for (int ap = 0; ap < na; ++ap) {
                    const auto& epath =
                        est[static_cast<std::size_t>(p)][static_cast<std::size_t>(ap)][static_cast<std::size_t>(
                            assoc[static_cast<std::size_t>(p)][static_cast<std::size_t>(ap)][static_cast<std::size_t>(track)])];
                    for (int aq = 0; aq < na; ++aq) {
                        const auto& eq =
                            est[static_cast<std::size_t>(q)][static_cast<std::size_t>(aq)][static_cast<std::size_t>(
                                assoc[static_cast<std::size_t>(q)][static_cast<std::size_t>(aq)][static_cast<std::size_t>(track)])];
                        const SensingReport report = extract_target_params({{e0}, {epath}, {eq}}, fc);
                        try {
                            const Vec2 pos = triangulate(report.by_receiver[0][0].range, report.by_receiver[1][0].range,
                                                         report.by_receiver[2][0].range, layout.anchor, layout.node(p),
                                                         layout.node(q));
                            const Vec2 vel =
                                solve_velocity(pos, report.by_receiver[1][0].radial_velocity,
                                               report.by_receiver[2][0].radial_velocity, layout.node(p), layout.node(q));
                            positions.push_back(pos);
                            velocities.push_back(vel);
                        } catch (const CollinearityError&) {
                            ++failures;
                        } catch (const DegenerateBearingError&) {
                            ++failures;
                        }
                    }
                }
            }
        }
    }

    TargetMeasurement out;
    if (positions.empty()) {
        ++failures;
        return out;
    }
    if (mc.cfg->fusion.method == FusionOptions::Method::kAverage) {
        out.position = fuse_average(positions);
        out.velocity = fuse_average(velocities);
        out.contributing = static_cast<int>(positions.size());
    } else {
        double xi_pos = mc.cfg->fusion.xi;
        double xi_vel = mc.cfg->fusion.xi;
        if (mc.cfg->fusion.xi <= 0.0) {
            // 3x the per-axis std implied by the noise calibration at the
            // sample centroid
            const TargetState centroid = state_from(fuse_average(positions), fuse_average(velocities));
            const Mat4 r = measurement_covariance(mc, centroid, static_cast<int>(positions.size()));
            xi_pos = 3.0 * std::sqrt(std::max(r(0, 0), r(1, 1)) * positions.size());
            xi_vel = 3.0 * std::sqrt(std::max(r(2, 2), r(3, 3)) * velocities.size());
        }
        const Fused2 fp = fuse_nearest_neighbor(positions, xi_pos);
        const Fused2 fv = fuse_nearest_neighbor(velocities, xi_vel);
        out.position = fp.value;
        out.velocity = fv.value;
        out.contributing = fp.contributing;
    }
    out.ok = true;
    return out;
}

AssocGrid associate_all(const EstimateGrid& est, const std::vector<Track>& tracks, const NodeLayout& layout,
                        double fc, bool use_kf) {
    const int num_tracks = static_cast<int>(tracks.size());
    AssocGrid assoc(est.size());
    const bool have_tracks = !tracks.empty() && tracks.front().initialized;
    for (std::size_t j = 0; j < est.size(); ++j) {
        assoc[j].resize(est[j].size());
        std::vector<double> predicted;
        if (have_tracks) {
            predicted.reserve(static_cast<std::size_t>(num_tracks));
            for (const auto& tr : tracks) {
                TargetState ps = tr.basis;
                if (use_kf && tr.kf_ready) {
                    const Vec4 f = tr.kf.transition * tr.kf.state;
                    ps = state_from(Vec2(f(0), f(1)), Vec2(f(2), f(3)));
                }
                predicted.push_back(predicted_delay(ps, layout, static_cast<int>(j), fc));
            }
        }
        for (std::size_t a = 0; a < est[j].size(); ++a)
            assoc[j][a] = have_tracks ? associate_nearest(est[j][a], predicted)
                                      : associate_by_rank(est[j][a], num_tracks);
    }
    return assoc;
}

}  // namespace

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

RunMode run_mode_from_string(const std::string& name) {
    if (name == "active") return RunMode::kActive;
    if (name == "active_kf") return RunMode::kActiveKf;
    if (name == "passive") return RunMode::kPassive;
    if (name == "passive_kf") return RunMode::kPassiveKf;
    throw std::invalid_argument("unknown mode '" + name + "' (expected active|active_kf|passive|passive_kf)");
}

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::kActive: return "active";
        case RunMode::kActiveKf: return "active_kf";
        case RunMode::kPassive: return "passive";
        case RunMode::kPassiveKf: return "passive_kf";
    }
    return "active";
}

void ExperimentConfig::validate() const {
    if (snr_db.empty() || n_targets.empty() || n_antennas.empty())
        throw std::invalid_argument("ExperimentConfig: sweep lists must be non-empty");
    if (n_trials < 1) throw std::invalid_argument("ExperimentConfig: n_trials must be >= 1");
    if (n_receivers < 2) throw std::invalid_argument("ExperimentConfig: n_receivers must be >= 2");
    if (oversample < 1) throw std::invalid_argument("ExperimentConfig: oversample must be >= 1");
    for (int t : n_targets)
        if (t < 1) throw std::invalid_argument("ExperimentConfig: n_targets entries must be >= 1");
    for (int a : n_antennas)
        if (a < 1) throw std::invalid_argument("ExperimentConfig: n_antennas entries must be >= 1");
    otfs.validate();
    crw.validate();
    trajectory.validate();
    if (pilot.delay_idx < 0 || pilot.delay_idx >= otfs.delay_bins || pilot.doppler_idx < 0 ||
        pilot.doppler_idx >= otfs.doppler_bins)
        throw std::invalid_argument("ExperimentConfig: pilot index outside the grid");
    if (pilot.power <= 0.0) throw std::invalid_argument("ExperimentConfig: pilot power must be positive");
    if (r_scale <= 0.0) throw std::invalid_argument("ExperimentConfig: r_scale must be positive");
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& origin) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config " + origin + ": " + e.what());
    }
    ExperimentConfig cfg;
    require_keys(j,
                 {"mode", "snr_db", "n_targets", "n_antennas", "layout_mode", "n_receivers", "n_trials",
                  "master_seed", "otfs", "pilot", "crw", "trajectory", "oversample", "on_grid",
                  "inverse_square_gain", "fusion", "detector", "thresholds", "r_scale"},
                 origin);
    if (j.contains("mode")) cfg.mode = run_mode_from_string(j.at("mode").get<std::string>());
    get_if(j, "snr_db", cfg.snr_db);
    get_if(j, "n_targets", cfg.n_targets);
    get_if(j, "n_antennas", cfg.n_antennas);
    if (j.contains("layout_mode")) cfg.layout_mode = layout_mode_from_string(j.at("layout_mode").get<std::string>());
    get_if(j, "n_receivers", cfg.n_receivers);
    get_if(j, "n_trials", cfg.n_trials);
    get_if(j, "master_seed", cfg.master_seed);
    get_if(j, "oversample", cfg.oversample);
    get_if(j, "on_grid", cfg.on_grid);
    get_if(j, "inverse_square_gain", cfg.inverse_square_gain);
    get_if(j, "r_scale", cfg.r_scale);

    if (j.contains("otfs")) {
        const json& o = j.at("otfs");
        require_keys(o, {"delay_bins", "doppler_bins", "subcarrier_spacing", "carrier_freq", "cp_len", "qam_order"},
                     origin + ":otfs");
        get_if(o, "delay_bins", cfg.otfs.delay_bins);
        get_if(o, "doppler_bins", cfg.otfs.doppler_bins);
        get_if(o, "subcarrier_spacing", cfg.otfs.subcarrier_spacing);
        get_if(o, "carrier_freq", cfg.otfs.carrier_freq);
        get_if(o, "cp_len", cfg.otfs.cp_len);
        get_if(o, "qam_order", cfg.otfs.qam_order);
    }
    if (j.contains("pilot")) {
        const json& o = j.at("pilot");
        require_keys(o, {"delay_idx", "doppler_idx", "power"}, origin + ":pilot");
        get_if(o, "delay_idx", cfg.pilot.delay_idx);
        get_if(o, "doppler_idx", cfg.pilot.doppler_idx);
        get_if(o, "power", cfg.pilot.power);
    }
    if (j.contains("crw")) {
        const json& o = j.at("crw");
        require_keys(o, {"reversion_rate", "diffusion", "mean_velocity", "dt"}, origin + ":crw");
        get_if(o, "reversion_rate", cfg.crw.reversion_rate);
        get_if(o, "diffusion", cfg.crw.diffusion);
        get_if(o, "dt", cfg.crw.dt);
        if (o.contains("mean_velocity")) {
            const json& mv = o.at("mean_velocity");
            cfg.crw.mean_velocity = Vec2(mv.at(0).get<double>(), mv.at(1).get<double>());
        }
    }
    if (j.contains("trajectory")) {
        const json& o = j.at("trajectory");
        require_keys(o,
                     {"n_steps", "dt", "accel_noise_std", "jerk_std", "heading_std", "sudden_turn_prob",
                      "sudden_turn_std", "region_side", "speed_init_min", "speed_init_max", "accel_min",
                      "accel_max", "speed_min", "speed_max"},
                     origin + ":trajectory");
        get_if(o, "n_steps", cfg.trajectory.n_steps);
        get_if(o, "dt", cfg.trajectory.dt);
        get_if(o, "accel_noise_std", cfg.trajectory.accel_noise_std);
        get_if(o, "jerk_std", cfg.trajectory.jerk_std);
        get_if(o, "heading_std", cfg.trajectory.heading_std);
        get_if(o, "sudden_turn_prob", cfg.trajectory.sudden_turn_prob);
        get_if(o, "sudden_turn_std", cfg.trajectory.sudden_turn_std);
        get_if(o, "region_side", cfg.trajectory.region_side);
        get_if(o, "speed_init_min", cfg.trajectory.speed_init_min);
        get_if(o, "speed_init_max", cfg.trajectory.speed_init_max);
        get_if(o, "accel_min", cfg.trajectory.accel_min);
        get_if(o, "accel_max", cfg.trajectory.accel_max);
        get_if(o, "speed_min", cfg.trajectory.speed_min);
        get_if(o, "speed_max", cfg.trajectory.speed_max);
    }
    if (j.contains("fusion")) {
        const json& o = j.at("fusion");
        require_keys(o, {"method", "xi"}, origin + ":fusion");
        if (o.contains("method")) {
            const std::string m = o.at("method").get<std::string>();
            if (m == "average")
                cfg.fusion.method = FusionOptions::Method::kAverage;
            else if (m == "nearest_neighbor")
                cfg.fusion.method = FusionOptions::Method::kNearestNeighbor;
            else
                throw std::invalid_argument("config: fusion.method must be average|nearest_neighbor");
        }
        get_if(o, "xi", cfg.fusion.xi);
    }
    if (j.contains("detector")) {
        const json& o = j.at("detector");
        require_keys(o, {"mu", "eta", "eps_d", "max_iter", "max_outer"}, origin + ":detector");
        get_if(o, "mu", cfg.detector.mu);
        get_if(o, "eta", cfg.detector.eta);
        get_if(o, "eps_d", cfg.detector.eps_d);
        get_if(o, "max_iter", cfg.detector.max_iter);
        get_if(o, "max_outer", cfg.detector.max_outer);
    }
    if (j.contains("thresholds")) {
        const json& o = j.at("thresholds");
        require_keys(o, {"eps_d", "eps_h_rel", "eps_tau_rel", "eps_nu_rel"}, origin + ":thresholds");
        get_if(o, "eps_d", cfg.thresholds.eps_d);
        get_if(o, "eps_h_rel", cfg.thresholds.eps_h_rel);
        get_if(o, "eps_tau_rel", cfg.thresholds.eps_tau_rel);
        get_if(o, "eps_nu_rel", cfg.thresholds.eps_nu_rel);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str(), path);
}

std::string config_json_text(const ExperimentConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    j["snr_db"] = cfg.snr_db;
    j["n_targets"] = cfg.n_targets;
    j["n_antennas"] = cfg.n_antennas;
    j["layout_mode"] = to_string(cfg.layout_mode);
    j["n_receivers"] = cfg.n_receivers;
    j["n_trials"] = cfg.n_trials;
    j["master_seed"] = cfg.master_seed;
    j["otfs"] = {{"delay_bins", cfg.otfs.delay_bins},
                 {"doppler_bins", cfg.otfs.doppler_bins},
                 {"subcarrier_spacing", cfg.otfs.subcarrier_spacing},
                 {"carrier_freq", cfg.otfs.carrier_freq},
                 {"cp_len", cfg.otfs.cp_len},
                 {"qam_order", cfg.otfs.qam_order}};
    j["pilot"] = {{"delay_idx", cfg.pilot.delay_idx}, {"doppler_idx", cfg.pilot.doppler_idx}, {"power", cfg.pilot.power}};
    j["crw"] = {{"reversion_rate", cfg.crw.reversion_rate},
                {"diffusion", cfg.crw.diffusion},
                {"mean_velocity", {cfg.crw.mean_velocity.x(), cfg.crw.mean_velocity.y()}},
                {"dt", cfg.crw.dt}};
    j["trajectory"] = {{"n_steps", cfg.trajectory.n_steps},
                       {"dt", cfg.trajectory.dt},
                       {"accel_noise_std", cfg.trajectory.accel_noise_std},
                       {"jerk_std", cfg.trajectory.jerk_std},
                       {"heading_std", cfg.trajectory.heading_std},
                       {"sudden_turn_prob", cfg.trajectory.sudden_turn_prob},
                       {"sudden_turn_std", cfg.trajectory.sudden_turn_std},
                       {"region_side", cfg.trajectory.region_side},
                       {"speed_init_min", cfg.trajectory.speed_init_min},
                       {"speed_init_max", cfg.trajectory.speed_init_max},
                       {"accel_min", cfg.trajectory.accel_min},
                       {"accel_max", cfg.trajectory.accel_max},
                       {"speed_min", cfg.trajectory.speed_min},
                       {"speed_max", cfg.trajectory.speed_max}};
    j["oversample"] = cfg.oversample;
    j["on_grid"] = cfg.on_grid;
    j["inverse_square_gain"] = cfg.inverse_square_gain;
    j["fusion"] = {{"method", cfg.fusion.method == FusionOptions::Method::kAverage ? "average" : "nearest_neighbor"},
                   {"xi", cfg.fusion.xi}};
    j["detector"] = {{"mu", cfg.detector.mu},
                     {"eta", cfg.detector.eta},
                     {"eps_d", cfg.detector.eps_d},
                     {"max_iter", cfg.detector.max_iter},
                     {"max_outer", cfg.detector.max_outer}};
    j["thresholds"] = {{"eps_d", cfg.thresholds.eps_d},
                       {"eps_h_rel", cfg.thresholds.eps_h_rel},
                       {"eps_tau_rel", cfg.thresholds.eps_tau_rel},
                       {"eps_nu_rel", cfg.thresholds.eps_nu_rel}};
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// trial
// ---------------------------------------------------------------------------

TrialStats run_trial(const ExperimentConfig& cfg, const SweepPoint& point, int point_index, int trial_index) {
    const auto t_start = std::chrono::steady_clock::now();
    cfg.validate();

    const std::uint64_t seed =
        mix_seed(cfg.master_seed, static_cast<std::uint64_t>(point_index) + 1, static_cast<std::uint64_t>(trial_index) + 1);
    const bool passive = cfg.mode == RunMode::kPassive || cfg.mode == RunMode::kPassiveKf;
    const bool use_kf = cfg.mode == RunMode::kActiveKf || cfg.mode == RunMode::kPassiveKf;
    const OtfsConfig& otfs = cfg.otfs;
    const int mn = otfs.grid_size();
    const int num_targets = point.n_targets;
    const int na = point.n_antennas;
    const double snr_lin = std::pow(10.0, point.snr_db / 10.0);
    const double fc = otfs.carrier_freq;

    const NodeLayout layout = generate_layout(cfg.layout_mode, cfg.n_receivers, na, cfg.trajectory.region_side,
                                              mix_seed(seed, kLayoutSalt));
    const int z = layout.num_receivers();
    std::vector<Trajectory> trajectories;
    for (int i = 0; i < num_targets; ++i)
        trajectories.push_back(generate_trajectory(cfg.trajectory, mix_seed(seed, kTrajSalt, static_cast<std::uint64_t>(i))));

    const SearchGrid grid = SearchGrid::for_config(otfs, cfg.oversample);
    const CMat pilot_grid = cfg.pilot.grid(otfs);
    const Mat4 transition = build_transition(cfg.crw);
    const Mat4 process_noise = build_process_noise(cfg.crw);

    MeasureContext mc;
    mc.cfg = &cfg;
    mc.layout = &layout;
    mc.snr_lin = snr_lin;
    mc.antennas = na;

    std::vector<Track> tracks(static_cast<std::size_t>(num_targets));
    std::vector<int> truth_map(static_cast<std::size_t>(num_targets));
    bool truth_mapped = false;

    TrialStats stats;
    GeometryChannelOptions chan_opt;
    chan_opt.snap_to_grid = cfg.on_grid;
    chan_opt.inverse_square_gain = cfg.inverse_square_gain;

    for (int t = 0; t < cfg.trajectory.n_steps; ++t) {
        std::vector<TargetState> true_states;
        for (const auto& traj : trajectories) true_states.push_back(traj.state_at(t));

        chan_opt.phase_seed = mix_seed(seed, kPhaseSalt, static_cast<std::uint64_t>(t));
        std::vector<ChannelRealization> channels;
        try {
            channels = geometry_to_channel(layout, true_states, otfs, chan_opt);
        } catch (const RangeAmbiguityError&) {
            ++stats.failures;  // geometry outside the unambiguous span: skip the step
            continue;
        }

        // transmit frame: fresh random bits plus the superimposed pilot
        std::vector<std::uint8_t> bits_true(static_cast<std::size_t>(otfs.bits_per_frame()));
        {
            std::mt19937_64 rng(mix_seed(seed, kBitsSalt, static_cast<std::uint64_t>(t)));
            for (auto& b : bits_true) b = static_cast<std::uint8_t>(rng() & 1u);
        }
        const CMat frame = embed_pilot(map_bits(bits_true, otfs), cfg.pilot, otfs);
        const CVec d_vec = vec_grid(frame);
        const CVec s_body = dd_to_time(d_vec, otfs);

        // received DD frames, one per receiver and antenna
        std::vector<std::vector<CVec>> y(static_cast<std::size_t>(z + 1));
        std::vector<double> noise_vars(static_cast<std::size_t>(z + 1), 0.0);
        for (int j = 0; j <= z; ++j) {
            ChannelRealization clean = channels[static_cast<std::size_t>(j)];
            clean.noise_var = 0.0;
            const CVec r_clean = apply_channel(s_body, clean, otfs, 0);
            const double sig_power = r_clean.squaredNorm() / mn;
            const double noise_var = sig_power / snr_lin;
            noise_vars[static_cast<std::size_t>(j)] = noise_var;
            y[static_cast<std::size_t>(j)].reserve(static_cast<std::size_t>(na));
            for (int a = 0; a < na; ++a) {
                CVec r = r_clean;
                if (noise_var > 0.0) {
                    std::mt19937_64 rng(mix_seed(seed, kNoiseSalt,
                                                 (static_cast<std::uint64_t>(t) << 16) |
                                                     (static_cast<std::uint64_t>(j) << 8) | static_cast<std::uint64_t>(a)));
                    std::normal_distribution<double> gauss(0.0, std::sqrt(noise_var / 2.0));
                    for (int n = 0; n < mn; ++n) r(n) += cplx(gauss(rng), gauss(rng));
                }
                y[static_cast<std::size_t>(j)].push_back(time_to_dd(r, otfs));
            }
        }

        EstimateGrid est(static_cast<std::size_t>(z + 1));
        std::vector<std::vector<std::vector<std::uint8_t>>> rx_bits(
            static_cast<std::size_t>(z + 1), std::vector<std::vector<std::uint8_t>>(static_cast<std::size_t>(na)));

        if (!passive) {
            for (int j = 0; j <= z; ++j)
                for (int a = 0; a < na; ++a)
                    est[static_cast<std::size_t>(j)].push_back(
                        estimate_paths_active(y[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)], d_vec,
                                              num_targets, otfs, grid));
        } else {
            // joint passive sensing and communication, lockstep across receivers:
            // coarse pilot estimation, fused reconstruction, then alternating
            // detection / re-estimation until the parameter deltas settle
            for (int j = 0; j <= z; ++j)
                for (int a = 0; a < na; ++a)
                    est[static_cast<std::size_t>(j)].push_back(
                        coarse_estimate_passive(y[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)], cfg.pilot,
                                                num_targets, otfs, grid));

            AssocGrid assoc = associate_all(est, tracks, layout, fc, use_kf);
            std::vector<TargetMeasurement> meas(static_cast<std::size_t>(num_targets));
            for (int i = 0; i < num_targets; ++i)
                meas[static_cast<std::size_t>(i)] = measure_target(i, est, assoc, mc, stats.failures);

            // reconstructed per-receiver channel parameters from the fused states
            auto reconstruct_bins = [&](int receiver, const TargetMeasurement& m,
                                        const PathEstimate& fallback) -> std::pair<double, double> {
                if (!m.ok) return {fallback.delay_bins, fallback.doppler_bins};
                const TargetState st = state_from(m.position, m.velocity);
                const DelayDoppler dd = receiver == 0 ? monostatic_dd(st, layout.anchor, fc)
                                                      : bistatic_dd(st, layout.anchor, layout.node(receiver), fc);
                double db = dd.delay_s / otfs.delay_resolution();
                double kb = dd.doppler_hz / otfs.doppler_resolution();
                if (cfg.on_grid) {
                    db = std::round(db);
                    kb = std::round(kb);
                }
                if (db < 0.0 || db >= otfs.delay_bins || std::abs(kb) >= otfs.doppler_bins / 2.0)
                    return {fallback.delay_bins, fallback.doppler_bins};
                if (kb < 0.0) kb += otfs.doppler_bins;
                return {db, kb};
            };

            const CVec pilot_vec = vec_grid(pilot_grid);
            std::vector<std::vector<std::vector<PathEstimate>>> theta(
                static_cast<std::size_t>(z + 1),
                std::vector<std::vector<PathEstimate>>(static_cast<std::size_t>(na)));
            for (int j = 0; j <= z; ++j)
                for (int a = 0; a < na; ++a) {
                    std::vector<std::pair<double, double>> bins;
                    for (int i = 0; i < num_targets; ++i) {
                        const auto& fallback =
                            est[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)][static_cast<std::size_t>(
                                assoc[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)][static_cast<std::size_t>(i)])];
                        bins.push_back(reconstruct_bins(j, meas[static_cast<std::size_t>(i)], fallback));
                    }
                    const auto gains =
                        refit_gains(y[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)], pilot_vec, bins, otfs);
                    auto& th = theta[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)];
                    for (int i = 0; i < num_targets; ++i) {
                        PathEstimate e;
                        e.gain = gains[static_cast<std::size_t>(i)];
                        e.delay_bins = bins[static_cast<std::size_t>(i)].first;
                        e.doppler_bins = bins[static_cast<std::size_t>(i)].second;
                        e.delay_s = e.delay_bins * otfs.delay_resolution();
                        e.doppler_hz = signed_doppler_bins(e.doppler_bins, otfs.doppler_bins) * otfs.doppler_resolution();
                        th.push_back(e);
                    }
                }

            std::vector<std::vector<char>> settled(static_cast<std::size_t>(z + 1),
                                                   std::vector<char>(static_cast<std::size_t>(na), 0));
            std::vector<std::vector<CVec>> d_hat(static_cast<std::size_t>(z + 1),
                                                 std::vector<CVec>(static_cast<std::size_t>(na)));
            for (int outer = 0; outer < cfg.detector.max_outer; ++outer) {
                EstimateGrid refined(static_cast<std::size_t>(z + 1));
                for (int j = 0; j <= z; ++j) {
                    refined[static_cast<std::size_t>(j)].resize(static_cast<std::size_t>(na));
                    for (int a = 0; a < na; ++a) {
                        if (settled[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)]) {
                            refined[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)] =
                                est[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)];
                            continue;
                        }
                        std::vector<PathParams> paths;
                        for (const auto& e : theta[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)])
                            paths.push_back(path_from_bins(e.gain, e.delay_bins, e.doppler_bins, otfs));
                        const DdChannelOp op(otfs, paths);
                        DetectOptions dopt;
                        dopt.mu = cfg.detector.mu >= 0.0
                                      ? cfg.detector.mu
                                      : std::max(noise_vars[static_cast<std::size_t>(j)], default_mu(op));
                        dopt.eta = cfg.detector.eta;
                        dopt.eps_d = cfg.detector.eps_d;
                        dopt.max_iter = cfg.detector.max_iter;
                        CVec detected;
                        try {
                            detected = detect_data(y[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)], op,
                                                   dopt).data;
                        } catch (const StepSizeError&) {
                            ++stats.failures;
                            settled[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)] = 1;
                            refined[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)] =
                                est[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)];
                            continue;
                        }
                        const CMat info_symbols =
                            project_to_alphabet(unvec_grid(detected, otfs.delay_bins, otfs.doppler_bins) - pilot_grid, otfs);
                        rx_bits[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)] = demap_bits(info_symbols, otfs);
                        d_hat[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)] = vec_grid(info_symbols + pilot_grid);
                        refined[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)] = estimate_paths_active(
                            y[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)],
                            d_hat[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)], num_targets, otfs, grid);
                    }
                }
                est = refined;
                assoc = associate_all(est, tracks, layout, fc, use_kf);
                for (int i = 0; i < num_targets; ++i) {
                    const TargetMeasurement m = measure_target(i, est, assoc, mc, stats.failures);
                    if (m.ok) meas[static_cast<std::size_t>(i)] = m;
                }

                bool all_settled = true;
                for (int j = 0; j <= z; ++j)
                    for (int a = 0; a < na; ++a) {
                        if (settled[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)]) continue;
                        auto& th = theta[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)];
                        std::vector<std::pair<double, double>> bins;
                        for (int i = 0; i < num_targets; ++i)
                            bins.push_back(reconstruct_bins(j, meas[static_cast<std::size_t>(i)],
                                                            th[static_cast<std::size_t>(i)]));
                        const CVec& probe = d_hat[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)].size() > 0
                                                ? d_hat[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)]
                                                : pilot_vec;
                        const auto gains =
                            refit_gains(y[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)], probe, bins, otfs);
                        double dh = 0.0, dtau = 0.0, dnu = 0.0, nh = 0.0, ntau = 0.0, nnu = 0.0;
                        std::vector<PathEstimate> next;
                        for (int i = 0; i < num_targets; ++i) {
                            PathEstimate e;
                            e.gain = gains[static_cast<std::size_t>(i)];
                            e.delay_bins = bins[static_cast<std::size_t>(i)].first;
                            e.doppler_bins = bins[static_cast<std::size_t>(i)].second;
                            e.delay_s = e.delay_bins * otfs.delay_resolution();
                            e.doppler_hz =
                                signed_doppler_bins(e.doppler_bins, otfs.doppler_bins) * otfs.doppler_resolution();
                            const auto& prev = th[static_cast<std::size_t>(i)];
                            dh += std::norm(e.gain - prev.gain);
                            dtau += (e.delay_s - prev.delay_s) * (e.delay_s - prev.delay_s);
                            dnu += (e.doppler_hz - prev.doppler_hz) * (e.doppler_hz - prev.doppler_hz);
                            nh += std::norm(prev.gain);
                            ntau += prev.delay_s * prev.delay_s;
                            nnu += prev.doppler_hz * prev.doppler_hz;
                            next.push_back(e);
                        }
                        const bool ok =
                            std::sqrt(dh) < cfg.thresholds.eps_h_rel * std::max(std::sqrt(nh), 1e-12) &&
                            std::sqrt(dtau) < cfg.thresholds.eps_tau_rel * std::max(std::sqrt(ntau), 1e-12) &&
                            std::sqrt(dnu) < cfg.thresholds.eps_nu_rel * std::max(std::sqrt(nnu), 1e-12);
                        if (ok)
                            settled[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)] = 1;
                        else {
                            th = std::move(next);
                            all_settled = false;
                        }
                    }
                if (all_settled) break;
            }

            // communication metric: receivers only (the anchor knows the frame)
            for (int j = 1; j <= z; ++j)
                for (int a = 0; a < na; ++a) {
                    const auto& rb = rx_bits[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)];
                    if (rb.empty()) continue;
                    for (std::size_t b = 0; b < rb.size(); ++b)
                        if (rb[b] != bits_true[b]) ++stats.bit_errors;
                    stats.bits_total += static_cast<long>(rb.size());
                }
        }

        // association, fusion and tracking (shared by both modes; in the
        // passive branch `est` already holds the final refined estimates)
        const AssocGrid assoc = associate_all(est, tracks, layout, fc, use_kf);
        std::vector<TargetMeasurement> meas(static_cast<std::size_t>(num_targets));
        for (int i = 0; i < num_targets; ++i)
            meas[static_cast<std::size_t>(i)] = measure_target(i, est, assoc, mc, stats.failures);

        if (!truth_mapped) {
            // pair tracks with true targets by monostatic-range rank
            std::vector<int> order(static_cast<std::size_t>(num_targets));
            for (int i = 0; i < num_targets; ++i) order[static_cast<std::size_t>(i)] = i;
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return (true_states[static_cast<std::size_t>(a)].position - layout.anchor).norm() <
                       (true_states[static_cast<std::size_t>(b)].position - layout.anchor).norm();
            });
            truth_map = order;
            truth_mapped = true;
        }

        for (int i = 0; i < num_targets; ++i) {
            const auto& m = meas[static_cast<std::size_t>(i)];
            auto& track = tracks[static_cast<std::size_t>(i)];
            const TargetState& truth = true_states[static_cast<std::size_t>(truth_map[static_cast<std::size_t>(i)])];
            if (!m.ok) {
                if (use_kf && track.kf_ready) {  // no measurement: forecast only
                    track.kf.state = track.kf.transition * track.kf.state;
                    track.kf.covariance =
                        track.kf.transition * track.kf.covariance * track.kf.transition.transpose() + process_noise;
                    track.basis = state_from(Vec2(track.kf.state(0), track.kf.state(1)),
                                             Vec2(track.kf.state(2), track.kf.state(3)));
                }
                continue;
            }

            stats.sum_sq_pos_raw += (m.position - truth.position).squaredNorm();
            stats.sum_sq_vel_raw += (m.velocity - truth.velocity).squaredNorm();

            Vec2 state_pos = m.position;
            Vec2 state_vel = m.velocity;
            if (use_kf) {
                const Mat4 r = measurement_covariance(mc, state_from(m.position, m.velocity), m.contributing);
                const Vec4 zvec = to_vec4(state_from(m.position, m.velocity));
                if (!track.kf_ready) {
                    track.kf = kf_init(zvec, transition, process_noise, r);
                    track.kf_ready = true;
                } else {
                    track.kf = kf_update(track.kf, zvec, process_noise, r);
                }
                state_pos = Vec2(track.kf.state(0), track.kf.state(1));
                state_vel = Vec2(track.kf.state(2), track.kf.state(3));
            }
            stats.sum_sq_pos += (state_pos - truth.position).squaredNorm();
            stats.sum_sq_vel += (state_vel - truth.velocity).squaredNorm();
            ++stats.state_samples;

            track.basis = state_from(state_pos, state_vel);
            track.initialized = true;
        }
    }

    stats.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return stats;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

std::vector<MetricsRow> run_sweep(const ExperimentConfig& cfg, int threads) {
    cfg.validate();
    std::vector<SweepPoint> points;
    for (double snr : cfg.snr_db)
        for (int nt : cfg.n_targets)
            for (int na : cfg.n_antennas) points.push_back(SweepPoint{snr, nt, na});

    struct Job {
        int point = 0;
        int trial = 0;
    };
    std::vector<Job> jobs;
    for (int p = 0; p < static_cast<int>(points.size()); ++p)
        for (int trial = 0; trial < cfg.n_trials; ++trial) jobs.push_back(Job{p, trial});

    std::vector<TrialStats> results(jobs.size());
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
    if (workers == 1) {
        for (std::size_t k = 0; k < jobs.size(); ++k)
            results[k] = run_trial(cfg, points[static_cast<std::size_t>(jobs[k].point)], jobs[k].point, jobs[k].trial);
    } else {
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            while (true) {
                const std::size_t k = next.fetch_add(1);
                if (k >= jobs.size()) break;
                results[k] =
                    run_trial(cfg, points[static_cast<std::size_t>(jobs[k].point)], jobs[k].point, jobs[k].trial);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    // reduce per point in fixed trial order so float sums are reproducible
    std::vector<MetricsRow> rows;
    for (int p = 0; p < static_cast<int>(points.size()); ++p) {
        TrialStats acc;
        for (std::size_t k = 0; k < jobs.size(); ++k) {
            if (jobs[k].point != p) continue;
            const TrialStats& r = results[k];
            acc.sum_sq_pos += r.sum_sq_pos;
            acc.sum_sq_vel += r.sum_sq_vel;
            acc.sum_sq_pos_raw += r.sum_sq_pos_raw;
            acc.sum_sq_vel_raw += r.sum_sq_vel_raw;
            acc.state_samples += r.state_samples;
            acc.bit_errors += r.bit_errors;
            acc.bits_total += r.bits_total;
            acc.failures += r.failures;
            acc.runtime_s += r.runtime_s;
        }
        MetricsRow row;
        row.mode = to_string(cfg.mode);
        row.snr_db = points[static_cast<std::size_t>(p)].snr_db;
        row.n_targets = points[static_cast<std::size_t>(p)].n_targets;
        row.n_antennas = points[static_cast<std::size_t>(p)].n_antennas;
        row.layout_mode = to_string(cfg.layout_mode);
        row.trials = cfg.n_trials;
        if (acc.state_samples > 0) {
            row.rmse_position = std::sqrt(acc.sum_sq_pos / acc.state_samples);
            row.rmse_velocity = std::sqrt(acc.sum_sq_vel / acc.state_samples);
            row.rmse_position_raw = std::sqrt(acc.sum_sq_pos_raw / acc.state_samples);
            row.rmse_velocity_raw = std::sqrt(acc.sum_sq_vel_raw / acc.state_samples);
        }
        row.ber = acc.bits_total > 0 ? static_cast<double>(acc.bit_errors) / acc.bits_total : 0.0;
        row.failures = acc.failures;
        row.runtime_s = acc.runtime_s;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string results_csv_text(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "mode,snr_db,n_targets,n_antennas,layout_mode,trials,rmse_position,rmse_velocity,"
           "rmse_position_raw,rmse_velocity_raw,ber,failures\n";
    for (const auto& r : rows)
        out << r.mode << ',' << fmt(r.snr_db) << ',' << r.n_targets << ',' << r.n_antennas << ',' << r.layout_mode
            << ',' << r.trials << ',' << fmt(r.rmse_position) << ',' << fmt(r.rmse_velocity) << ','
            << fmt(r.rmse_position_raw) << ',' << fmt(r.rmse_velocity_raw) << ',' << fmt(r.ber) << ',' << r.failures
            << '\n';
    return out.str();
}

void write_results_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << results_csv_text(rows);
}

void write_metadata(const ExperimentConfig& cfg, const std::vector<MetricsRow>& rows, double total_runtime_s,
                    const std::string& meta_path) {
    const std::string cfg_text = config_json_text(cfg);
    json j;
    j["format"] = "ddisac-results-meta-v1";
    j["config"] = json::parse(cfg_text);
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a(cfg_text)));
    j["config_hash"] = hash;
    j["master_seed"] = cfg.master_seed;
    j["total_runtime_s"] = total_runtime_s;
    json runtimes = json::array();
    for (const auto& r : rows) runtimes.push_back(r.runtime_s);
    j["row_runtimes_s"] = runtimes;
    std::ofstream out(meta_path);
    if (!out) throw std::runtime_error("cannot open metadata file " + meta_path);
    out << j.dump(2) << "\n";
}

std::string analyze_results_csv(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open results file " + csv_path);
    std::string header;
    std::getline(in, header);
    std::ostringstream report;
    report << "results: " << csv_path << "\n";
    int rows = 0, kf_better = 0, kf_rows = 0;
    double best_pos = std::numeric_limits<double>::infinity(), worst_pos = 0.0;
    double ber_min = std::numeric_limits<double>::infinity(), ber_max = 0.0;
    long failures = 0;
    double sum_reduction = 0.0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() < 12) continue;
        ++rows;
        const double pos = std::stod(f[6]);
        const double pos_raw = std::stod(f[8]);
        const double ber = std::stod(f[10]);
        best_pos = std::min(best_pos, pos);
        worst_pos = std::max(worst_pos, pos);
        ber_min = std::min(ber_min, ber);
        ber_max = std::max(ber_max, ber);
        failures += std::stol(f[11]);
        if (f[0] == "active_kf" || f[0] == "passive_kf") {
            ++kf_rows;
            if (pos <= pos_raw) ++kf_better;
            sum_reduction += pos_raw - pos;
        }
    }
    report << "rows: " << rows << "\n";
    report << "rmse_position: min " << fmt(best_pos) << " m, max " << fmt(worst_pos) << " m\n";
    report << "ber: min " << fmt(ber_min) << ", max " << fmt(ber_max) << "\n";
    report << "failures: " << failures << "\n";
    if (kf_rows > 0) {
        report << "kf rows where filter <= raw: " << kf_better << "/" << kf_rows << "\n";
        report << "mean kf position reduction: " << fmt(sum_reduction / kf_rows) << " m\n";
    }
    return report.str();
}

}  // namespace ddisac
