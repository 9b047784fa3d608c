#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "ddisac/estimator.hpp"
#include "doctest.h"

using namespace ddisac;

namespace {

OtfsConfig cfg_of(int m, int n, int qam = 4) {
    OtfsConfig cfg;
    cfg.delay_bins = m;
    cfg.doppler_bins = n;
    cfg.subcarrier_spacing = 240e3;
    cfg.carrier_freq = 30e9;
    cfg.qam_order = qam;
    return cfg;
}

CVec random_vec(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
    return v;
}

CVec random_qam_frame(const OtfsConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(cfg.bits_per_frame()));
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
    return vec_grid(map_bits(bits, cfg));
}

// Reference delay-Doppler operator built from first principles (test-local).
CMat ref_dd_op(const OtfsConfig& cfg, int l, int k) {
    const int len = cfg.grid_size();
    CMat pi = CMat::Zero(len, len);
    for (int n = 0; n < len; ++n) pi((n + l) % len, n) = 1.0;
    CMat delta = CMat::Zero(len, len);
    for (int n = 0; n < len; ++n) {
        const double ang = 2.0 * M_PI * k * n / len;
        delta(n, n) = cplx(std::cos(ang), std::sin(ang));
    }
    const CMat a = Eigen::kroneckerProduct(dft_matrix(cfg.doppler_bins), CMat::Identity(cfg.delay_bins, cfg.delay_bins));
    return a * pi * delta * a.adjoint();
}

}  // namespace

TEST_CASE("single on-grid path is recovered exactly") {
    OtfsConfig cfg = cfg_of(16, 8);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    const cplx h(0.7, 0.2);
    const DdChannelOp op(cfg, {path_from_bins(h, 3, 1, cfg)});
    const CVec d = random_qam_frame(cfg, 5);
    const CVec y = op.apply(d);
    const auto est = estimate_paths_active(y, d, 1, cfg, grid);
    REQUIRE(est.size() == 1);
    CHECK(est[0].delay_bins == 3.0);
    CHECK(est[0].doppler_bins == 1.0);
    CHECK(std::abs(est[0].gain - h) < 1e-8);
    CHECK(est[0].delay_s == doctest::Approx(3.0 * cfg.delay_resolution()));
    CHECK(est[0].doppler_hz == doctest::Approx(1.0 * cfg.doppler_resolution()));
}

TEST_CASE("zero received signal gives zero peaks and gains at the first bin") {
    OtfsConfig cfg = cfg_of(8, 4);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    const CVec d = random_qam_frame(cfg, 6);
    const auto est = estimate_paths_active(CVec::Zero(32), d, 2, cfg, grid);
    for (const auto& e : est) {
        CHECK(e.correlation_peak == 0.0);
        CHECK(std::abs(e.gain) == 0.0);
        CHECK(e.delay_bins == 0.0);  // tie-break lands on the smallest bins
        CHECK(e.doppler_bins == 0.0);
    }
}

TEST_CASE("two separated paths: bins exact in magnitude order, matching the brute-force oracle") {
    OtfsConfig cfg = cfg_of(8, 4);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    const cplx h1(1.2, -0.3), h2(0.4, 0.5);
    const DdChannelOp op(cfg, {path_from_bins(h1, 2, 1, cfg), path_from_bins(h2, 6, 3, cfg)});
    const CVec d = random_qam_frame(cfg, 7);
    const CVec y = op.apply(d);
    const auto est = estimate_paths_active(y, d, 2, cfg, grid);
    REQUIRE(est.size() == 2);
    CHECK(est[0].correlation_peak >= est[1].correlation_peak);
    CHECK(est[0].delay_bins == 2.0);
    CHECK(est[0].doppler_bins == 1.0);
    CHECK(est[1].delay_bins == 6.0);
    CHECK(est[1].doppler_bins == 3.0);

    // independent brute-force sequential estimator built from dense matrices
    CVec residual = y;
    std::vector<cplx> oracle_gains;
    for (int path = 0; path < 2; ++path) {
        double best = -1.0;
        int best_l = -1, best_k = -1;
        cplx best_corr = 0.0;
        for (int l = 0; l < cfg.delay_bins; ++l)
            for (int k = 0; k < cfg.doppler_bins; ++k) {
                const cplx corr = (ref_dd_op(cfg, l, k) * d).dot(residual);
                if (std::norm(corr) > best) {
                    best = std::norm(corr);
                    best_l = l;
                    best_k = k;
                    best_corr = corr;
                }
            }
        const cplx gain = best_corr / d.squaredNorm();
        oracle_gains.push_back(gain);
        residual -= gain * (ref_dd_op(cfg, best_l, best_k) * d);
        CHECK(best_l == (path == 0 ? 2 : 6));
        CHECK(best_k == (path == 0 ? 1 : 3));
        CHECK(best == doctest::Approx(est[static_cast<std::size_t>(path)].correlation_peak).epsilon(1e-9));
    }
    CHECK(std::abs(est[0].gain - oracle_gains[0]) < 1e-9);
    CHECK(std::abs(est[1].gain - oracle_gains[1]) < 1e-9);
}

TEST_CASE("two paths with an orthogonal probe: gains recovered exactly") {
    // single-entry probe: shifted copies at distinct bins are orthogonal,
    // so the sequential gains equal the true gains at zero noise
    OtfsConfig cfg = cfg_of(8, 4);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    PilotSpec probe{1, 2, 1.0};
    const CVec d = vec_grid(probe.grid(cfg));
    const cplx h1(1.2, -0.3), h2(0.4, 0.5);
    const DdChannelOp op(cfg, {path_from_bins(h1, 2, 1, cfg), path_from_bins(h2, 6, 3, cfg)});
    const auto est = estimate_paths_active(op.apply(d), d, 2, cfg, grid);
    CHECK(est[0].delay_bins == 2.0);
    CHECK(est[0].doppler_bins == 1.0);
    CHECK(std::abs(est[0].gain - h1) < 1e-10);
    CHECK(est[1].delay_bins == 6.0);
    CHECK(est[1].doppler_bins == 3.0);
    CHECK(std::abs(est[1].gain - h2) < 1e-10);
}

TEST_CASE("residual energy is non-increasing across extracted paths") {
    OtfsConfig cfg = cfg_of(8, 4);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    const CVec d = random_qam_frame(cfg, 8);
    const CVec y = random_vec(32, 9);  // arbitrary signal, not from the model
    // re-run the sequential subtraction manually using the returned paths
    const auto est = estimate_paths_active(y, d, 5, cfg, grid);
    // estimates are peak-sorted; rebuild residuals in extraction order is not
    // observable, so check the invariant via energies: peak_i are non-increasing
    for (std::size_t i = 0; i + 1 < est.size(); ++i)
        CHECK(est[i].correlation_peak >= est[i + 1].correlation_peak - 1e-12);
    // and subtracting all paths does not increase the energy
    DdChannelOp op(cfg, [&] {
        std::vector<PathParams> ps;
        for (const auto& e : est) ps.push_back(path_from_bins(e.gain, e.delay_bins, e.doppler_bins, cfg));
        return ps;
    }());
    CHECK((y - op.apply(d)).norm() <= y.norm() + 1e-12);
}

TEST_CASE("gain formula is the 1-D least-squares optimum") {
    OtfsConfig cfg = cfg_of(8, 4);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    const CVec d = random_qam_frame(cfg, 10);
    const CVec y = random_vec(32, 11);
    const auto est = estimate_paths_active(y, d, 1, cfg, grid);
    const CVec atom = ref_dd_op(cfg, static_cast<int>(est[0].delay_bins), static_cast<int>(est[0].doppler_bins)) * d;
    // closed-form complex LS oracle: h* = <atom, y> / ||atom||^2
    const cplx h_ls = atom.dot(y) / atom.squaredNorm();
    CHECK(std::abs(est[0].gain - h_ls) < 1e-9);
    // perturbing the gain in any direction increases the residual
    const double base = (y - est[0].gain * atom).squaredNorm();
    for (cplx step : {cplx(1e-3, 0.0), cplx(-1e-3, 0.0), cplx(0.0, 1e-3), cplx(0.0, -1e-3)})
        CHECK((y - (est[0].gain + step) * atom).squaredNorm() >= base);
}

TEST_CASE("oversampled grid resolves half-bin delays") {
    OtfsConfig cfg = cfg_of(16, 4);
    const SearchGrid grid = SearchGrid::for_config(cfg, 2);
    const DdChannelOp op(cfg, {PathParams{cplx(1.0, 0.0), 2.5 * cfg.delay_resolution(), 0.0, 2.5, 0.0}});
    const CVec d = random_qam_frame(cfg, 12);
    const CVec y = op.apply(d);
    const auto est = estimate_paths_active(y, d, 1, cfg, grid);
    CHECK(est[0].delay_bins == doctest::Approx(2.5));
    CHECK(std::abs(est[0].gain - cplx(1.0, 0.0)) < 1e-6);
}

TEST_CASE("estimator input validation") {
    OtfsConfig cfg = cfg_of(8, 4);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    const CVec d = random_qam_frame(cfg, 13);
    CHECK_THROWS_AS(estimate_paths_active(CVec::Zero(32), CVec::Zero(32), 1, cfg, grid), std::invalid_argument);
    CHECK_THROWS_AS(estimate_paths_active(CVec::Zero(32), d, 33, cfg, grid), std::invalid_argument);
    SearchGrid bad{4, 4, 1};  // smaller than the bin count
    CHECK_THROWS_AS(estimate_paths_active(CVec::Zero(32), d, 1, cfg, bad), std::invalid_argument);
}

TEST_CASE("target parameter extraction") {
    const double fc = 30e9;

    SUBCASE("monostatic range inverts the two-way delay") {
        PathEstimate mono;
        mono.delay_s = 2.0 * 223.6068 / kSpeedOfLight;
        mono.doppler_hz = 0.0;
        const SensingReport rep = extract_target_params({{mono}}, fc);
        CHECK(rep.by_receiver[0][0].range == doctest::Approx(223.6068).epsilon(1e-12));
        CHECK(rep.by_receiver[0][0].radial_velocity == 0.0);
    }

    SUBCASE("bistatic subtraction and velocity composition invert the forward map") {
        // forward: tau_j = (rho_j + rho_0)/c, nu_j = (v_j + v_0) fc/c
        const double rho0 = 150.0, rhoj = 260.0, v0 = 7.0, vj = -3.0;
        PathEstimate mono, bi;
        mono.delay_s = 2.0 * rho0 / kSpeedOfLight;
        mono.doppler_hz = 2.0 * v0 * fc / kSpeedOfLight;
        bi.delay_s = (rhoj + rho0) / kSpeedOfLight;
        bi.doppler_hz = (vj + v0) * fc / kSpeedOfLight;
        const SensingReport rep = extract_target_params({{mono}, {bi}}, fc);
        CHECK(rep.by_receiver[0][0].range == doctest::Approx(rho0).epsilon(1e-12));
        CHECK(rep.by_receiver[0][0].radial_velocity == doctest::Approx(v0).epsilon(1e-12));
        CHECK(rep.by_receiver[1][0].range == doctest::Approx(rhoj).epsilon(1e-9));
        CHECK(rep.by_receiver[1][0].radial_velocity == doctest::Approx(vj).epsilon(1e-9));
        CHECK_FALSE(rep.by_receiver[1][0].clamped);
    }

    SUBCASE("negative bistatic range clamps and flags") {
        PathEstimate mono, bi;
        mono.delay_s = 2.0 * 100.0 / kSpeedOfLight;
        bi.delay_s = 50.0 / kSpeedOfLight;  // shorter than the monostatic range
        const SensingReport rep = extract_target_params({{mono}, {bi}}, fc);
        CHECK(rep.by_receiver[1][0].range == 0.0);
        CHECK(rep.by_receiver[1][0].clamped);
    }

    SUBCASE("missing monostatic estimates throw") {
        CHECK_THROWS_AS(extract_target_params({}, fc), std::invalid_argument);
    }
}

TEST_CASE("estimation round trip stays within the quantization bound") {
    // geometry -> on-grid channel -> estimator -> ranges; error bounded by
    // half a delay bin in delay, i.e. c/(2 M delta_f) in range
    OtfsConfig cfg = cfg_of(64, 8);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    NodeLayout layout;
    layout.receivers = {Vec2(400.0, 0.0), Vec2(0.0, 400.0)};
    TargetState t;
    t.position = Vec2(137.0, 211.0);
    GeometryChannelOptions opt;
    opt.phase_seed = 3;
    const auto chans = geometry_to_channel(layout, {t}, cfg, opt);
    const CVec d = random_qam_frame(cfg, 14);

    std::vector<std::vector<PathEstimate>> per_receiver;
    for (const auto& ch : chans) {
        const DdChannelOp op(cfg, ch.paths);
        per_receiver.push_back(estimate_paths_active(op.apply(d), d, 1, cfg, grid));
    }
    const SensingReport rep = extract_target_params(per_receiver, cfg.carrier_freq);
    const double bound = kSpeedOfLight / (2.0 * cfg.delay_bins * cfg.subcarrier_spacing);
    const double rho0_true = t.position.norm();
    CHECK(std::abs(rep.by_receiver[0][0].range - rho0_true) <= bound);
    for (int j = 1; j <= 2; ++j) {
        const double rhoj_true = (t.position - layout.node(j)).norm();
        CHECK(std::abs(rep.by_receiver[static_cast<std::size_t>(j)][0].range - rhoj_true) <= 2.0 * bound);
    }
}

TEST_CASE("passive coarse estimation") {
    OtfsConfig cfg = cfg_of(16, 8);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    PilotSpec pilot{2, 3, 1.0};

    SUBCASE("pilot-only frame reduces to the active case") {
        const cplx h(0.9, -0.4);
        const DdChannelOp op(cfg, {path_from_bins(h, 5, 2, cfg)});
        const CVec y = op.apply(vec_grid(pilot.grid(cfg)));
        const auto est = coarse_estimate_passive(y, pilot, 1, cfg, grid);
        CHECK(est[0].delay_bins == 5.0);
        CHECK(est[0].doppler_bins == 2.0);
        CHECK(std::abs(est[0].gain - h) < 1e-10);
    }

    SUBCASE("with 0 dB data interference the bin is found in at least 95 of 100 seeded trials") {
        int hits = 0;
        for (int seed = 0; seed < 100; ++seed) {
            std::mt19937_64 rng(9000 + seed);
            const int l = static_cast<int>(rng() % 16);
            const int k = static_cast<int>(rng() % 8);
            const DdChannelOp op(cfg, {path_from_bins(cplx(1.0, 0.0), l, k, cfg)});
            const CVec d = vec_grid(embed_pilot(unvec_grid(random_qam_frame(cfg, 500 + seed), 16, 8), pilot, cfg));
            const CVec y = op.apply(d);
            const auto est = coarse_estimate_passive(y, pilot, 1, cfg, grid);
            if (est[0].delay_bins == l && est[0].doppler_bins == k) ++hits;
        }
        CHECK(hits >= 95);
    }

    SUBCASE("overestimated path count leaves weak spurious peaks") {
        const DdChannelOp op(cfg, {path_from_bins(cplx(1.0, 0.0), 4, 1, cfg)});
        const CVec y = op.apply(vec_grid(pilot.grid(cfg)));
        const auto est = coarse_estimate_passive(y, pilot, 3, cfg, grid);
        CHECK(est[0].correlation_peak > 0.0);
        for (std::size_t i = 1; i < est.size(); ++i)
            CHECK(est[i].correlation_peak < 0.1 * est[0].correlation_peak);
    }
}

TEST_CASE("refit_gains recovers gains exactly with an orthogonal probe") {
    OtfsConfig cfg = cfg_of(16, 4);
    const cplx h1(0.8, 0.1), h2(-0.2, 0.6);
    const DdChannelOp op(cfg, {path_from_bins(h1, 2, 1, cfg), path_from_bins(h2, 9, 3, cfg)});
    PilotSpec probe{0, 0, 1.0};
    const CVec d = vec_grid(probe.grid(cfg));
    const auto gains = refit_gains(op.apply(d), d, {{2.0, 1.0}, {9.0, 3.0}}, cfg);
    CHECK(std::abs(gains[0] - h1) < 1e-10);
    CHECK(std::abs(gains[1] - h2) < 1e-10);

    // QAM probe: matches the dense sequential least-squares oracle
    const CVec dq = random_qam_frame(cfg, 15);
    const CVec yq = op.apply(dq);
    const auto got = refit_gains(yq, dq, {{2.0, 1.0}, {9.0, 3.0}}, cfg);
    CVec residual = yq;
    for (int i = 0; i < 2; ++i) {
        const CVec atom = ref_dd_op(cfg, i == 0 ? 2 : 9, i == 0 ? 1 : 3) * dq;
        const cplx want = atom.dot(residual) / atom.squaredNorm();
        CHECK(std::abs(got[static_cast<std::size_t>(i)] - want) < 1e-9);
        residual -= want * atom;
    }
}

TEST_CASE("gradient descent data detection") {
    OtfsConfig cfg = cfg_of(4, 2);

    SUBCASE("identity channel with vanishing regularization returns y") {
        const DdChannelOp op(cfg, {path_from_bins(1.0, 0, 0, cfg)});
        const CVec y = random_vec(8, 16);
        DetectOptions opt;
        opt.mu = 1e-8;
        opt.eps_d = 1e-12;
        const DetectResult res = detect_data(y, op, opt);
        CHECK(res.converged);
        CHECK((res.data - y).cwiseAbs().maxCoeff() < 1e-6);
    }

    SUBCASE("hand-computed ridge solution: Hbar = 2I, mu = 2, y = 6 e_0") {
        const DdChannelOp op(cfg, {path_from_bins(2.0, 0, 0, cfg)});
        CVec y = CVec::Zero(8);
        y(0) = 6.0;
        DetectOptions opt;
        opt.mu = 2.0;
        opt.eps_d = 1e-12;
        const DetectResult res = detect_data(y, op, opt);
        CHECK(res.converged);
        CHECK(std::abs(res.data(0) - cplx(2.0, 0.0)) < 1e-8);  // (4+2)^{-1} * 2 * 6
        CHECK(res.data.tail(7).cwiseAbs().maxCoeff() < 1e-8);
    }

    SUBCASE("matches the closed-form MMSE oracle on random channels") {
        std::mt19937_64 rng(17);
        std::normal_distribution<double> g(0.0, 1.0);
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<PathParams> paths;
            for (int q = 0; q < 2; ++q)
                paths.push_back(path_from_bins(cplx(g(rng), g(rng)), static_cast<double>(rng() % 4),
                                               static_cast<double>(rng() % 2), cfg));
            const DdChannelOp op(cfg, paths);
            const CVec y = random_vec(8, 300 + rep);
            const double mu = 0.5;
            DetectOptions opt;
            opt.mu = mu;
            opt.eps_d = 1e-11;
            opt.max_iter = 200000;
            const DetectResult res = detect_data(y, op, opt);
            const CMat h = op.dense();
            const CVec oracle =
                (h.adjoint() * h + mu * CMat::Identity(8, 8)).ldlt().solve(h.adjoint() * y);
            CHECK((res.data - oracle).norm() < 1e-6);
        }
    }

    SUBCASE("analytic gradient matches central finite differences") {
        const DdChannelOp op(cfg, {path_from_bins(cplx(0.7, -0.5), 1, 1, cfg), path_from_bins(cplx(0.2, 0.3), 3, 0, cfg)});
        const CVec y = random_vec(8, 19);
        const double mu = 0.3;
        auto j_of = [&](const CVec& d) { return (y - op.apply(d)).squaredNorm() + mu * d.squaredNorm(); };
        std::mt19937_64 rng(20);
        for (int rep = 0; rep < 10; ++rep) {
            const CVec d = random_vec(8, rng());
            const CVec grad = 2.0 * op.apply_adjoint(op.apply(d) - y) + 2.0 * mu * d;
            const double h = 1e-5;
            for (int idx : {0, 3, 7}) {
                CVec dp = d, dm = d;
                dp(idx) += h;
                dm(idx) -= h;
                const double fd_re = (j_of(dp) - j_of(dm)) / (2.0 * h);
                dp = d;
                dm = d;
                dp(idx) += cplx(0.0, h);
                dm(idx) -= cplx(0.0, h);
                const double fd_im = (j_of(dp) - j_of(dm)) / (2.0 * h);
                CHECK(grad(idx).real() == doctest::Approx(fd_re).epsilon(1e-5));
                CHECK(grad(idx).imag() == doctest::Approx(fd_im).epsilon(1e-5));
            }
        }
    }

    SUBCASE("divergent step size raises a step-size error") {
        const DdChannelOp op(cfg, {path_from_bins(2.0, 0, 0, cfg)});
        const CVec y = random_vec(8, 21);
        DetectOptions opt;
        opt.mu = 0.1;
        opt.eta = 10.0;  // far past 1/(2 lambda_max)
        CHECK_THROWS_AS(detect_data(y, op, opt), StepSizeError);
    }
}

TEST_CASE("passive outer loop") {
    OtfsConfig cfg = cfg_of(16, 8);
    const SearchGrid grid = SearchGrid::for_config(cfg);
    PilotSpec pilot{0, 0, 1.0};
    PassiveThresholds th;

    SUBCASE("zero noise, single on-grid path: <= 2 outer iterations, clean bits off the pilot bin") {
        std::mt19937_64 rng(22);
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(cfg.bits_per_frame()));
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
        const CMat frame = embed_pilot(map_bits(bits, cfg), pilot, cfg);
        const DdChannelOp op(cfg, {path_from_bins(cplx(0.9, 0.3), 4, 2, cfg)});
        const CVec y = op.apply(vec_grid(frame));
        const PassiveResult res = passive_outer_loop(y, pilot, 1, cfg, grid, th, 10);
        CHECK(res.converged);
        CHECK(res.outer_iterations <= 2);
        CHECK(res.paths[0].delay_bins == 4.0);
        CHECK(res.paths[0].doppler_bins == 2.0);
        // the data symbol superimposed on the pilot bin is not identifiable
        // through the pilot-derived gain (the gain absorbs it), so exactness
        // is asserted for every other symbol
        const int bps = 2;
        const int pilot_symbol = pilot.delay_idx + cfg.delay_bins * pilot.doppler_idx;
        long errors_off_pilot = 0;
        for (std::size_t b = 0; b < bits.size(); ++b) {
            if (static_cast<int>(b) / bps == pilot_symbol) continue;
            errors_off_pilot += res.bits[b] != bits[b];
        }
        CHECK(errors_off_pilot == 0);
    }

    SUBCASE("pilot-only frame stops after the first accepted iteration") {
        const DdChannelOp op(cfg, {path_from_bins(cplx(1.0, 0.0), 3, 1, cfg)});
        const CVec y = op.apply(vec_grid(pilot.grid(cfg)));
        const PassiveResult res = passive_outer_loop(y, pilot, 1, cfg, grid, th, 10);
        CHECK(res.converged);
        CHECK(res.outer_iterations <= 2);
        CHECK(res.paths[0].delay_bins == 3.0);
        CHECK(res.paths[0].doppler_bins == 1.0);
    }

    SUBCASE("outer loop beats pilot-only detection at 0 dB on at least 8 of 10 seeds") {
        OtfsConfig big = cfg_of(256, 16);  // nominal frame size
        const SearchGrid big_grid = SearchGrid::for_config(big);
        int loop_wins = 0;
        const int seeds = 10;
        for (int sd = 0; sd < seeds; ++sd) {
            std::mt19937_64 rng(4000 + sd);
            std::vector<std::uint8_t> bits(static_cast<std::size_t>(big.bits_per_frame()));
            for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
            const CMat frame = embed_pilot(map_bits(bits, big), pilot, big);
            const DdChannelOp op(big, {path_from_bins(cplx(0.8, 0.6), 5, 3, big)});
            CVec y = op.apply(vec_grid(frame));
            const double noise_var = y.squaredNorm() / y.size();  // 0 dB
            std::normal_distribution<double> g(0.0, std::sqrt(noise_var / 2.0));
            for (int i = 0; i < y.size(); ++i) y(i) += cplx(g(rng), g(rng));

            DetectOptions dopt;
            dopt.mu = noise_var;
            const PassiveResult one = passive_outer_loop(y, pilot, 1, big, big_grid, th, 1, dopt);
            const PassiveResult full = passive_outer_loop(y, pilot, 1, big, big_grid, th, 8, dopt);
            long err_one = 0, err_full = 0;
            for (std::size_t b = 0; b < bits.size(); ++b) {
                err_one += one.bits[b] != bits[b];
                err_full += full.bits[b] != bits[b];
            }
            if (err_full < err_one) ++loop_wins;
        }
        CHECK(loop_wins >= 8);
    }
}
