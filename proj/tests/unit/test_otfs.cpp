#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "ddisac/otfs.hpp"
#include "doctest.h"

using namespace ddisac;

namespace {

OtfsConfig small_cfg(int m, int n, int qam = 4) {
    OtfsConfig cfg;
    cfg.delay_bins = m;
    cfg.doppler_bins = n;
    cfg.subcarrier_spacing = 240e3;
    cfg.carrier_freq = 30e9;
    cfg.cp_len = 0;
    cfg.qam_order = qam;
    return cfg;
}

CMat random_grid(int m, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    CMat d(m, n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < m; ++r) d(r, c) = cplx(g(rng), g(rng));
    return d;
}

std::vector<std::uint8_t> random_bits(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(count));
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
    return bits;
}

}  // namespace

TEST_CASE("config derived quantities") {
    OtfsConfig cfg = small_cfg(256, 16);
    CHECK(cfg.symbol_duration() * cfg.subcarrier_spacing == doctest::Approx(1.0));
    CHECK(cfg.delay_resolution() == 1.0 / (256 * 240e3));
    CHECK(cfg.doppler_resolution() == 1.0 / (16 * cfg.symbol_duration()));
    CHECK_THROWS_AS(small_cfg(0, 4).validate(), std::invalid_argument);
    CHECK_THROWS_AS(small_cfg(4, 4, 8).validate(), std::invalid_argument);
}

TEST_CASE("modulate matches the Kronecker-product transform") {
    // independent oracle: s = (F_N^H (x) I_M) vec(D)
    for (auto [m, n] : {std::pair{2, 2}, std::pair{4, 4}, std::pair{8, 2}, std::pair{3, 5}}) {
        OtfsConfig cfg = small_cfg(m, n);
        const CMat d = random_grid(m, n, 7 * m + n);
        const CMat kron =
            Eigen::kroneckerProduct(dft_matrix(n).adjoint(), CMat::Identity(m, m));
        const CVec want = kron * vec_grid(d);
        const CVec got = modulate(d, cfg);
        CHECK((want - got).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("modulate of zeros is zero") {
    OtfsConfig cfg = small_cfg(4, 4);
    CHECK(modulate(CMat::Zero(4, 4), cfg).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("modulate single entry, hand-evaluated") {
    OtfsConfig cfg = small_cfg(2, 2);
    CMat d = CMat::Zero(2, 2);
    d(0, 0) = 1.0;
    const CVec s = modulate(d, cfg);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(s(0) - inv_sqrt2) < 1e-14);
    CHECK(std::abs(s(1)) < 1e-14);
    CHECK(std::abs(s(2) - inv_sqrt2) < 1e-14);
    CHECK(std::abs(s(3)) < 1e-14);
}

TEST_CASE("round trip at nominal frame size") {
    OtfsConfig cfg = small_cfg(256, 16);
    const CMat d = map_bits(random_bits(cfg.bits_per_frame(), 99), cfg);
    const CMat back = demodulate(modulate(d, cfg), cfg);
    CHECK((back - d).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("round trip with cyclic prefix") {
    OtfsConfig cfg = small_cfg(16, 4);
    cfg.cp_len = 5;
    const CMat d = random_grid(16, 4, 3);
    const CVec s = modulate(d, cfg);
    CHECK(s.size() == 16 * 4 + 5);
    CHECK((s.head(5) - s.tail(5)).cwiseAbs().maxCoeff() == 0.0);  // prefix copies the tail
    CHECK((demodulate(s, cfg) - d).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((demodulate(CVec(s.tail(16 * 4)), cfg) - d).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(demodulate(CVec::Zero(10), cfg), DimensionError);
}

TEST_CASE("perfect reconstruction, energy and linearity properties") {
    std::mt19937_64 rng(2024);
    for (int rep = 0; rep < 20; ++rep) {
        const int m = 2 + static_cast<int>(rng() % 12);
        const int n = 2 + static_cast<int>(rng() % 6);
        OtfsConfig cfg = small_cfg(m, n);
        const CMat d1 = random_grid(m, n, rng());
        const CMat d2 = random_grid(m, n, rng());
        const CVec s1 = modulate(d1, cfg);
        const CVec s2 = modulate(d2, cfg);

        CHECK((demodulate(s1, cfg) - d1).cwiseAbs().maxCoeff() < 1e-10 * d1.norm());
        CHECK(s1.squaredNorm() == doctest::Approx(vec_grid(d1).squaredNorm()).epsilon(1e-12));
        const cplx a(0.3, -1.1), b(-2.0, 0.7);
        const CVec lin = modulate(a * d1 + b * d2, cfg);
        CHECK((lin - (a * s1 + b * s2)).cwiseAbs().maxCoeff() < 1e-11);
    }
}

TEST_CASE("demodulate of zeros is the zero grid") {
    OtfsConfig cfg = small_cfg(8, 4);
    CHECK(demodulate(CVec::Zero(32), cfg).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pilot grid and embedding") {
    OtfsConfig cfg = small_cfg(2, 2);
    PilotSpec pilot;
    pilot.delay_idx = 1;
    pilot.doppler_idx = 0;
    pilot.power = 1.0;

    SUBCASE("single entry of value sqrt(M N sigma^2)") {
        const CMat g = embed_pilot(CMat::Zero(2, 2), pilot, cfg);
        CHECK(g(1, 0) == cplx(2.0, 0.0));  // sqrt(4 * 1) = 2
        CHECK(std::abs(g(0, 0)) + std::abs(g(0, 1)) + std::abs(g(1, 1)) == 0.0);
    }

    SUBCASE("additivity at the pilot bin") {
        const CMat data = random_grid(2, 2, 5);
        const CMat g = embed_pilot(data, pilot, cfg);
        CHECK(std::abs(g(1, 0) - (data(1, 0) + 2.0)) < 1e-15);
        CHECK(g(0, 1) == data(0, 1));
    }

    SUBCASE("average pilot power equals the configured power") {
        OtfsConfig big = small_cfg(16, 8);
        PilotSpec p2{3, 5, 2.5};
        const CMat g = p2.grid(big);
        CHECK(g.squaredNorm() / big.grid_size() == doctest::Approx(2.5).epsilon(1e-12));
    }

    SUBCASE("out-of-range pilot index") {
        PilotSpec bad{2, 0, 1.0};
        CHECK_THROWS_AS(embed_pilot(CMat::Zero(2, 2), bad, cfg), std::out_of_range);
    }
}

TEST_CASE("qam alphabets have unit average energy") {
    for (int order : {4, 16, 64}) {
        const auto alphabet = qam_alphabet(order);
        double e = 0.0;
        for (auto s : alphabet) e += std::norm(s);
        CHECK(e / order == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto qpsk = qam_alphabet(4);
    const double v = 1.0 / std::sqrt(2.0);
    for (auto s : qpsk) {
        CHECK(std::abs(std::abs(s.real()) - v) < 1e-15);
        CHECK(std::abs(std::abs(s.imag()) - v) < 1e-15);
    }
}

TEST_CASE("bit mapping round trip") {
    for (int order : {4, 16, 64}) {
        OtfsConfig cfg = small_cfg(8, 4, order);
        const auto bits = random_bits(cfg.bits_per_frame(), 17 * order);
        CHECK(demap_bits(map_bits(bits, cfg), cfg) == bits);
    }
    OtfsConfig cfg = small_cfg(8, 4);
    CHECK_THROWS_AS(map_bits(std::vector<std::uint8_t>(3), cfg), DimensionError);
}

TEST_CASE("gray mapping: adjacent amplitude levels differ in one bit") {
    const auto alphabet = qam_alphabet(16);
    // walk the in-phase axis at fixed quadrature bits and count bit flips
    for (int gq = 0; gq < 4; ++gq) {
        std::vector<std::pair<double, int>> level_to_idx;
        for (int gi = 0; gi < 4; ++gi) level_to_idx.push_back({alphabet[(gi << 2) | gq].real(), (gi << 2) | gq});
        std::sort(level_to_idx.begin(), level_to_idx.end());
        for (std::size_t i = 0; i + 1 < level_to_idx.size(); ++i) {
            const int flips = __builtin_popcount(level_to_idx[i].second ^ level_to_idx[i + 1].second);
            CHECK(flips == 1);
        }
    }
}

TEST_CASE("nearest-neighbor tie breaks toward the smallest index") {
    const auto alphabet = qam_alphabet(4);
    // midpoint between indices 0 and 2 (equidistant, enumerate to confirm)
    const cplx x = (alphabet[0] + alphabet[2]) / 2.0;
    CHECK(std::abs(std::norm(x - alphabet[0]) - std::norm(x - alphabet[2])) < 1e-15);
    CHECK(nearest_symbol_index(x, alphabet) == 0);
    // dead center ties all four symbols
    CHECK(nearest_symbol_index(cplx(0.0, 0.0), alphabet) == 0);
}

TEST_CASE("vec/unvec is the identity") {
    const CMat d = random_grid(6, 5, 11);
    CHECK((unvec_grid(vec_grid(d), 6, 5) - d).cwiseAbs().maxCoeff() == 0.0);
}
