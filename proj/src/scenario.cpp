#include "ddisac/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"

namespace ddisac {

namespace {

using nlohmann::json;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec2_from(const json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); }

json matrix_json(const Eigen::MatrixX2d& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(json::array({m(r, 0), m(r, 1)}));
    return rows;
}

Eigen::MatrixX2d matrix_from(const json& j) {
    Eigen::MatrixX2d m(static_cast<Eigen::Index>(j.size()), 2);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        m(r, 0) = j.at(static_cast<std::size_t>(r)).at(0).get<double>();
        m(r, 1) = j.at(static_cast<std::size_t>(r)).at(1).get<double>();
    }
    return m;
}

}  // namespace

void TrajectoryConfig::validate() const {
    if (n_steps < 1) throw std::invalid_argument("TrajectoryConfig: n_steps must be >= 1");
    if (dt <= 0.0) throw std::invalid_argument("TrajectoryConfig: dt must be positive");
    if (region_side <= 0.0) throw std::invalid_argument("TrajectoryConfig: region_side must be positive");
    if (speed_min > speed_max || accel_min > accel_max || speed_init_min > speed_init_max)
        throw std::invalid_argument("TrajectoryConfig: empty clamp interval");
    if (sudden_turn_prob < 0.0 || sudden_turn_prob > 1.0)
        throw std::invalid_argument("TrajectoryConfig: sudden_turn_prob must be in [0, 1]");
}

TargetState Trajectory::state_at(int step) const {
    TargetState s;
    s.position = positions.row(step).transpose();
    s.velocity = velocities.row(step).transpose();
    return s;
}

Trajectory generate_trajectory(const TrajectoryConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Trajectory traj;
    traj.positions.resize(cfg.n_steps, 2);
    traj.velocities.resize(cfg.n_steps, 2);

    double x = unit(rng) * cfg.region_side;
    double y = unit(rng) * cfg.region_side;
    double speed = cfg.speed_init_min + unit(rng) * (cfg.speed_init_max - cfg.speed_init_min);
    double heading = unit(rng) * 2.0 * std::numbers::pi;
    double accel = 0.0;

    traj.positions.row(0) << x, y;
    traj.velocities.row(0) << speed * std::cos(heading), speed * std::sin(heading);

    for (int t = 1; t < cfg.n_steps; ++t) {
        accel = clamp(accel + gauss(rng) * cfg.jerk_std, cfg.accel_min, cfg.accel_max);
        speed = clamp(speed + accel * cfg.dt, cfg.speed_min, cfg.speed_max);
        if (unit(rng) < cfg.sudden_turn_prob) {
            heading += gauss(rng) * cfg.sudden_turn_std;
            ++traj.sudden_turns;
        } else {
            heading += gauss(rng) * cfg.heading_std;
        }
        double vx = speed * std::cos(heading);
        double vy = speed * std::sin(heading);
        double nx = x + vx * cfg.dt;
        double ny = y + vy * cfg.dt;
        // reflect the heading off the region walls so vehicles do not stick
        if (nx < 0.0 || nx > cfg.region_side) {
            nx = clamp(nx, 0.0, cfg.region_side);
            heading = std::numbers::pi - heading;
            vx = speed * std::cos(heading);
            vy = speed * std::sin(heading);
        }
        if (ny < 0.0 || ny > cfg.region_side) {
            ny = clamp(ny, 0.0, cfg.region_side);
            heading = -heading;
            vx = speed * std::cos(heading);
            vy = speed * std::sin(heading);
        }
        x = nx;
        y = ny;
        traj.positions.row(t) << x, y;
        traj.velocities.row(t) << vx, vy;
    }
    return traj;
}

LayoutMode layout_mode_from_string(const std::string& name) {
    if (name == "random") return LayoutMode::kRandom;
    if (name == "orthogonal_optimal") return LayoutMode::kOrthogonalOptimal;
    throw std::invalid_argument("unknown layout mode '" + name + "' (expected random|orthogonal_optimal)");
}

std::string to_string(LayoutMode mode) {
    return mode == LayoutMode::kRandom ? "random" : "orthogonal_optimal";
}

NodeLayout generate_layout(LayoutMode mode, int num_receivers, int antennas_per_node, double region_side,
                           std::uint64_t seed) {
    if (num_receivers < 2) throw std::invalid_argument("generate_layout: at least two receivers required");
    NodeLayout layout;
    layout.antennas_per_node = antennas_per_node;
    layout.region_side = region_side;

    if (mode == LayoutMode::kOrthogonalOptimal) {
        layout.anchor = Vec2(0.0, 0.0);
        // receivers beyond two are split between the two axis points (the
        // multi-antenna-equivalent grouping)
        for (int j = 0; j < num_receivers; ++j)
            layout.receivers.push_back(j % 2 == 0 ? Vec2(region_side, 0.0) : Vec2(0.0, region_side));
        layout.validate();
        return layout;
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(0.0, region_side);
    const double min_det = 0.01 * region_side * region_side;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        layout.anchor = Vec2(coord(rng), coord(rng));
        layout.receivers.clear();
        for (int j = 0; j < num_receivers; ++j) layout.receivers.push_back(Vec2(coord(rng), coord(rng)));
        bool ok = true;
        for (int j = 0; j < num_receivers && ok; ++j)
            if ((layout.receivers[static_cast<std::size_t>(j)] - layout.anchor).norm() < 1e-9) ok = false;
        for (int j = 0; j < num_receivers && ok; ++j)
            for (int k = j + 1; k < num_receivers && ok; ++k) {
                const Vec2 a = layout.receivers[static_cast<std::size_t>(j)] - layout.anchor;
                const Vec2 b = layout.receivers[static_cast<std::size_t>(k)] - layout.anchor;
                if (std::abs(a.x() * b.y() - a.y() * b.x()) < min_det) ok = false;
            }
        if (ok) {
            layout.validate();
            return layout;
        }
    }
    throw std::runtime_error("generate_layout: no non-collinear layout found in 10000 draws");
}

Scenario make_scenario(const TrajectoryConfig& cfg, LayoutMode mode, int num_receivers, int antennas_per_node,
                       int num_targets, std::uint64_t master_seed) {
    if (num_targets < 1) throw std::invalid_argument("make_scenario: at least one target required");
    Scenario s;
    s.master_seed = master_seed;
    s.layout_mode = mode;
    s.num_receivers = num_receivers;
    s.antennas_per_node = antennas_per_node;
    s.trajectory_cfg = cfg;
    s.layout = generate_layout(mode, num_receivers, antennas_per_node, cfg.region_side,
                               mix_seed(master_seed, 0x4c41594fULL));
    for (int i = 0; i < num_targets; ++i)
        s.trajectories.push_back(generate_trajectory(cfg, mix_seed(master_seed, 0x54524aULL, static_cast<std::uint64_t>(i))));
    return s;
}

void save_scenario(const Scenario& s, const std::string& path) {
    json j;
    j["format"] = "ddisac-scenario-v1";
    j["master_seed"] = s.master_seed;
    j["layout_mode"] = to_string(s.layout_mode);
    j["num_receivers"] = s.num_receivers;
    j["antennas_per_node"] = s.antennas_per_node;
    const auto& c = s.trajectory_cfg;
    j["trajectory"] = {{"n_steps", c.n_steps},
                       {"dt", c.dt},
                       {"accel_noise_std", c.accel_noise_std},
                       {"jerk_std", c.jerk_std},
                       {"heading_std", c.heading_std},
                       {"sudden_turn_prob", c.sudden_turn_prob},
                       {"sudden_turn_std", c.sudden_turn_std},
                       {"region_side", c.region_side},
                       {"speed_init_min", c.speed_init_min},
                       {"speed_init_max", c.speed_init_max},
                       {"accel_min", c.accel_min},
                       {"accel_max", c.accel_max},
                       {"speed_min", c.speed_min},
                       {"speed_max", c.speed_max}};
    j["layout"] = {{"anchor", vec2_json(s.layout.anchor)}, {"region_side", s.layout.region_side}};
    json rx = json::array();
    for (const auto& r : s.layout.receivers) rx.push_back(vec2_json(r));
    j["layout"]["receivers"] = rx;
    json targets = json::array();
    for (const auto& t : s.trajectories)
        targets.push_back({{"positions", matrix_json(t.positions)},
                           {"velocities", matrix_json(t.velocities)},
                           {"sudden_turns", t.sudden_turns}});
    j["targets"] = targets;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_scenario: cannot open " + path);
    out << j.dump(2) << "\n";
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_scenario: cannot open " + path);
    json j = json::parse(in);
    if (j.value("format", "") != "ddisac-scenario-v1")
        throw std::runtime_error("load_scenario: unrecognized scenario format");
    Scenario s;
    s.master_seed = j.at("master_seed").get<std::uint64_t>();
    s.layout_mode = layout_mode_from_string(j.at("layout_mode").get<std::string>());
    s.num_receivers = j.at("num_receivers").get<int>();
    s.antennas_per_node = j.at("antennas_per_node").get<int>();
    const json& c = j.at("trajectory");
    auto& t = s.trajectory_cfg;
    t.n_steps = c.at("n_steps").get<int>();
    t.dt = c.at("dt").get<double>();
    t.accel_noise_std = c.at("accel_noise_std").get<double>();
    t.jerk_std = c.at("jerk_std").get<double>();
    t.heading_std = c.at("heading_std").get<double>();
    t.sudden_turn_prob = c.at("sudden_turn_prob").get<double>();
    t.sudden_turn_std = c.at("sudden_turn_std").get<double>();
    t.region_side = c.at("region_side").get<double>();
    t.speed_init_min = c.at("speed_init_min").get<double>();
    t.speed_init_max = c.at("speed_init_max").get<double>();
    t.accel_min = c.at("accel_min").get<double>();
    t.accel_max = c.at("accel_max").get<double>();
    t.speed_min = c.at("speed_min").get<double>();
    t.speed_max = c.at("speed_max").get<double>();
    s.layout.anchor = vec2_from(j.at("layout").at("anchor"));
    s.layout.region_side = j.at("layout").at("region_side").get<double>();
    s.layout.antennas_per_node = s.antennas_per_node;
    for (const auto& r : j.at("layout").at("receivers")) s.layout.receivers.push_back(vec2_from(r));
    for (const auto& tj : j.at("targets")) {
        Trajectory traj;
        traj.positions = matrix_from(tj.at("positions"));
        traj.velocities = matrix_from(tj.at("velocities"));
        traj.sudden_turns = tj.at("sudden_turns").get<int>();
        s.trajectories.push_back(std::move(traj));
    }
    return s;
}

bool replay_matches(const Scenario& s) {
    const Scenario fresh = make_scenario(s.trajectory_cfg, s.layout_mode, s.num_receivers, s.antennas_per_node,
                                         static_cast<int>(s.trajectories.size()), s.master_seed);
    if ((fresh.layout.anchor - s.layout.anchor).norm() != 0.0) return false;
    if (fresh.layout.receivers.size() != s.layout.receivers.size()) return false;
    for (std::size_t j = 0; j < s.layout.receivers.size(); ++j)
        if ((fresh.layout.receivers[j] - s.layout.receivers[j]).norm() != 0.0) return false;
    for (std::size_t i = 0; i < s.trajectories.size(); ++i) {
        if (fresh.trajectories[i].positions != s.trajectories[i].positions) return false;
        if (fresh.trajectories[i].velocities != s.trajectories[i].velocities) return false;
    }
    return true;
}

}  // namespace ddisac
