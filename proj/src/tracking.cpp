#include "ddisac/tracking.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ddisac {

namespace {

struct OuNoise {
    double q_ll = 0.0;  // position variance per axis
    double q_lv = 0.0;  // position/velocity covariance per axis
    double q_vv = 0.0;  // velocity variance per axis
};

// Covariance of the integrated OU increment over one step:
//   n_v = psi  int e^{-delta (dt - s)} dW_s
//   n_l = psi/delta int (1 - e^{-delta (dt - s)}) dW_s
OuNoise ou_noise(const CrwParams& p) {
    const double e1 = std::exp(-p.reversion_rate * p.dt);
    const double e2 = std::exp(-2.0 * p.reversion_rate * p.dt);
    const double psi2 = p.diffusion * p.diffusion;
    const double d = p.reversion_rate;
    OuNoise q;
    q.q_vv = psi2 * (1.0 - e2) / (2.0 * d);
    q.q_lv = psi2 / (d * d) * ((1.0 - e1) - (1.0 - e2) / 2.0);
    q.q_ll = psi2 / (d * d) * (p.dt - 2.0 * (1.0 - e1) / d + (1.0 - e2) / (2.0 * d));
    return q;
}

}  // namespace

void CrwParams::validate() const {
    if (reversion_rate <= 0.0) throw std::invalid_argument("CrwParams: reversion_rate must be positive");
    if (dt <= 0.0) throw std::invalid_argument("CrwParams: dt must be positive");
    if (diffusion < 0.0) throw std::invalid_argument("CrwParams: diffusion must be non-negative");
}

double CrwParams::decay() const { return std::exp(-reversion_rate * dt); }

double CrwParams::position_gain() const { return (1.0 - decay()) / reversion_rate; }

Mat4 build_transition(const CrwParams& params) {
    params.validate();
    const double e = params.decay();
    const double phi = params.position_gain();
    Mat4 t = Mat4::Zero();
    t(0, 0) = t(1, 1) = 1.0;
    t(0, 2) = t(1, 3) = phi;
    t(2, 2) = t(3, 3) = e;
    return t;
}

Mat4 build_process_noise(const CrwParams& params, bool diagonal_only) {
    params.validate();
    const OuNoise q = ou_noise(params);
    Mat4 out = Mat4::Zero();
    out(0, 0) = out(1, 1) = q.q_ll;
    out(2, 2) = out(3, 3) = q.q_vv;
    if (!diagonal_only) {
        out(0, 2) = out(2, 0) = q.q_lv;
        out(1, 3) = out(3, 1) = q.q_lv;
    }
    return out;
}

TargetState crw_step(const TargetState& state, const CrwParams& params, std::uint64_t seed) {
    params.validate();
    const double e = params.decay();
    const double phi = params.position_gain();
    const OuNoise q = ou_noise(params);

    // per-axis Cholesky of [[q_ll, q_lv], [q_lv, q_vv]]
    const double a = std::sqrt(std::max(q.q_ll, 0.0));
    const double b = a > 0.0 ? q.q_lv / a : 0.0;
    const double c = std::sqrt(std::max(q.q_vv - b * b, 0.0));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    TargetState next;
    for (int axis = 0; axis < 2; ++axis) {
        const double z1 = gauss(rng);
        const double z2 = gauss(rng);
        const double v_rel = state.velocity(axis) - params.mean_velocity(axis);
        next.velocity(axis) = params.mean_velocity(axis) + v_rel * e + (b * z1 + c * z2);
        next.position(axis) =
            state.position(axis) + params.mean_velocity(axis) * params.dt + v_rel * phi + a * z1;
    }
    return next;
}

KfState kf_init(const Vec4& first_measurement, const Mat4& transition, const Mat4& process_noise,
                const Mat4& measurement_noise) {
    KfState kf;
    kf.state = first_measurement;
    kf.covariance = 10.0 * measurement_noise;
    kf.transition = transition;
    kf.observation = Mat4::Identity();
    kf.process_noise = process_noise;
    kf.measurement_noise = measurement_noise;
    return kf;
}

KfState kf_update(const KfState& prev, const Vec4& measurement, const Mat4& process_noise,
                  const Mat4& measurement_noise) {
    const Mat4& t = prev.transition;
    const Mat4& v = prev.observation;

    const Vec4 forecast = t * prev.state;
    const Mat4 p_forecast = t * prev.covariance * t.transpose() + process_noise;

    const Mat4 innovation_cov = v * p_forecast * v.transpose() + measurement_noise;
    const Eigen::LLT<Mat4> llt(innovation_cov);
    if (llt.info() != Eigen::Success) {
        const Eigen::JacobiSVD<Mat4> svd(innovation_cov);
        const double cond = svd.singularValues()(0) / std::max(svd.singularValues()(3), 1e-300);
        throw std::runtime_error("kf_update: innovation covariance not positive definite (condition " +
                                 std::to_string(cond) + ")");
    }
    // K = P_f V^T S^{-1} via the Cholesky solve of S K^T = V P_f
    const Mat4 gain = llt.solve(v * p_forecast.transpose()).transpose();

    KfState next = prev;
    next.state = forecast + gain * (measurement - v * forecast);
    const Mat4 residual_op = Mat4::Identity() - gain * v;
    next.covariance = residual_op * p_forecast * residual_op.transpose() +
                      gain * measurement_noise * gain.transpose();  // Joseph form
    next.process_noise = process_noise;
    next.measurement_noise = measurement_noise;
    return next;
}

}  // namespace ddisac
