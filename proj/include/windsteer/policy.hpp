#pragma once

// Tanh-squashed Gaussian policy head.
//
// The actor network emits [mu; log_sigma] stacked per action dimension.
// Actions are a = tanh(u)*scale + bias with u ~ N(mu, sigma). The exact
// log-density follows from the change of variables:
//   log pi(a) = log N(u | mu, sigma) - sum_d log(1 - tanh^2 u_d)
//               - sum_d log scale_d
// (subtractive log-scale term: the density must integrate to one over the
// squashed box).

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "windsteer/mlp.hpp"
#include "windsteer/rng.hpp"

namespace windsteer {

// The sigma floor is deliberately loose-but-finite: it keeps the density
// well-conditioned when behavior cloning meets near-deterministic targets
// (sigma cannot collapse, so large-residual samples keep driving mu) while
// leaving the head effectively deterministic for evaluation purposes.
inline constexpr double kLogSigmaMin = -3.0;
inline constexpr double kLogSigmaMax = 2.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*ln(2*pi)

struct SquashConfig {
    Eigen::VectorXd scale;  // per-dimension half-range
    Eigen::VectorXd bias;   // per-dimension center
    double atanh_clip = 1e-6;

    static SquashConfig unit(int dim) {
        SquashConfig c;
        c.scale = Eigen::VectorXd::Ones(dim);
        c.bias = Eigen::VectorXd::Zero(dim);
        return c;
    }

    void validate() const {
        if (scale.size() != bias.size()) throw std::invalid_argument("SquashConfig: size mismatch");
        if ((scale.array() <= 0.0).any()) throw std::invalid_argument("SquashConfig: scale must be > 0");
        if (!(atanh_clip > 0.0 && atanh_clip < 1.0))
            throw std::invalid_argument("SquashConfig: atanh_clip must be in (0,1)");
    }
};

struct GaussianPolicyOutput {
    Eigen::MatrixXd mu;          // (act_dim x batch)
    Eigen::MatrixXd log_sigma;   // clamped to [kLogSigmaMin, kLogSigmaMax]
    Eigen::MatrixXd clamp_mask;  // 1 where the clamp is inactive (gradient passes)
};

// Split the raw actor output (2*act_dim x batch) into mu and clamped
// log_sigma.
inline GaussianPolicyOutput split_policy_output(const Eigen::MatrixXd& raw) {
    if (raw.rows() % 2 != 0) throw std::invalid_argument("split_policy_output: odd output dim");
    Eigen::Index a = raw.rows() / 2;
    GaussianPolicyOutput out;
    out.mu = raw.topRows(a);
    Eigen::MatrixXd ls = raw.bottomRows(a);
    out.clamp_mask = ((ls.array() > kLogSigmaMin) && (ls.array() < kLogSigmaMax)).cast<double>();
    out.log_sigma = ls.array().max(kLogSigmaMin).min(kLogSigmaMax);
    return out;
}

// Re-stack gradients w.r.t. (mu, log_sigma) into a gradient w.r.t. the raw
// actor output, zeroing log_sigma components where the clamp is active.
inline Eigen::MatrixXd merge_policy_grad(const GaussianPolicyOutput& out, const Eigen::MatrixXd& d_mu,
                                         const Eigen::MatrixXd& d_log_sigma) {
    Eigen::MatrixXd d(out.mu.rows() * 2, out.mu.cols());
    d.topRows(out.mu.rows()) = d_mu;
    d.bottomRows(out.mu.rows()) = d_log_sigma.cwiseProduct(out.clamp_mask);
    return d;
}

// Numerically stable log(1 - tanh^2(u)) = 2*(log 2 - u - softplus(-2u)).
inline double log1m_tanh2(double u) {
    double x = -2.0 * u;
    double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    return 2.0 * (std::log(2.0) - u - softplus);
}

// Invert the squash: u = atanh(clamp((a - bias)/scale)).
inline Eigen::MatrixXd atanh_invert(const Eigen::MatrixXd& actions, const SquashConfig& squash) {
    squash.validate();
    if (actions.rows() != squash.scale.size())
        throw std::invalid_argument("atanh_invert: dim mismatch");
    double lim = 1.0 - squash.atanh_clip;
    Eigen::MatrixXd u(actions.rows(), actions.cols());
    for (Eigen::Index c = 0; c < actions.cols(); ++c)
        for (Eigen::Index r = 0; r < actions.rows(); ++r) {
            double t = (actions(r, c) - squash.bias[r]) / squash.scale[r];
            u(r, c) = std::atanh(std::clamp(t, -lim, lim));
        }
    return u;
}

namespace detail {
// log-likelihood given pre-squash values u (act_dim x batch)
inline Eigen::VectorXd squashed_logprob_from_u(const GaussianPolicyOutput& out,
                                               const Eigen::MatrixXd& u, const SquashConfig& squash) {
    Eigen::VectorXd lp = Eigen::VectorXd::Zero(u.cols());
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        double s = 0.0;
        for (Eigen::Index r = 0; r < u.rows(); ++r) {
            double ls = out.log_sigma(r, c);
            double sigma = std::exp(ls);
            double z = (u(r, c) - out.mu(r, c)) / sigma;
            s += -0.5 * z * z - ls - kHalfLog2Pi;
            s -= log1m_tanh2(u(r, c));
            s -= std::log(squash.scale[r]);
        }
        lp[c] = s;
    }
    return lp;
}
}  // namespace detail

// Exact log-density of actions under the squashed Gaussian (one value per
// batch column).
inline Eigen::VectorXd squashed_logprob(const GaussianPolicyOutput& out,
                                        const Eigen::MatrixXd& actions, const SquashConfig& squash) {
    if (actions.rows() != out.mu.rows() || actions.cols() != out.mu.cols())
        throw std::invalid_argument("squashed_logprob: shape mismatch");
    return detail::squashed_logprob_from_u(out, atanh_invert(actions, squash), squash);
}

struct SquashedSample {
    Eigen::MatrixXd actions;  // (act_dim x batch)
    Eigen::VectorXd logprob;  // (batch)
    Eigen::MatrixXd z;        // standard-normal draws (reparameterization noise)
    Eigen::MatrixXd u;        // pre-squash values mu + sigma*z
};

// Deterministic reparameterization a = tanh(mu + sigma*z) * scale + bias for a
// given noise matrix z; sample_squashed draws z and delegates here.
inline SquashedSample squash_with_noise(const GaussianPolicyOutput& out, const SquashConfig& squash,
                                        const Eigen::MatrixXd& z) {
    squash.validate();
    if (out.mu.rows() != squash.scale.size())
        throw std::invalid_argument("squash_with_noise: dim mismatch");
    if (z.rows() != out.mu.rows() || z.cols() != out.mu.cols())
        throw std::invalid_argument("squash_with_noise: noise shape mismatch");
    SquashedSample s;
    s.z = z;
    s.u = out.mu + out.log_sigma.array().exp().matrix().cwiseProduct(s.z);
    s.actions.resize(s.u.rows(), s.u.cols());
    for (Eigen::Index c = 0; c < s.u.cols(); ++c)
        for (Eigen::Index r = 0; r < s.u.rows(); ++r)
            s.actions(r, c) = std::tanh(s.u(r, c)) * squash.scale[r] + squash.bias[r];
    s.logprob = detail::squashed_logprob_from_u(out, s.u, squash);
    return s;
}

inline SquashedSample sample_squashed(const GaussianPolicyOutput& out, const SquashConfig& squash,
                                      Rng& rng) {
    Eigen::MatrixXd z(out.mu.rows(), out.mu.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c)
        for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) = rng.normal();
    return squash_with_noise(out, squash, z);
}

inline Eigen::VectorXd deterministic_action(const Eigen::VectorXd& mu, const SquashConfig& squash) {
    squash.validate();
    if (mu.size() != squash.scale.size())
        throw std::invalid_argument("deterministic_action: dim mismatch");
    Eigen::VectorXd a(mu.size());
    for (Eigen::Index r = 0; r < mu.size(); ++r)
        a[r] = std::tanh(mu[r]) * squash.scale[r] + squash.bias[r];
    return a;
}

}  // namespace windsteer
