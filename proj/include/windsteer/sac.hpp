#pragma once

// Soft actor-critic: replay buffer, twin critics with targets, tanh-Gaussian
// actor, automatic temperature tuning, and an online training loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "windsteer/common.hpp"
#include "windsteer/env.hpp"
#include "windsteer/mlp.hpp"
#include "windsteer/policy.hpp"
#include "windsteer/rng.hpp"

namespace windsteer {

struct SacConfig {
    double discount = 0.99;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double alpha_lr = 3e-4;
    double tau = 5e-3;              // polyak mixing toward target critics
    int batch_size = 256;
    long replay_capacity = 1'000'000;
    long warmup_steps = 1'000;      // env steps before gradient updates begin
    int updates_per_step = 1;
    bool auto_alpha = true;
    double init_log_alpha = 0.0;
    double target_entropy = 0.0;    // 0 means "use -act_dim"
    std::vector<int> hidden = {256, 256};
    double policy_final_scale = 1e-2;

    double resolved_target_entropy(int act_dim) const {
        return target_entropy != 0.0 ? target_entropy
                                     : -static_cast<double>(act_dim);
    }

    void validate() const {
        if (!(discount >= 0.0 && discount < 1.0))
            throw std::invalid_argument("SacConfig: discount must be in [0,1)");
        if (actor_lr <= 0.0 || critic_lr <= 0.0 || alpha_lr <= 0.0)
            throw std::invalid_argument("SacConfig: learning rates must be positive");
        if (!(tau > 0.0 && tau <= 1.0))
            throw std::invalid_argument("SacConfig: tau must be in (0,1]");
        if (batch_size <= 0)
            throw std::invalid_argument("SacConfig: batch_size must be positive");
        if (replay_capacity <= 0)
            throw std::invalid_argument("SacConfig: replay_capacity must be positive");
        if (warmup_steps < 0)
            throw std::invalid_argument("SacConfig: warmup_steps must be non-negative");
        if (updates_per_step < 0)
            throw std::invalid_argument("SacConfig: updates_per_step must be non-negative");
        if (hidden.empty())
            throw std::invalid_argument("SacConfig: hidden layer list must be non-empty");
        for (int h : hidden)
            if (h <= 0) throw std::invalid_argument("SacConfig: hidden sizes must be positive");
        if (policy_final_scale <= 0.0)
            throw std::invalid_argument("SacConfig: policy_final_scale must be positive");
    }

    nlohmann::json to_json() const {
        return {
            {"discount", discount},
            {"actor_lr", actor_lr},
            {"critic_lr", critic_lr},
            {"alpha_lr", alpha_lr},
            {"tau", tau},
            {"batch_size", batch_size},
            {"replay_capacity", replay_capacity},
            {"warmup_steps", warmup_steps},
            {"updates_per_step", updates_per_step},
            {"auto_alpha", auto_alpha},
            {"init_log_alpha", init_log_alpha},
            {"target_entropy", target_entropy},
            {"hidden", hidden},
            {"policy_final_scale", policy_final_scale},
        };
    }

    static SacConfig from_json(const nlohmann::json& j) {
        SacConfig c;
        for (const auto& [key, value] : j.items()) {
            if (key == "discount") c.discount = value.get<double>();
            else if (key == "actor_lr") c.actor_lr = value.get<double>();
            else if (key == "critic_lr") c.critic_lr = value.get<double>();
            else if (key == "alpha_lr") c.alpha_lr = value.get<double>();
            else if (key == "tau") c.tau = value.get<double>();
            else if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "replay_capacity") c.replay_capacity = value.get<long>();
            else if (key == "warmup_steps") c.warmup_steps = value.get<long>();
            else if (key == "updates_per_step") c.updates_per_step = value.get<int>();
            else if (key == "auto_alpha") c.auto_alpha = value.get<bool>();
            else if (key == "init_log_alpha") c.init_log_alpha = value.get<double>();
            else if (key == "target_entropy") c.target_entropy = value.get<double>();
            else if (key == "hidden") c.hidden = value.get<std::vector<int>>();
            else if (key == "policy_final_scale") c.policy_final_scale = value.get<double>();
            else throw std::invalid_argument("SacConfig: unknown key '" + key + "'");
        }
        c.validate();
        return c;
    }
};

struct Transition {
    Eigen::VectorXd obs;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_obs;
    bool done = false;
};

// Fixed-capacity ring buffer with uniform sampling over stored transitions.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(long capacity) : capacity_(capacity) {
        if (capacity <= 0)
            throw std::invalid_argument("ReplayBuffer: capacity must be positive");
        data_.reserve(static_cast<size_t>(std::min<long>(capacity, 1 << 20)));
    }

    void push(Transition t) {
        if (size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[static_cast<size_t>(cursor_)] = std::move(t);
        }
        cursor_ = (cursor_ + 1) % capacity_;
        total_pushed_++;
    }

    long size() const { return static_cast<long>(data_.size()); }
    long capacity() const { return capacity_; }
    long total_pushed() const { return total_pushed_; }
    const Transition& at(long i) const { return data_.at(static_cast<size_t>(i)); }

    std::vector<Transition> sample(int batch, Rng& rng) const {
        if (size() == 0) throw std::logic_error("ReplayBuffer: sample from empty buffer");
        std::vector<Transition> out;
        out.reserve(static_cast<size_t>(batch));
        for (int b = 0; b < batch; ++b)
            out.push_back(data_[static_cast<size_t>(rng.integer(size()))]);
        return out;
    }

  private:
    long capacity_;
    long cursor_ = 0;
    long total_pushed_ = 0;
    std::vector<Transition> data_;
};

struct UpdateDiagnostics {
    double critic1_loss = 0.0;
    double critic2_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    double entropy = 0.0;  // -mean log pi over the actor batch
};

struct CriticLossResult {
    double loss = 0.0;
    MlpGrads grads;
};

// Mean squared error of Q(x) against fixed targets y, with parameter grads.
inline CriticLossResult critic_loss_and_grads(const MlpParams& critic,
                                              const Eigen::MatrixXd& x,
                                              const Eigen::VectorXd& y) {
    const int B = static_cast<int>(x.cols());
    if (y.size() != B)
        throw std::invalid_argument("critic_loss_and_grads: target length mismatch");
    MlpCache cache;
    const Eigen::VectorXd q = mlp_forward(critic, x, &cache).row(0).transpose();
    const Eigen::VectorXd err = q - y;
    CriticLossResult res;
    res.loss = err.squaredNorm() / B;
    Eigen::MatrixXd dq(1, B);
    dq.row(0) = (2.0 / B) * err.transpose();
    res.grads = MlpGrads::zeros_like(critic);
    mlp_backward(critic, cache, dq, &res.grads);
    return res;
}

struct ActorLossResult {
    double loss = 0.0;
    MlpGrads grads;
    Eigen::VectorXd logprob;  // per-sample log pi of the reparameterised action
};

// Actor objective mean_b(alpha * log pi(a_b|s_b) - min_i Q_i(s_b, a_b)) with
// a_b = tanh(mu + sigma*z_b) * scale + bias under frozen noise z. The min-Q
// gradient is routed through whichever critic attains the per-sample minimum;
// critic parameters are treated as constants.
inline ActorLossResult actor_loss_and_grads(const MlpParams& actor,
                                            const MlpParams& critic1,
                                            const MlpParams& critic2,
                                            const SquashConfig& squash,
                                            const Eigen::MatrixXd& s,
                                            const Eigen::MatrixXd& z, double alpha) {
    const int B = static_cast<int>(s.cols());
    const int act_dim = static_cast<int>(squash.scale.size());
    MlpCache actor_cache;
    const GaussianPolicyOutput out =
        split_policy_output(mlp_forward(actor, s, &actor_cache));
    const SquashedSample samp = squash_with_noise(out, squash, z);

    Eigen::MatrixXd xpi(s.rows() + act_dim, B);
    xpi.topRows(s.rows()) = s;
    xpi.bottomRows(act_dim) = samp.actions;
    MlpCache c1_cache, c2_cache;
    const Eigen::VectorXd q1 = mlp_forward(critic1, xpi, &c1_cache).row(0).transpose();
    const Eigen::VectorXd q2 = mlp_forward(critic2, xpi, &c2_cache).row(0).transpose();

    Eigen::MatrixXd dq1 = Eigen::MatrixXd::Zero(1, B);
    Eigen::MatrixXd dq2 = Eigen::MatrixXd::Zero(1, B);
    for (int b = 0; b < B; ++b) {
        if (q1(b) <= q2(b)) dq1(0, b) = -1.0 / B;
        else dq2(0, b) = -1.0 / B;
    }
    const Eigen::MatrixXd dx1 = mlp_backward(critic1, c1_cache, dq1, nullptr);
    const Eigen::MatrixXd dx2 = mlp_backward(critic2, c2_cache, dq2, nullptr);
    const Eigen::MatrixXd dq_da = dx1.bottomRows(act_dim) + dx2.bottomRows(act_dim);

    const Eigen::ArrayXXd tanh_u = samp.u.array().tanh();
    const Eigen::ArrayXXd da_du =
        ((1.0 - tanh_u.square()).colwise() * squash.scale.array()).eval();
    const Eigen::ArrayXXd sigma_z = out.log_sigma.array().exp() * samp.z.array();

    // d logpi / d mu = 2 tanh(u); d logpi / d log_sigma = 2 tanh(u) sigma z - 1
    // (z held fixed under the reparameterisation).
    const Eigen::MatrixXd d_mu =
        ((alpha / B) * 2.0 * tanh_u + dq_da.array() * da_du).matrix();
    const Eigen::MatrixXd d_log_sigma =
        ((alpha / B) * (2.0 * tanh_u * sigma_z - 1.0) +
         dq_da.array() * da_du * sigma_z)
            .matrix();

    ActorLossResult res;
    res.logprob = samp.logprob;
    res.loss = (alpha * samp.logprob.sum() - q1.cwiseMin(q2).sum()) / B;
    const Eigen::MatrixXd d_raw = merge_policy_grad(out, d_mu, d_log_sigma);
    res.grads = MlpGrads::zeros_like(actor);
    mlp_backward(actor, actor_cache, d_raw, &res.grads);
    return res;
}

inline void polyak_update(MlpParams& target, const MlpParams& online, double tau) {
    if (target.layers.size() != online.layers.size())
        throw std::invalid_argument("polyak_update: mismatched layer counts");
    for (size_t l = 0; l < target.layers.size(); ++l) {
        target.layers[l].w = (1.0 - tau) * target.layers[l].w + tau * online.layers[l].w;
        target.layers[l].b = (1.0 - tau) * target.layers[l].b + tau * online.layers[l].b;
    }
}

class SacAgent {
  public:
    SacAgent(int obs_dim, int act_dim, SacConfig cfg, uint64_t seed,
             SquashConfig squash = {})
        : obs_dim_(obs_dim),
          act_dim_(act_dim),
          cfg_(std::move(cfg)),
          squash_(squash.scale.size() == 0 ? SquashConfig::unit(act_dim) : std::move(squash)),
          rng_(derive_seed(seed, "sac.agent", 0)),
          buffer_(cfg_.replay_capacity),
          log_alpha_(cfg_.init_log_alpha) {
        if (obs_dim <= 0 || act_dim <= 0)
            throw std::invalid_argument("SacAgent: dimensions must be positive");
        cfg_.validate();
        squash_.validate();
        if (squash_.scale.size() != act_dim_)
            throw std::invalid_argument("SacAgent: squash dimension mismatch");

        std::vector<int> actor_sizes{obs_dim_};
        std::vector<int> critic_sizes{obs_dim_ + act_dim_};
        for (int h : cfg_.hidden) {
            actor_sizes.push_back(h);
            critic_sizes.push_back(h);
        }
        actor_sizes.push_back(2 * act_dim_);
        critic_sizes.push_back(1);

        Rng init_rng(derive_seed(seed, "sac.init", 0));
        actor_ = make_mlp(actor_sizes, init_rng, cfg_.policy_final_scale);
        critic1_ = make_mlp(critic_sizes, init_rng);
        critic2_ = make_mlp(critic_sizes, init_rng);
        target1_ = critic1_;
        target2_ = critic2_;

        actor_opt_ = AdamState::zeros_like(actor_);
        critic1_opt_ = AdamState::zeros_like(critic1_);
        critic2_opt_ = AdamState::zeros_like(critic2_);
    }

    int obs_dim() const { return obs_dim_; }
    int act_dim() const { return act_dim_; }
    const SacConfig& config() const { return cfg_; }
    const SquashConfig& squash() const { return squash_; }
    double alpha() const { return std::exp(log_alpha_); }
    double log_alpha() const { return log_alpha_; }
    ReplayBuffer& buffer() { return buffer_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    long env_steps() const { return env_steps_; }

    MlpParams& actor() { return actor_; }
    const MlpParams& actor() const { return actor_; }
    MlpParams& critic1() { return critic1_; }
    const MlpParams& critic1() const { return critic1_; }
    MlpParams& critic2() { return critic2_; }
    const MlpParams& critic2() const { return critic2_; }
    const MlpParams& target1() const { return target1_; }
    const MlpParams& target2() const { return target2_; }

    // After external edits to the critics (e.g. pretraining) the targets must
    // be re-synchronised so bootstrapping starts from the same function.
    void sync_targets() {
        target1_ = critic1_;
        target2_ = critic2_;
    }

    // Optimiser state is tied to the parameters it has adapted to; reset it
    // whenever parameters are replaced wholesale.
    void reset_optimizers() {
        actor_opt_ = AdamState::zeros_like(actor_);
        critic1_opt_ = AdamState::zeros_like(critic1_);
        critic2_opt_ = AdamState::zeros_like(critic2_);
        alpha_opt_ = AdamScalar{};
    }

    Eigen::VectorXd act(const Eigen::VectorXd& obs, bool deterministic) {
        return act(obs, deterministic, rng_);
    }

    Eigen::VectorXd act(const Eigen::VectorXd& obs, bool deterministic, Rng& rng) const {
        if (obs.size() != obs_dim_)
            throw std::invalid_argument("SacAgent::act: observation dimension mismatch");
        const Eigen::MatrixXd raw = mlp_forward(actor_, obs);
        const GaussianPolicyOutput out = split_policy_output(raw);
        if (deterministic) return deterministic_action(out.mu.col(0), squash_);
        return sample_squashed(out, squash_, rng).actions.col(0);
    }

    void observe(Transition t) {
        if (t.obs.size() != obs_dim_ || t.next_obs.size() != obs_dim_ ||
            t.action.size() != act_dim_)
            throw std::invalid_argument("SacAgent::observe: dimension mismatch");
        buffer_.push(std::move(t));
        env_steps_++;
    }

    bool ready() const {
        return env_steps_ >= cfg_.warmup_steps && buffer_.size() >= cfg_.batch_size;
    }

    // Bootstrapped targets y = r + gamma * (1 - done) * (min_i Qbar_i(s', a') -
    // alpha * log pi(a'|s')) with a' freshly sampled from the current actor.
    Eigen::VectorXd critic_targets(const std::vector<Transition>& batch, Rng& rng) const {
        const int B = static_cast<int>(batch.size());
        Eigen::MatrixXd s2(obs_dim_, B);
        for (int b = 0; b < B; ++b) s2.col(b) = batch[static_cast<size_t>(b)].next_obs;

        const GaussianPolicyOutput out = split_policy_output(mlp_forward(actor_, s2));
        const SquashedSample samp = sample_squashed(out, squash_, rng);

        Eigen::MatrixXd x(obs_dim_ + act_dim_, B);
        x.topRows(obs_dim_) = s2;
        x.bottomRows(act_dim_) = samp.actions;
        const Eigen::VectorXd q1 = mlp_forward(target1_, x).row(0).transpose();
        const Eigen::VectorXd q2 = mlp_forward(target2_, x).row(0).transpose();

        const double alpha_now = std::exp(log_alpha_);
        Eigen::VectorXd y(B);
        for (int b = 0; b < B; ++b) {
            const Transition& t = batch[static_cast<size_t>(b)];
            const double soft_q = std::min(q1(b), q2(b)) - alpha_now * samp.logprob(b);
            y(b) = t.reward + cfg_.discount * (t.done ? 0.0 : 1.0) * soft_q;
        }
        return y;
    }

    UpdateDiagnostics update() {
        return update_batch(buffer_.sample(cfg_.batch_size, rng_));
    }

    UpdateDiagnostics update_batch(const std::vector<Transition>& batch) {
        if (batch.empty())
            throw std::invalid_argument("SacAgent::update_batch: empty batch");
        const int B = static_cast<int>(batch.size());
        UpdateDiagnostics diag;

        Eigen::MatrixXd s(obs_dim_, B);
        Eigen::MatrixXd a(act_dim_, B);
        for (int b = 0; b < B; ++b) {
            s.col(b) = batch[static_cast<size_t>(b)].obs;
            a.col(b) = batch[static_cast<size_t>(b)].action;
        }

        // --- critic regression toward the bootstrapped targets ---
        const Eigen::VectorXd y = critic_targets(batch, rng_);
        Eigen::MatrixXd xsa(obs_dim_ + act_dim_, B);
        xsa.topRows(obs_dim_) = s;
        xsa.bottomRows(act_dim_) = a;

        const CriticLossResult c1 = critic_loss_and_grads(critic1_, xsa, y);
        adam_step(critic1_, c1.grads, critic1_opt_, cfg_.critic_lr);
        const CriticLossResult c2 = critic_loss_and_grads(critic2_, xsa, y);
        adam_step(critic2_, c2.grads, critic2_opt_, cfg_.critic_lr);
        diag.critic1_loss = c1.loss;
        diag.critic2_loss = c2.loss;

        // --- actor: minimise mean(alpha * log pi - min_i Q_i(s, a~pi)) ---
        Eigen::MatrixXd z(act_dim_, B);
        for (Eigen::Index col = 0; col < z.cols(); ++col)
            for (Eigen::Index row = 0; row < z.rows(); ++row) z(row, col) = rng_.normal();
        const double alpha_now = std::exp(log_alpha_);
        const ActorLossResult ar =
            actor_loss_and_grads(actor_, critic1_, critic2_, squash_, s, z, alpha_now);
        adam_step(actor_, ar.grads, actor_opt_, cfg_.actor_lr);
        diag.actor_loss = ar.loss;
        diag.entropy = -ar.logprob.mean();

        // --- temperature: minimise -log_alpha * mean(log pi + target_entropy) ---
        if (cfg_.auto_alpha) {
            const double target_h = cfg_.resolved_target_entropy(act_dim_);
            const double grad = -(ar.logprob.array() + target_h).mean();
            alpha_opt_.step(log_alpha_, grad, cfg_.alpha_lr);
        }
        diag.alpha = std::exp(log_alpha_);

        polyak_update(target1_, critic1_, cfg_.tau);
        polyak_update(target2_, critic2_, cfg_.tau);
        return diag;
    }

    nlohmann::json to_json() const {
        return {
            {"obs_dim", obs_dim_},
            {"act_dim", act_dim_},
            {"log_alpha", log_alpha_},
            {"actor", actor_.to_json()},
            {"critic1", critic1_.to_json()},
            {"critic2", critic2_.to_json()},
            {"target1", target1_.to_json()},
            {"target2", target2_.to_json()},
        };
    }

    void load_parameters(const nlohmann::json& j) {
        for (const auto& [key, value] : j.items()) {
            if (key == "obs_dim") {
                if (value.get<int>() != obs_dim_)
                    throw std::invalid_argument("SacAgent: snapshot obs_dim mismatch");
            } else if (key == "act_dim") {
                if (value.get<int>() != act_dim_)
                    throw std::invalid_argument("SacAgent: snapshot act_dim mismatch");
            } else if (key == "log_alpha") log_alpha_ = value.get<double>();
            else if (key == "actor") actor_ = MlpParams::from_json(value);
            else if (key == "critic1") critic1_ = MlpParams::from_json(value);
            else if (key == "critic2") critic2_ = MlpParams::from_json(value);
            else if (key == "target1") target1_ = MlpParams::from_json(value);
            else if (key == "target2") target2_ = MlpParams::from_json(value);
            else throw std::invalid_argument("SacAgent: unknown snapshot key '" + key + "'");
        }
        reset_optimizers();
    }

  private:
    int obs_dim_;
    int act_dim_;
    SacConfig cfg_;
    SquashConfig squash_;
    Rng rng_;
    ReplayBuffer buffer_;
    double log_alpha_;
    long env_steps_ = 0;

    MlpParams actor_, critic1_, critic2_, target1_, target2_;
    AdamState actor_opt_, critic1_opt_, critic2_opt_;
    AdamScalar alpha_opt_;
};

struct TrainLogRow {
    long step = 0;
    long episode = 0;
    double episode_return = std::numeric_limits<double>::quiet_NaN();
    double critic1_loss = std::numeric_limits<double>::quiet_NaN();
    double critic2_loss = std::numeric_limits<double>::quiet_NaN();
    double actor_loss = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double entropy = std::numeric_limits<double>::quiet_NaN();
};

struct AgentSnapshot {
    long step = 0;
    nlohmann::json state;
};

struct TrainResult {
    std::vector<AgentSnapshot> snapshots;
    std::vector<TrainLogRow> log;
    long episodes_completed = 0;
};

// Online fine-tuning: episodes drawn from the sampling ranges, policy actions
// from the very first step, one batch update per env step once the warmup is
// over, snapshots at step 0, every `snapshot_every` steps, and at the end.
// Episodes truncated by the time limit are stored with done = false so the
// bootstrap treats truncation as a continuation, not a terminal state.
inline TrainResult train_online(WindFarmEnv& env, SacAgent& agent, uint64_t seed,
                                const EpisodeSampling& sampling, long total_steps,
                                long snapshot_every, long log_every = 1) {
    if (total_steps < 0)
        throw std::invalid_argument("train_online: total_steps must be non-negative");
    if (log_every <= 0) log_every = 1;

    Rng episode_rng(derive_seed(seed, "train.episodes", 0));
    const size_t n = env.n_turbines();
    const size_t n_boxes = env.library_size();

    TrainResult result;
    auto snapshot = [&](long step) {
        result.snapshots.push_back({step, agent.to_json()});
    };
    snapshot(0);

    Eigen::VectorXd obs =
        env.reset(sample_episode(episode_rng, n, n_boxes, sampling));
    double ep_return = 0.0;

    for (long step = 1; step <= total_steps; ++step) {
        const Eigen::VectorXd action = agent.act(obs, /*deterministic=*/false);
        const StepResult res = env.step(action);
        agent.observe({obs, action, res.reward, res.obs, /*done=*/false});
        obs = res.obs;
        ep_return += res.reward;

        UpdateDiagnostics diag;
        bool updated = false;
        if (agent.ready()) {
            for (int u = 0; u < agent.config().updates_per_step; ++u)
                diag = agent.update();
            updated = agent.config().updates_per_step > 0;
        }

        const bool episode_end = res.done;
        if (episode_end || step % log_every == 0 || step == total_steps) {
            TrainLogRow row;
            row.step = step;
            row.episode = result.episodes_completed;
            if (episode_end) row.episode_return = ep_return;
            if (updated) {
                row.critic1_loss = diag.critic1_loss;
                row.critic2_loss = diag.critic2_loss;
                row.actor_loss = diag.actor_loss;
                row.alpha = diag.alpha;
                row.entropy = diag.entropy;
            }
            result.log.push_back(row);
        }

        if (episode_end) {
            result.episodes_completed++;
            ep_return = 0.0;
            if (step < total_steps)
                obs = env.reset(sample_episode(episode_rng, n, n_boxes, sampling));
        }

        if (snapshot_every > 0 && step % snapshot_every == 0) snapshot(step);
    }

    if (total_steps > 0 && (snapshot_every <= 0 || total_steps % snapshot_every != 0))
        snapshot(total_steps);
    return result;
}

inline std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
    std::string out =
        "step,episode,episode_return,critic1_loss,critic2_loss,actor_loss,alpha,entropy\n";
    char buf[512];
    for (const TrainLogRow& r : rows) {
        auto cell = [](double v) {
            if (std::isnan(v)) return std::string();
            char b[64];
            std::snprintf(b, sizeof(b), "%.17g", v);
            return std::string(b);
        };
        std::snprintf(buf, sizeof(buf), "%ld,%ld,", r.step, r.episode);
        out += buf;
        out += cell(r.episode_return) + "," + cell(r.critic1_loss) + "," +
               cell(r.critic2_loss) + "," + cell(r.actor_loss) + "," +
               cell(r.alpha) + "," + cell(r.entropy) + "\n";
    }
    return out;
}

}  // namespace windsteer
