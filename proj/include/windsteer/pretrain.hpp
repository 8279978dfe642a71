#pragma once

// Expert demonstration generation, behavior-cloning pretraining of the actor,
// and discounted-return regression pretraining of the critics.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "windsteer/common.hpp"
#include "windsteer/env.hpp"
#include "windsteer/sac.hpp"
#include "windsteer/yaw_optimizer.hpp"

namespace windsteer {

struct PretrainConfig {
    double actor_lr = 3e-5;
    double critic_lr = 1e-3;
    int batch_size = 64;
    int max_epochs = 200;
    int patience = 5;
    double train_fraction = 0.8;
    // Critics regress normalized returns and stay in normalized units; online
    // TD learning adapts the scale afterwards.
    bool normalized_critic_targets = true;

    void validate() const {
        if (actor_lr <= 0.0 || critic_lr <= 0.0)
            throw std::invalid_argument("PretrainConfig: learning rates must be positive");
        if (batch_size <= 0)
            throw std::invalid_argument("PretrainConfig: batch_size must be positive");
        if (max_epochs < 0)
            throw std::invalid_argument("PretrainConfig: max_epochs must be non-negative");
        if (patience < 1)
            throw std::invalid_argument("PretrainConfig: patience must be >= 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw std::invalid_argument("PretrainConfig: train_fraction must be in (0,1)");
    }

    nlohmann::json to_json() const {
        return {
            {"actor_lr", actor_lr},
            {"critic_lr", critic_lr},
            {"batch_size", batch_size},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"train_fraction", train_fraction},
            {"normalized_critic_targets", normalized_critic_targets},
        };
    }

    static PretrainConfig from_json(const nlohmann::json& j) {
        PretrainConfig c;
        for (const auto& [key, val] : j.items()) {
            if (key == "actor_lr") c.actor_lr = val.get<double>();
            else if (key == "critic_lr") c.critic_lr = val.get<double>();
            else if (key == "batch_size") c.batch_size = val.get<int>();
            else if (key == "max_epochs") c.max_epochs = val.get<int>();
            else if (key == "patience") c.patience = val.get<int>();
            else if (key == "train_fraction") c.train_fraction = val.get<double>();
            else if (key == "normalized_critic_targets")
                c.normalized_critic_targets = val.get<bool>();
            else throw std::invalid_argument("PretrainConfig: unknown key '" + key + "'");
        }
        c.validate();
        return c;
    }
};

// Named demonstration budgets.
inline int dataset_size_from_name(std::string name) {
    for (char& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (name == "none") return 0;
    if (name == "small") return 10;
    if (name == "medium") return 50;
    if (name == "large") return 200;
    throw std::invalid_argument("dataset_size_from_name: unknown size '" + name + "'");
}

struct ExpertTrajectory {
    EpisodeSpec spec;
    std::vector<Eigen::VectorXd> observations;  // normalized, per agent step
    std::vector<Eigen::VectorXd> actions;       // in [-1,1]^N
    std::vector<double> rewards;

    void validate() const {
        if (observations.size() != actions.size() || actions.size() != rewards.size())
            throw std::invalid_argument("ExpertTrajectory: ragged step arrays");
        if (observations.empty())
            throw std::invalid_argument("ExpertTrajectory: empty trajectory");
    }

    nlohmann::json to_json() const {
        auto pack = [](const std::vector<Eigen::VectorXd>& vs) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& v : vs)
                arr.push_back(std::vector<double>(v.data(), v.data() + v.size()));
            return arr;
        };
        return {{"spec", spec.to_json()},
                {"observations", pack(observations)},
                {"actions", pack(actions)},
                {"rewards", rewards}};
    }

    static ExpertTrajectory from_json(const nlohmann::json& j) {
        ExpertTrajectory t;
        auto unpack = [](const nlohmann::json& arr) {
            std::vector<Eigen::VectorXd> vs;
            for (const auto& row : arr) {
                auto vals = row.get<std::vector<double>>();
                vs.push_back(Eigen::Map<const Eigen::VectorXd>(
                    vals.data(), static_cast<Eigen::Index>(vals.size())));
            }
            return vs;
        };
        for (const auto& [key, val] : j.items()) {
            if (key == "spec") t.spec = EpisodeSpec::from_json(val);
            else if (key == "observations") t.observations = unpack(val);
            else if (key == "actions") t.actions = unpack(val);
            else if (key == "rewards") t.rewards = val.get<std::vector<double>>();
            else throw std::invalid_argument("ExpertTrajectory: unknown key '" + key + "'");
        }
        t.validate();
        return t;
    }
};

// Hash guarding dataset/environment consistency: a dataset generated under one
// plant + env configuration must not silently pretrain an agent for another.
inline std::string env_fingerprint(const FarmLayout& layout, const EnvConfig& cfg) {
    return hash_hex(fnv1a64(layout.to_json().dump() + "|" + cfg.to_json().dump()));
}

struct ExpertDataset {
    uint64_t generator_seed = 0;
    std::string env_config_hash;
    std::vector<ExpertTrajectory> trajectories;

    size_t n_pairs() const {
        size_t n = 0;
        for (const auto& t : trajectories) n += t.observations.size();
        return n;
    }

    nlohmann::json to_json() const {
        nlohmann::json trajs = nlohmann::json::array();
        for (const auto& t : trajectories) trajs.push_back(t.to_json());
        return {{"generator_seed", generator_seed},
                {"env_config_hash", env_config_hash},
                {"n_episodes", trajectories.size()},
                {"trajectories", std::move(trajs)}};
    }

    static ExpertDataset from_json(const nlohmann::json& j) {
        ExpertDataset ds;
        size_t declared = 0;
        bool has_count = false;
        for (const auto& [key, val] : j.items()) {
            if (key == "generator_seed") ds.generator_seed = val.get<uint64_t>();
            else if (key == "env_config_hash") ds.env_config_hash = val.get<std::string>();
            else if (key == "n_episodes") { declared = val.get<size_t>(); has_count = true; }
            else if (key == "trajectories") {
                for (const auto& t : val) ds.trajectories.push_back(ExpertTrajectory::from_json(t));
            } else throw std::invalid_argument("ExpertDataset: unknown key '" + key + "'");
        }
        if (has_count && declared != ds.trajectories.size())
            throw std::invalid_argument("ExpertDataset: n_episodes does not match trajectory count");
        return ds;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("ExpertDataset: cannot write " + path);
        out << to_json().dump();
    }

    static ExpertDataset load(const std::string& path, const std::string& expected_hash = "") {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("ExpertDataset: cannot read " + path);
        ExpertDataset ds = from_json(nlohmann::json::parse(in));
        if (!expected_hash.empty() && ds.env_config_hash != expected_hash)
            throw std::runtime_error("ExpertDataset: environment fingerprint mismatch in " + path);
        return ds;
    }
};

// Roll one episode under the rate-limited expert: targets are the steady-state
// optimal yaws for the episode's free-stream inflow (known perfectly to the
// expert, and constant for the episode), actions track them at the plant's
// yaw-rate limit.
inline ExpertTrajectory run_expert_episode(WindFarmEnv& env, const EpisodeSpec& spec,
                                           const SerialRefineConfig& sr_cfg = {}) {
    ExpertTrajectory traj;
    traj.spec = spec;
    const std::vector<double> targets =
        expert_yaw_targets(env.layout(), spec.inflow, sr_cfg, env.config().wake);
    const double step_deg = env.config().yaw_step_deg();
    const size_t n = env.n_turbines();

    Eigen::VectorXd obs = env.reset(spec);
    while (!env.done()) {
        const std::vector<double>& yaws = env.agent_yaws();
        Eigen::VectorXd action(static_cast<Eigen::Index>(n));
        for (size_t i = 0; i < n; ++i)
            action(static_cast<Eigen::Index>(i)) =
                std::clamp((targets[i] - yaws[i]) / step_deg, -1.0, 1.0);
        const StepResult res = env.step(action);
        traj.observations.push_back(obs);
        traj.actions.push_back(action);
        traj.rewards.push_back(res.reward);
        obs = res.obs;
    }
    return traj;
}

inline ExpertDataset generate_expert_dataset(const FarmLayout& layout, const EnvConfig& cfg,
                                             const std::vector<TurbulenceBox>& library,
                                             int n_episodes, uint64_t seed,
                                             const EpisodeSampling& sampling = {},
                                             int workers = 1,
                                             const SerialRefineConfig& sr_cfg = {}) {
    if (n_episodes < 0)
        throw std::invalid_argument("generate_expert_dataset: n_episodes must be >= 0");
    ExpertDataset ds;
    ds.generator_seed = seed;
    ds.env_config_hash = env_fingerprint(layout, cfg);
    if (n_episodes == 0) return ds;

    Rng rng(derive_seed(seed, "expert.episodes", 0));
    std::vector<EpisodeSpec> specs;
    for (int e = 0; e < n_episodes; ++e)
        specs.push_back(sample_episode(rng, layout.size(), library.size(), sampling));

    ds.trajectories.resize(static_cast<size_t>(n_episodes));
    parallel_for(static_cast<size_t>(n_episodes), static_cast<size_t>(std::max(1, workers)),
                 [&](size_t e) {
                     WindFarmEnv env(layout, cfg, &library);
                     ds.trajectories[e] = run_expert_episode(env, specs[e], sr_cfg);
                 });
    return ds;
}

// --- discounted returns -----------------------------------------------------

inline std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                              double discount) {
    if (rewards.empty())
        throw std::invalid_argument("discounted_returns: empty reward sequence");
    std::vector<double> g(rewards.size());
    double acc = 0.0;
    for (size_t t = rewards.size(); t-- > 0;) {
        acc = rewards[t] + discount * acc;
        g[t] = acc;
    }
    return g;
}

struct ReturnStats {
    double mean = 0.0;
    double std = 1.0;  // population std, floored at 1e-8
};

inline ReturnStats return_stats(const std::vector<double>& values) {
    if (values.size() < 2)
        throw std::invalid_argument("return_stats: need at least 2 values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return {mean, std::max(std::sqrt(var / n), 1e-8)};
}

inline std::vector<double> normalize_returns(const std::vector<double>& values,
                                             const ReturnStats& stats) {
    std::vector<double> out(values.size());
    for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - stats.mean) / stats.std;
    return out;
}

// --- dataset flattening and splitting ---------------------------------------

struct FlatPairs {
    Eigen::MatrixXd obs;      // obs_dim x n
    Eigen::MatrixXd actions;  // act_dim x n
    Eigen::VectorXd returns;  // discounted return of each pair's trajectory suffix
};

inline FlatPairs flatten_dataset(const ExpertDataset& ds, double discount) {
    size_t n = ds.n_pairs();
    if (n == 0) throw std::invalid_argument("flatten_dataset: empty dataset");
    const Eigen::Index obs_d = ds.trajectories.front().observations.front().size();
    const Eigen::Index act_d = ds.trajectories.front().actions.front().size();
    FlatPairs f;
    f.obs.resize(obs_d, static_cast<Eigen::Index>(n));
    f.actions.resize(act_d, static_cast<Eigen::Index>(n));
    f.returns.resize(static_cast<Eigen::Index>(n));
    Eigen::Index col = 0;
    for (const auto& traj : ds.trajectories) {
        traj.validate();
        const std::vector<double> g = discounted_returns(traj.rewards, discount);
        for (size_t t = 0; t < traj.observations.size(); ++t, ++col) {
            if (traj.observations[t].size() != obs_d || traj.actions[t].size() != act_d)
                throw std::invalid_argument("flatten_dataset: inconsistent dimensions");
            f.obs.col(col) = traj.observations[t];
            f.actions.col(col) = traj.actions[t];
            f.returns(col) = g[t];
        }
    }
    return f;
}

struct SplitIndices {
    std::vector<int> train, val;
};

// Shuffled 80/20 split over flat pairs; val = round(0.2 n), at least 1.
inline SplitIndices split_dataset(size_t n_pairs, Rng& rng, double train_fraction = 0.8) {
    if (n_pairs < 2) throw std::invalid_argument("split_dataset: need at least 2 pairs");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_dataset: train_fraction must be in (0,1)");
    std::vector<int> idx(n_pairs);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    const auto n_val = std::max<long>(
        1, std::lround((1.0 - train_fraction) * static_cast<double>(n_pairs)));
    SplitIndices s;
    s.val.assign(idx.begin(), idx.begin() + n_val);
    s.train.assign(idx.begin() + n_val, idx.end());
    if (s.train.empty()) throw std::invalid_argument("split_dataset: empty training split");
    return s;
}

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(idx[k]);
    return out;
}

inline Eigen::VectorXd select_entries(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(idx[k]);
    return out;
}

// --- early stopping ----------------------------------------------------------

// Patience-based stopper: tracks the best validation loss seen so far and
// requests a stop once `patience` consecutive epochs fail to improve it.
class EarlyStopper {
  public:
    explicit EarlyStopper(int patience) : patience_(patience) {
        if (patience < 1) throw std::invalid_argument("EarlyStopper: patience must be >= 1");
    }

    // Observe one epoch's validation loss; true means stop after this epoch.
    bool observe(double val_loss) {
        epoch_++;
        if (val_loss < best_) {
            best_ = val_loss;
            best_epoch_ = epoch_;
            since_improve_ = 0;
            return false;
        }
        return ++since_improve_ >= patience_;
    }

    bool improved() const { return epoch_ > 0 && since_improve_ == 0; }
    double best() const { return best_; }
    int best_epoch() const { return best_epoch_; }
    int epochs_seen() const { return epoch_; }

  private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int since_improve_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

// --- behavior cloning --------------------------------------------------------

struct BcLossResult {
    double loss = 0.0;
    MlpGrads grads;
};

// Negative mean log-likelihood of expert actions under the squashed Gaussian
// policy. The tanh-Jacobian terms are constant in the parameters (the expert
// action fixes u), so gradients flow through the Gaussian head only:
// d(-logpi)/d mu = -(u - mu)/sigma^2, d(-logpi)/d logsigma = 1 - ((u-mu)/sigma)^2.
inline BcLossResult bc_loss_and_grads(const MlpParams& actor, const SquashConfig& squash,
                                      const Eigen::MatrixXd& obs,
                                      const Eigen::MatrixXd& actions,
                                      bool want_grads = true) {
    const int B = static_cast<int>(obs.cols());
    if (B == 0) throw std::invalid_argument("bc_loss_and_grads: empty batch");
    if (actions.cols() != B) throw std::invalid_argument("bc_loss_and_grads: batch mismatch");
    MlpCache cache;
    const GaussianPolicyOutput out = split_policy_output(mlp_forward(actor, obs, &cache));
    const Eigen::MatrixXd u_hat = atanh_invert(actions, squash);
    const Eigen::VectorXd logp = detail::squashed_logprob_from_u(out, u_hat, squash);

    BcLossResult res;
    res.loss = -logp.mean();
    if (!want_grads) return res;

    const Eigen::ArrayXXd sigma = out.log_sigma.array().exp();
    const Eigen::ArrayXXd zhat = (u_hat - out.mu).array() / sigma;
    const Eigen::MatrixXd d_mu = (-(zhat / sigma) / B).matrix();
    const Eigen::MatrixXd d_log_sigma = ((1.0 - zhat.square()) / B).matrix();
    const Eigen::MatrixXd d_raw = merge_policy_grad(out, d_mu, d_log_sigma);
    res.grads = MlpGrads::zeros_like(actor);
    mlp_backward(actor, cache, d_raw, &res.grads);
    return res;
}

struct PretrainHistory {
    std::vector<double> train_losses;  // per-epoch mean over pairs
    std::vector<double> val_losses;    // per-epoch
    double initial_val_loss = std::numeric_limits<double>::quiet_NaN();
    double restored_val_loss = std::numeric_limits<double>::quiet_NaN();
    int best_epoch = 0;  // 0 means the initial parameters were kept
    int epochs_run = 0;
};

namespace detail {

// Shared epoch loop for actor cloning and critic regression: minibatch Adam,
// per-epoch validation, patience stopping, best-params restore, and a final
// guard that never returns parameters worse (on validation) than the input.
template <typename LossGradFn, typename ValLossFn>
PretrainHistory fit_with_early_stopping(MlpParams& params, int n_train, double lr,
                                        const PretrainConfig& cfg, uint64_t seed,
                                        const std::string& tag, LossGradFn loss_grad,
                                        ValLossFn val_loss) {
    PretrainHistory hist;
    hist.initial_val_loss = val_loss(params);
    if (cfg.max_epochs == 0) {
        hist.restored_val_loss = hist.initial_val_loss;
        return hist;
    }

    const MlpParams initial = params;
    MlpParams best = params;
    AdamState opt = AdamState::zeros_like(params);
    EarlyStopper stopper(cfg.patience);
    std::vector<int> order(static_cast<size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(seed, tag + ".epoch", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int start = 0; start < n_train; start += cfg.batch_size) {
            const int stop = std::min(start + cfg.batch_size, n_train);
            const std::vector<int> batch(order.begin() + start, order.begin() + stop);
            MlpGrads grads = MlpGrads::zeros_like(params);
            epoch_loss += loss_grad(params, batch, grads) * (stop - start);
            adam_step(params, grads, opt, lr);
        }
        hist.train_losses.push_back(epoch_loss / n_train);
        const double v = val_loss(params);
        hist.val_losses.push_back(v);
        hist.epochs_run = epoch;
        const bool stop = stopper.observe(v);
        if (stopper.improved()) best = params;
        if (stop) break;
    }

    if (stopper.best() < hist.initial_val_loss) {
        params = best;
        hist.best_epoch = stopper.best_epoch();
        hist.restored_val_loss = stopper.best();
    } else {
        // No epoch beat the starting point; return the original parameters.
        params = initial;
        hist.best_epoch = 0;
        hist.restored_val_loss = hist.initial_val_loss;
    }
    return hist;
}

}  // namespace detail

inline PretrainHistory bc_pretrain_actor(MlpParams& actor, const SquashConfig& squash,
                                         const Eigen::MatrixXd& train_obs,
                                         const Eigen::MatrixXd& train_act,
                                         const Eigen::MatrixXd& val_obs,
                                         const Eigen::MatrixXd& val_act,
                                         const PretrainConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (train_obs.cols() == 0 || val_obs.cols() == 0)
        throw std::invalid_argument("bc_pretrain_actor: empty split");
    return detail::fit_with_early_stopping(
        actor, static_cast<int>(train_obs.cols()), cfg.actor_lr, cfg, seed, "bc",
        [&](const MlpParams& p, const std::vector<int>& batch, MlpGrads& grads) {
            const BcLossResult r = bc_loss_and_grads(p, squash, select_columns(train_obs, batch),
                                                     select_columns(train_act, batch));
            grads = r.grads;
            return r.loss;
        },
        [&](const MlpParams& p) {
            return bc_loss_and_grads(p, squash, val_obs, val_act, false).loss;
        });
}

inline PretrainHistory pretrain_critic(MlpParams& critic, const Eigen::MatrixXd& train_x,
                                       const Eigen::VectorXd& train_y,
                                       const Eigen::MatrixXd& val_x,
                                       const Eigen::VectorXd& val_y,
                                       const PretrainConfig& cfg, uint64_t seed,
                                       const std::string& tag = "critic") {
    cfg.validate();
    if (train_x.cols() == 0 || val_x.cols() == 0)
        throw std::invalid_argument("pretrain_critic: empty split");
    return detail::fit_with_early_stopping(
        critic, static_cast<int>(train_x.cols()), cfg.critic_lr, cfg, seed, tag,
        [&](const MlpParams& p, const std::vector<int>& batch, MlpGrads& grads) {
            const CriticLossResult r = critic_loss_and_grads(p, select_columns(train_x, batch),
                                                             select_entries(train_y, batch));
            grads = r.grads;
            return r.loss;
        },
        [&](const MlpParams& p) {
            const Eigen::VectorXd q = mlp_forward(p, val_x).row(0).transpose();
            return (q - val_y).squaredNorm() / val_x.cols();
        });
}

struct PretrainReport {
    PretrainHistory actor, critic1, critic2;
    ReturnStats returns;
    size_t n_train = 0, n_val = 0;
};

// Full pretraining pass on an agent: clone the actor from the demonstrations,
// regress both critics to (normalized) discounted returns, then resync target
// networks and reset optimizer state for online fine-tuning.
inline PretrainReport pretrain_agent(SacAgent& agent, const ExpertDataset& dataset,
                                     const PretrainConfig& cfg, uint64_t seed) {
    cfg.validate();
    const FlatPairs flat = flatten_dataset(dataset, agent.config().discount);
    Rng split_rng(derive_seed(seed, "pretrain.split", 0));
    const SplitIndices split =
        split_dataset(static_cast<size_t>(flat.obs.cols()), split_rng, cfg.train_fraction);

    const Eigen::MatrixXd train_obs = select_columns(flat.obs, split.train);
    const Eigen::MatrixXd train_act = select_columns(flat.actions, split.train);
    const Eigen::MatrixXd val_obs = select_columns(flat.obs, split.val);
    const Eigen::MatrixXd val_act = select_columns(flat.actions, split.val);

    PretrainReport report;
    report.n_train = split.train.size();
    report.n_val = split.val.size();

    Eigen::VectorXd train_g = select_entries(flat.returns, split.train);
    Eigen::VectorXd val_g = select_entries(flat.returns, split.val);
    if (cfg.normalized_critic_targets) {
        const std::vector<double> g_train(train_g.data(), train_g.data() + train_g.size());
        report.returns = return_stats(g_train);
        train_g = ((train_g.array() - report.returns.mean) / report.returns.std).matrix();
        val_g = ((val_g.array() - report.returns.mean) / report.returns.std).matrix();
    }

    report.actor = bc_pretrain_actor(agent.actor(), agent.squash(), train_obs, train_act,
                                     val_obs, val_act, cfg, derive_seed(seed, "pretrain.actor", 0));

    Eigen::MatrixXd train_x(train_obs.rows() + train_act.rows(), train_obs.cols());
    train_x << train_obs, train_act;
    Eigen::MatrixXd val_x(val_obs.rows() + val_act.rows(), val_obs.cols());
    val_x << val_obs, val_act;
    report.critic1 = pretrain_critic(agent.critic1(), train_x, train_g, val_x, val_g, cfg,
                                     derive_seed(seed, "pretrain.critic1", 0), "critic1");
    report.critic2 = pretrain_critic(agent.critic2(), train_x, train_g, val_x, val_g, cfg,
                                     derive_seed(seed, "pretrain.critic2", 0), "critic2");

    agent.sync_targets();
    agent.reset_optimizers();
    return report;
}

}  // namespace windsteer
