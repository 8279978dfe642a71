#pragma once

// Minimal MLP kernel on Eigen: batched forward/backward with ReLU hidden
// activations, bias-corrected Adam, He-uniform init, JSON serialization.
// Columns are samples throughout: X is (in_dim x batch).

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "windsteer/rng.hpp"

namespace windsteer {

struct Linear {
    Eigen::MatrixXd w;  // (out x in)
    Eigen::VectorXd b;  // (out)
};

struct MlpParams {
    std::vector<Linear> layers;

    int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().w.cols()); }
    int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().w.rows()); }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("MlpParams: no layers");
        for (size_t l = 0; l < layers.size(); ++l) {
            const auto& lin = layers[l];
            if (lin.w.rows() != lin.b.size())
                throw std::invalid_argument("MlpParams: bias/weight row mismatch");
            if (l > 0 && lin.w.cols() != layers[l - 1].w.rows())
                throw std::invalid_argument("MlpParams: layer shapes do not chain");
            if (!lin.w.allFinite() || !lin.b.allFinite())
                throw std::invalid_argument("MlpParams: non-finite parameter");
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json layers_j = nlohmann::json::array();
        for (const auto& lin : layers) {
            std::vector<std::vector<double>> w(static_cast<size_t>(lin.w.rows()));
            for (Eigen::Index r = 0; r < lin.w.rows(); ++r) {
                w[static_cast<size_t>(r)].resize(static_cast<size_t>(lin.w.cols()));
                for (Eigen::Index c = 0; c < lin.w.cols(); ++c)
                    w[static_cast<size_t>(r)][static_cast<size_t>(c)] = lin.w(r, c);
            }
            std::vector<double> b(lin.b.data(), lin.b.data() + lin.b.size());
            layers_j.push_back({{"w", w}, {"b", b}});
        }
        return {{"layers", layers_j}};
    }

    static MlpParams from_json(const nlohmann::json& j) {
        MlpParams p;
        if (!j.contains("layers")) throw std::invalid_argument("MlpParams: missing layers");
        for (const auto& [key, val] : j.items()) {
            if (key != "layers") throw std::invalid_argument("MlpParams: unknown key '" + key + "'");
            for (const auto& lj : val) {
                auto w = lj.at("w").get<std::vector<std::vector<double>>>();
                auto b = lj.at("b").get<std::vector<double>>();
                if (w.empty() || w.size() != b.size())
                    throw std::invalid_argument("MlpParams: bad layer shape");
                Linear lin;
                lin.w.resize(static_cast<Eigen::Index>(w.size()),
                             static_cast<Eigen::Index>(w[0].size()));
                for (size_t r = 0; r < w.size(); ++r) {
                    if (w[r].size() != w[0].size())
                        throw std::invalid_argument("MlpParams: ragged weight matrix");
                    for (size_t c = 0; c < w[r].size(); ++c)
                        lin.w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r][c];
                }
                lin.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
                p.layers.push_back(std::move(lin));
            }
        }
        p.validate();
        return p;
    }
};

// He-style uniform init U(+-sqrt(6/fan_in)); biases zero. final_scale shrinks
// the last layer (near-zero initial policy outputs).
inline MlpParams make_mlp(const std::vector<int>& sizes, Rng& rng, double final_scale = 1.0) {
    if (sizes.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output size");
    MlpParams p;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (sizes[l] < 1 || sizes[l + 1] < 1) throw std::invalid_argument("make_mlp: sizes must be >= 1");
        Linear lin;
        lin.w.resize(sizes[l + 1], sizes[l]);
        double bound = std::sqrt(6.0 / sizes[l]);
        if (l + 2 == sizes.size()) bound *= final_scale;
        for (Eigen::Index r = 0; r < lin.w.rows(); ++r)
            for (Eigen::Index c = 0; c < lin.w.cols(); ++c)
                lin.w(r, c) = rng.uniform(-bound, bound);
        lin.b = Eigen::VectorXd::Zero(sizes[l + 1]);
        p.layers.push_back(std::move(lin));
    }
    return p;
}

struct MlpCache {
    std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[l+1] = layer l output (post-ReLU)
    std::vector<Eigen::MatrixXd> pre;   // pre[l] = pre-activation of layer l
};

// Forward pass; pass a cache to enable backprop.
inline Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& x,
                                   MlpCache* cache = nullptr) {
    if (x.rows() != p.input_dim()) throw std::invalid_argument("mlp_forward: input dim mismatch");
    if (cache) {
        cache->acts.clear();
        cache->pre.clear();
        cache->acts.push_back(x);
    }
    Eigen::MatrixXd a = x;
    for (size_t l = 0; l < p.layers.size(); ++l) {
        Eigen::MatrixXd z = (p.layers[l].w * a).colwise() + p.layers[l].b;
        if (cache) cache->pre.push_back(z);
        if (l + 1 < p.layers.size())
            a = z.cwiseMax(0.0);
        else
            a = std::move(z);
        if (cache) cache->acts.push_back(a);
    }
    return a;
}

struct MlpGrads {
    std::vector<Linear> layers;

    static MlpGrads zeros_like(const MlpParams& p) {
        MlpGrads g;
        for (const auto& lin : p.layers)
            g.layers.push_back({Eigen::MatrixXd::Zero(lin.w.rows(), lin.w.cols()),
                                Eigen::VectorXd::Zero(lin.b.size())});
        return g;
    }
};

// Reverse-mode gradients. dy is the loss gradient w.r.t. the network output
// (out_dim x batch). Returns the gradient w.r.t. the input; fills param
// gradients when grads != nullptr.
inline Eigen::MatrixXd mlp_backward(const MlpParams& p, const MlpCache& cache,
                                    const Eigen::MatrixXd& dy, MlpGrads* grads = nullptr) {
    if (cache.acts.size() != p.layers.size() + 1)
        throw std::invalid_argument("mlp_backward: cache does not match params");
    if (dy.rows() != p.output_dim() || dy.cols() != cache.acts[0].cols())
        throw std::invalid_argument("mlp_backward: upstream gradient shape mismatch");
    if (grads) *grads = MlpGrads::zeros_like(p);

    Eigen::MatrixXd g = dy;
    for (size_t li = p.layers.size(); li-- > 0;) {
        if (li + 1 < p.layers.size())  // ReLU between layer li and li+1
            g = g.cwiseProduct((cache.pre[li].array() > 0.0).cast<double>().matrix());
        if (grads) {
            (*grads).layers[li].w = g * cache.acts[li].transpose();
            (*grads).layers[li].b = g.rowwise().sum();
        }
        g = p.layers[li].w.transpose() * g;
    }
    return g;
}

struct AdamState {
    std::vector<Linear> m, v;
    long t = 0;

    static AdamState zeros_like(const MlpParams& p) {
        AdamState s;
        for (const auto& lin : p.layers) {
            s.m.push_back({Eigen::MatrixXd::Zero(lin.w.rows(), lin.w.cols()),
                           Eigen::VectorXd::Zero(lin.b.size())});
            s.v.push_back({Eigen::MatrixXd::Zero(lin.w.rows(), lin.w.cols()),
                           Eigen::VectorXd::Zero(lin.b.size())});
        }
        return s;
    }
};

inline void adam_step(MlpParams& p, const MlpGrads& g, AdamState& s, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (g.layers.size() != p.layers.size() || s.m.size() != p.layers.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    s.t += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
    auto upd = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    };
    for (size_t l = 0; l < p.layers.size(); ++l) {
        upd(p.layers[l].w, g.layers[l].w, s.m[l].w, s.v[l].w);
        upd(p.layers[l].b, g.layers[l].b, s.m[l].b, s.v[l].b);
    }
}

// Scalar Adam for the entropy temperature (optimized in log space).
struct AdamScalar {
    double m = 0.0, v = 0.0;
    long t = 0;

    void step(double& param, double grad, double lr, double beta1 = 0.9, double beta2 = 0.999,
              double eps = 1e-8) {
        t += 1;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad * grad;
        double mh = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
        double vh = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
        param -= lr * mh / (std::sqrt(vh) + eps);
    }
};

}  // namespace windsteer
