#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ioda/dataio.hpp"
#include "ioda/errors.hpp"
#include "ioda/losses.hpp"
#include "ioda/models.hpp"
#include "ioda/nn/adam.hpp"
#include "ioda/nn/checkpoint.hpp"
#include "ioda/nn/grad_check.hpp"

// Adversarial training loop (alternating discriminator and
// encoder/generator/decoder/predictor updates), the supervised baselines, and
// evaluation of polar-vector prediction.

namespace ioda {

struct TrainConfig {
    LossWeights weights;
    double lr = 1e-3;
    int batch_size = 32;
    long long steps = 1000;
    int disc_steps_per_gen_step = 1;
    std::uint64_t seed = 1;
    int window_n = 200;
    int d_z = 64;
    std::string source_domain = "source";
    std::string target_domain = "target";

    // Weight of the adversarial term in the generator objective. Zero turns
    // the loop into plain supervised prediction training (the baseline path).
    double gan_weight = 1.0;

    int enc_hidden = 32;
    int gen_hidden = 32;
    int pred_hidden = 32;
    int disc_channels = 16;
    int disc_hidden = 24;
    int disc_kernel = 5;
    int disc_stride = 2;

    long long checkpoint_every = 0;  // 0 = only at the end
    bool check_invariants = false;   // per-step parameter-freeze assertions

    ModelConfig model_config() const {
        ModelConfig m;
        m.window_n = window_n;
        m.d_z = d_z;
        m.enc_hidden = enc_hidden;
        m.gen_hidden = gen_hidden;
        m.pred_hidden = pred_hidden;
        m.disc_channels = disc_channels;
        m.disc_hidden = disc_hidden;
        m.disc_kernel = disc_kernel;
        m.disc_stride = disc_stride;
        m.source_domain = source_domain;
        m.target_domain = target_domain;
        return m;
    }

    void validate() const {
        weights.validate();
        if (!(lr > 0.0)) throw UsageError("TrainConfig: lr must be > 0");
        if (batch_size < 1) throw UsageError("TrainConfig: batch_size must be >= 1");
        if (steps < 0) throw UsageError("TrainConfig: steps must be >= 0");
        if (disc_steps_per_gen_step < 1)
            throw UsageError("TrainConfig: disc_steps_per_gen_step must be >= 1");
        if (gan_weight < 0.0) throw UsageError("TrainConfig: gan_weight must be >= 0");
        model_config().validate();
    }
};

struct EvalReport {
    double dl_rmse = 0.0;
    double dpsi_rmse = 0.0;
    double dl_mae = 0.0;
    double dpsi_mae = 0.0;
    std::size_t n_windows = 0;
};

struct TrainResult {
    ModelBundle bundle;
    NormStats stats;
    std::vector<LossReport> history;
};

using CheckpointHook =
    std::function<void(long long step, const ModelBundle&, const NormStats&)>;

namespace train_detail {

inline nn::Tensor batch_tensor(const std::vector<Window>& pool,
                               const std::vector<std::size_t>& idx,
                               const NormStats& stats) {
    int n = pool[idx[0]].n;
    int B = static_cast<int>(idx.size());
    std::vector<double> v(static_cast<std::size_t>(n) * B * 6);
    for (int b = 0; b < B; ++b) {
        const Window& w = pool[idx[b]];
        if (w.n != n) throw UsageError("batch_tensor: inconsistent window lengths");
        for (int t = 0; t < n; ++t)
            for (int c = 0; c < 6; ++c)
                v[(static_cast<std::size_t>(t) * B + b) * 6 + c] =
                    (w.at(t, c) - stats.mean[c]) / stats.std[c];
    }
    return nn::Tensor::from_values(n * B, 6, std::move(v));
}

inline nn::Tensor label_tensor(const std::vector<LabelledWindow>& pool,
                               const std::vector<std::size_t>& idx) {
    int B = static_cast<int>(idx.size());
    std::vector<double> v(static_cast<std::size_t>(B) * 2);
    for (int b = 0; b < B; ++b) {
        v[2 * b] = pool[idx[b]].label.dl;
        v[2 * b + 1] = pool[idx[b]].label.dpsi;
    }
    return nn::Tensor::from_values(B, 2, std::move(v));
}

inline std::vector<std::size_t> draw_indices(std::mt19937_64& rng,
                                             std::size_t pool_size, int count) {
    std::uniform_int_distribution<std::size_t> dist(0, pool_size - 1);
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) i = dist(rng);
    return idx;
}

inline std::map<std::string, std::vector<double>> snapshot(const nn::ParamSet& ps) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, p] : ps) out[name] = p.values();
    return out;
}

inline bool params_equal(const nn::ParamSet& ps,
                         const std::map<std::string, std::vector<double>>& snap) {
    for (const auto& [name, p] : ps) {
        auto it = snap.find(name);
        if (it == snap.end() || it->second != p.values()) return false;
    }
    return true;
}

// One alternating training step over fixed batches. Shares the forward trunk
// between the discriminator and generator phases; the discriminators are
// updated first on detached fakes, then the generator-side objective is built
// on the refreshed critics.
class AdaptEngine {
public:
    AdaptEngine(const std::vector<LabelledWindow>& source,
                const std::vector<Window>& target, const TrainConfig& cfg)
        : source_(source), target_(target), cfg_(cfg) {
        cfg_.validate();
        if (source_.empty()) throw UsageError("training: empty source dataset");
        const LossWeights& w = cfg_.weights;
        adversarial_ = cfg_.gan_weight > 0.0;
        needs_target_ = adversarial_ || w.lambda1 > 0.0 || w.lambda3 > 0.0 ||
                        w.lambda4 > 0.0;
        if (needs_target_ && target_.empty())
            throw UsageError("training: empty target dataset");

        source_windows_.reserve(source_.size());
        for (const auto& lw : source_) source_windows_.push_back(lw.window);
        stats_ = fit_norm_stats(source_windows_);

        bundle_ = ModelBundle::init(cfg_.model_config(), cfg_.seed);
        gen_params_ = bundle_.generator_side_params();
        disc_params_ = bundle_.discriminator_params();
        opt_gen_ = nn::AdamOptimizer({cfg_.lr, 0.9, 0.999, 1e-8});
        opt_disc_ = nn::AdamOptimizer({cfg_.lr, 0.9, 0.999, 1e-8});
        src_rng_.seed(cfg_.seed ^ 0xa02bdbf7bb3c0a7ull);
        tgt_rng_.seed(cfg_.seed ^ 0x6c62272e07bb0142ull);
    }

    LossReport step(long long step_index) {
        const LossWeights& w = cfg_.weights;
        DomainTag src{cfg_.source_domain}, tgt{cfg_.target_domain};
        int B = cfg_.batch_size;

        auto src_idx = draw_indices(src_rng_, source_.size(), B);
        nn::Tensor x_s = batch_tensor(source_windows_, src_idx, stats_);
        nn::Tensor y_s = label_tensor(source_, src_idx);
        nn::Tensor x_t;
        if (needs_target_) {
            auto tgt_idx = draw_indices(tgt_rng_, target_.size(), B);
            x_t = batch_tensor(target_, tgt_idx, stats_);
        }

        std::map<std::string, std::vector<double>> gen_snap, disc_snap;
        if (cfg_.check_invariants) gen_snap = snapshot(gen_params_);

        // Shared trunk.
        LatentCode z_s = encode(bundle_, x_s, B);
        LatentCode z_t;
        nn::Tensor fake_t, fake_s;
        bool needs_fakes = adversarial_ || w.lambda3 > 0.0 || w.lambda4 > 0.0;
        if (needs_target_) z_t = encode(bundle_, x_t, B);
        if (needs_fakes) {
            fake_t = generate(bundle_, z_s, tgt);
            fake_s = generate(bundle_, z_t, src);
        }

        // Discriminator phase.
        if (adversarial_) {
            nn::Tensor fake_t_det = nn::detach(fake_t);
            nn::Tensor fake_s_det = nn::detach(fake_s);
            for (int k = 0; k < cfg_.disc_steps_per_gen_step; ++k) {
                nn::Tensor d_loss = nn::add(
                    nn::scale(nn::add(nn::lsq(discriminate(bundle_, x_t, B, tgt), 1.0),
                                      nn::lsq(discriminate(bundle_, fake_t_det, B, tgt), 0.0)),
                              0.5),
                    nn::scale(nn::add(nn::lsq(discriminate(bundle_, x_s, B, src), 1.0),
                                      nn::lsq(discriminate(bundle_, fake_s_det, B, src), 0.0)),
                              0.5));
                if (!std::isfinite(d_loss.scalar_value()))
                    throw NumericError("non-finite discriminator loss at step " +
                                       std::to_string(step_index));
                nn::zero_grad(disc_params_);
                nn::backward(d_loss);
                opt_disc_.step(disc_params_);
                nn::release_graph(d_loss);
            }
        }
        if (cfg_.check_invariants && adversarial_ && !params_equal(gen_params_, gen_snap))
            throw NumericError("invariant violation: discriminator update touched "
                               "generator-side parameters");

        // Generator phase.
        if (cfg_.check_invariants) disc_snap = snapshot(disc_params_);
        std::vector<nn::Tensor> terms;
        LossReport report;
        if (adversarial_) {
            nn::Tensor gen_gan = nn::add(
                nn::lsq(discriminate(bundle_, fake_t, B, tgt), 1.0),
                nn::lsq(discriminate(bundle_, fake_s, B, src), 1.0));
            report.gan = cfg_.gan_weight * gen_gan.scalar_value();
            terms.push_back(nn::scale(gen_gan, cfg_.gan_weight));
        }
        if (w.lambda1 > 0.0) {
            nn::Tensor ae = nn::add(nn::mse(decode(bundle_, z_s), x_s),
                                    nn::mse(decode(bundle_, z_t), x_t));
            report.ae = ae.scalar_value();
            terms.push_back(nn::scale(ae, w.lambda1));
        }
        if (w.lambda2 > 0.0) {
            nn::Tensor pred =
                polar_prediction_error(predict_polar(bundle_, z_s), y_s);
            report.pred = pred.scalar_value();
            terms.push_back(nn::scale(pred, w.lambda2));
        }
        LatentCode z_fake_t, z_fake_s;
        if (w.lambda3 > 0.0 || w.lambda4 > 0.0) {
            z_fake_t = encode(bundle_, fake_t, B);
            z_fake_s = encode(bundle_, fake_s, B);
        }
        if (w.lambda3 > 0.0) {
            nn::Tensor cyc = nn::add(
                nn::mse(generate(bundle_, z_fake_t, src), x_s),
                nn::mse(generate(bundle_, z_fake_s, tgt), x_t));
            report.cycle = cyc.scalar_value();
            terms.push_back(nn::scale(cyc, w.lambda3));
        }
        if (w.lambda4 > 0.0) {
            nn::Tensor percep = nn::add(nn::mse(z_fake_t.z, nn::detach(z_s.z)),
                                        nn::mse(z_fake_s.z, nn::detach(z_t.z)));
            report.percep = percep.scalar_value();
            terms.push_back(nn::scale(percep, w.lambda4));
        }

        if (terms.empty()) {
            report.total = 0.0;
            return report;
        }
        nn::Tensor total = terms[0];
        for (std::size_t i = 1; i < terms.size(); ++i) total = nn::add(total, terms[i]);
        report.total = total.scalar_value();
        if (!std::isfinite(report.total))
            throw NumericError("non-finite training loss at step " +
                               std::to_string(step_index));

        nn::zero_grad(gen_params_);
        nn::backward(total);
        opt_gen_.step(gen_params_);
        nn::release_graph(total);
        if (needs_fakes) {
            // The discriminator-phase graph hangs off the fakes; drop it too.
            nn::release_graph(fake_t);
            nn::release_graph(fake_s);
        }

        if (cfg_.check_invariants && !params_equal(disc_params_, disc_snap))
            throw NumericError("invariant violation: generator update touched "
                               "discriminator parameters");
        return report;
    }

    const ModelBundle& bundle() const { return bundle_; }
    const NormStats& stats() const { return stats_; }

private:
    std::vector<LabelledWindow> source_;
    std::vector<Window> target_;
    std::vector<Window> source_windows_;
    TrainConfig cfg_;
    bool adversarial_ = false;
    bool needs_target_ = false;
    NormStats stats_;
    ModelBundle bundle_;
    nn::ParamSet gen_params_, disc_params_;
    nn::AdamOptimizer opt_gen_, opt_disc_;
    std::mt19937_64 src_rng_, tgt_rng_;
};

}  // namespace train_detail

// Unsupervised adaptation: labelled source windows, unlabelled target windows.
// Normalization statistics come from the source training windows only and are
// reused for every domain.
inline TrainResult train_adapt(const std::vector<LabelledWindow>& source,
                               const std::vector<Window>& target,
                               const TrainConfig& config,
                               const CheckpointHook& hook = nullptr) {
    train_detail::AdaptEngine engine(source, target, config);
    TrainResult result{engine.bundle(), engine.stats(), {}};
    result.history.reserve(static_cast<std::size_t>(config.steps));
    for (long long s = 0; s < config.steps; ++s) {
        result.history.push_back(engine.step(s));
        if (hook && config.checkpoint_every > 0 && (s + 1) % config.checkpoint_every == 0)
            hook(s + 1, engine.bundle(), engine.stats());
    }
    result.bundle = engine.bundle();
    result.stats = engine.stats();
    return result;
}

// Supervised baseline: trains the encoder+predictor path on prediction loss
// alone. Exactly the adaptation loop restricted to L_pred, so the two paths
// coincide step for step when the extra weights vanish.
inline TrainResult train_supervised(const std::vector<LabelledWindow>& labelled,
                                    const TrainConfig& config,
                                    const CheckpointHook& hook = nullptr) {
    TrainConfig cfg = config;
    cfg.gan_weight = 0.0;
    cfg.weights.lambda1 = 0.0;
    cfg.weights.lambda3 = 0.0;
    cfg.weights.lambda4 = 0.0;
    return train_adapt(labelled, {}, cfg, hook);
}

// Polar-vector accuracy over held-out labelled windows. Angular errors are
// wrapped.
inline EvalReport evaluate(const ModelBundle& bundle, const NormStats& stats,
                           const std::vector<LabelledWindow>& eval_set,
                           int batch_size = 32) {
    if (eval_set.empty()) throw UsageError("evaluate: empty evaluation set");
    nn::NoGradGuard no_grad;
    double se_dl = 0.0, se_dpsi = 0.0, ae_dl = 0.0, ae_dpsi = 0.0;
    std::size_t done = 0;
    while (done < eval_set.size()) {
        std::size_t chunk = std::min<std::size_t>(batch_size, eval_set.size() - done);
        std::vector<std::size_t> idx(chunk);
        std::vector<Window> pool;
        pool.reserve(chunk);
        for (std::size_t i = 0; i < chunk; ++i) {
            idx[i] = i;
            pool.push_back(eval_set[done + i].window);
        }
        nn::Tensor x = train_detail::batch_tensor(pool, idx, stats);
        nn::Tensor pred = predict_polar(bundle, encode(bundle, x, static_cast<int>(chunk)));
        for (std::size_t i = 0; i < chunk; ++i) {
            const PolarVector& label = eval_set[done + i].label;
            double e_dl = pred.at(static_cast<int>(i), 0) - label.dl;
            double e_dpsi = wrap_angle(pred.at(static_cast<int>(i), 1) - label.dpsi);
            se_dl += e_dl * e_dl;
            se_dpsi += e_dpsi * e_dpsi;
            ae_dl += std::abs(e_dl);
            ae_dpsi += std::abs(e_dpsi);
        }
        done += chunk;
    }
    EvalReport r;
    r.n_windows = eval_set.size();
    r.dl_rmse = std::sqrt(se_dl / r.n_windows);
    r.dpsi_rmse = std::sqrt(se_dpsi / r.n_windows);
    r.dl_mae = ae_dl / r.n_windows;
    r.dpsi_mae = ae_dpsi / r.n_windows;
    return r;
}

// Time-pooled latent code of each window, one row per window.
inline std::vector<std::vector<double>> pooled_latents(
    const ModelBundle& bundle, const NormStats& stats,
    const std::vector<Window>& windows, int batch_size = 32) {
    nn::NoGradGuard no_grad;
    std::vector<std::vector<double>> out;
    out.reserve(windows.size());
    std::size_t done = 0;
    while (done < windows.size()) {
        std::size_t chunk = std::min<std::size_t>(batch_size, windows.size() - done);
        std::vector<std::size_t> idx(chunk);
        std::vector<Window> pool(windows.begin() + done, windows.begin() + done + chunk);
        for (std::size_t i = 0; i < chunk; ++i) idx[i] = i;
        LatentCode z = encode(bundle, train_detail::batch_tensor(pool, idx, stats),
                              static_cast<int>(chunk));
        for (std::size_t b = 0; b < chunk; ++b) {
            std::vector<double> code(z.d_z, 0.0);
            for (int t = 0; t < z.steps; ++t)
                for (int c = 0; c < z.d_z; ++c)
                    code[c] += z.z.at(t * static_cast<int>(chunk) + static_cast<int>(b), c);
            for (double& v : code) v /= z.steps;
            out.push_back(std::move(code));
        }
        done += chunk;
    }
    return out;
}

// Squared maximum-mean-discrepancy with a Gaussian kernel between two sample
// sets; bandwidth is the median pairwise distance over the pooled samples.
inline double mmd_squared(const std::vector<std::vector<double>>& xs,
                          const std::vector<std::vector<double>>& ys) {
    if (xs.empty() || ys.empty()) throw UsageError("mmd_squared: empty sample set");
    auto sq_dist = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double d = a[i] - b[i];
            s += d * d;
        }
        return s;
    };

    std::vector<std::vector<double>> all(xs);
    all.insert(all.end(), ys.begin(), ys.end());
    std::vector<double> dists;
    dists.reserve(all.size() * (all.size() - 1) / 2);
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            dists.push_back(std::sqrt(sq_dist(all[i], all[j])));
    if (dists.empty()) return 0.0;
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    double sigma = dists[dists.size() / 2];
    if (sigma <= 0.0) return 0.0;  // degenerate: every sample identical
    double gamma = 1.0 / (2.0 * sigma * sigma);

    auto kernel_mean = [&](const std::vector<std::vector<double>>& a,
                           const std::vector<std::vector<double>>& b) {
        double s = 0.0;
        for (const auto& x : a)
            for (const auto& y : b) s += std::exp(-gamma * sq_dist(x, y));
        return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    };
    return kernel_mean(xs, xs) + kernel_mean(ys, ys) - 2.0 * kernel_mean(xs, ys);
}

// How far apart the two domains sit in latent space.
inline double latent_domain_gap(const ModelBundle& bundle, const NormStats& stats,
                                const std::vector<Window>& source_windows,
                                const std::vector<Window>& target_windows) {
    return mmd_squared(pooled_latents(bundle, stats, source_windows),
                       pooled_latents(bundle, stats, target_windows));
}

// --- config file and report serialization -----------------------------------

inline std::string serialize_train_config(const TrainConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "lambda1 = " << c.weights.lambda1 << "\n"
        << "lambda2 = " << c.weights.lambda2 << "\n"
        << "lambda3 = " << c.weights.lambda3 << "\n"
        << "lambda4 = " << c.weights.lambda4 << "\n"
        << "lr = " << c.lr << "\n"
        << "batch_size = " << c.batch_size << "\n"
        << "steps = " << c.steps << "\n"
        << "disc_steps_per_gen_step = " << c.disc_steps_per_gen_step << "\n"
        << "seed = " << c.seed << "\n"
        << "window_n = " << c.window_n << "\n"
        << "d_z = " << c.d_z << "\n"
        << "source_domain = " << c.source_domain << "\n"
        << "target_domain = " << c.target_domain << "\n"
        << "gan_weight = " << c.gan_weight << "\n"
        << "enc_hidden = " << c.enc_hidden << "\n"
        << "gen_hidden = " << c.gen_hidden << "\n"
        << "pred_hidden = " << c.pred_hidden << "\n"
        << "disc_channels = " << c.disc_channels << "\n"
        << "disc_hidden = " << c.disc_hidden << "\n"
        << "disc_kernel = " << c.disc_kernel << "\n"
        << "disc_stride = " << c.disc_stride << "\n"
        << "checkpoint_every = " << c.checkpoint_every << "\n";
    return out.str();
}

inline TrainConfig parse_train_config_text(const std::string& text,
                                           const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw UsageError(origin + ": config line without '=': " + s);
        kv[detail::trim(s.substr(0, eq))] = detail::trim(s.substr(eq + 1));
    }

    auto require = [&](const std::string& key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end())
            throw UsageError(origin + ": missing config key '" + key + "'");
        return it->second;
    };
    auto optional = [&](const std::string& key,
                        const std::string& fallback) -> std::string {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    };
    auto to_double = [&](const std::string& key, const std::string& v) {
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw UsageError(origin + ": bad numeric value for '" + key + "'");
        }
    };
    auto to_ll = [&](const std::string& key, const std::string& v) {
        try {
            return std::stoll(v);
        } catch (const std::exception&) {
            throw UsageError(origin + ": bad integer value for '" + key + "'");
        }
    };

    TrainConfig c;
    c.weights.lambda1 = to_double("lambda1", require("lambda1"));
    c.weights.lambda2 = to_double("lambda2", require("lambda2"));
    c.weights.lambda3 = to_double("lambda3", require("lambda3"));
    c.weights.lambda4 = to_double("lambda4", require("lambda4"));
    c.lr = to_double("lr", require("lr"));
    c.batch_size = static_cast<int>(to_ll("batch_size", require("batch_size")));
    c.steps = to_ll("steps", require("steps"));
    c.disc_steps_per_gen_step = static_cast<int>(
        to_ll("disc_steps_per_gen_step", require("disc_steps_per_gen_step")));
    c.seed = static_cast<std::uint64_t>(to_ll("seed", require("seed")));
    c.window_n = static_cast<int>(to_ll("window_n", require("window_n")));
    c.d_z = static_cast<int>(to_ll("d_z", require("d_z")));
    c.source_domain = require("source_domain");
    c.target_domain = require("target_domain");
    c.gan_weight = to_double("gan_weight", optional("gan_weight", "1"));
    c.enc_hidden = static_cast<int>(to_ll("enc_hidden", optional("enc_hidden", "32")));
    c.gen_hidden = static_cast<int>(to_ll("gen_hidden", optional("gen_hidden", "32")));
    c.pred_hidden = static_cast<int>(to_ll("pred_hidden", optional("pred_hidden", "32")));
    c.disc_channels =
        static_cast<int>(to_ll("disc_channels", optional("disc_channels", "16")));
    c.disc_hidden = static_cast<int>(to_ll("disc_hidden", optional("disc_hidden", "24")));
    c.disc_kernel = static_cast<int>(to_ll("disc_kernel", optional("disc_kernel", "5")));
    c.disc_stride = static_cast<int>(to_ll("disc_stride", optional("disc_stride", "2")));
    c.checkpoint_every =
        to_ll("checkpoint_every", optional("checkpoint_every", "0"));

    static const std::vector<std::string> known = {
        "lambda1", "lambda2", "lambda3", "lambda4", "lr", "batch_size", "steps",
        "disc_steps_per_gen_step", "seed", "window_n", "d_z", "source_domain",
        "target_domain", "gan_weight", "enc_hidden", "gen_hidden", "pred_hidden",
        "disc_channels", "disc_hidden", "disc_kernel", "disc_stride",
        "checkpoint_every"};
    for (const auto& [key, value] : kv)
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw UsageError(origin + ": unknown config key '" + key + "'");

    c.validate();
    return c;
}

inline TrainConfig parse_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_train_config_text(ss.str(), path);
}

inline void write_eval_report(const std::string& path, const EvalReport& r) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write eval report: " + path);
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "dl_rmse = %.17g\ndpsi_rmse = %.17g\ndl_mae = %.17g\n"
                  "dpsi_mae = %.17g\nn_windows = %zu\n",
                  r.dl_rmse, r.dpsi_rmse, r.dl_mae, r.dpsi_mae, r.n_windows);
    out << buf;
}

inline EvalReport read_eval_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open eval report: " + path);
    EvalReport r;
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key == "dl_rmse") r.dl_rmse = std::stod(value);
        else if (key == "dpsi_rmse") r.dpsi_rmse = std::stod(value);
        else if (key == "dl_mae") r.dl_mae = std::stod(value);
        else if (key == "dpsi_mae") r.dpsi_mae = std::stod(value);
        else if (key == "n_windows") r.n_windows = std::stoull(value);
        else throw DataError(path + ": unknown eval report key '" + key + "'");
    }
    return r;
}

// Checkpoint metadata: model geometry, normalization statistics, and the
// training mode, embedded next to the parameters.
inline std::map<std::string, std::string> checkpoint_meta(const ModelConfig& cfg,
                                                          const NormStats& stats,
                                                          const std::string& mode) {
    std::map<std::string, std::string> meta;
    auto put_d = [&](const std::string& k, double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        meta[k] = buf;
    };
    meta["window_n"] = std::to_string(cfg.window_n);
    meta["d_z"] = std::to_string(cfg.d_z);
    meta["enc_hidden"] = std::to_string(cfg.enc_hidden);
    meta["gen_hidden"] = std::to_string(cfg.gen_hidden);
    meta["pred_hidden"] = std::to_string(cfg.pred_hidden);
    meta["disc_channels"] = std::to_string(cfg.disc_channels);
    meta["disc_hidden"] = std::to_string(cfg.disc_hidden);
    meta["disc_kernel"] = std::to_string(cfg.disc_kernel);
    meta["disc_stride"] = std::to_string(cfg.disc_stride);
    meta["source_domain"] = cfg.source_domain;
    meta["target_domain"] = cfg.target_domain;
    meta["mode"] = mode;
    for (int c = 0; c < 6; ++c) {
        put_d("norm_mean_" + std::to_string(c), stats.mean[c]);
        put_d("norm_std_" + std::to_string(c), stats.std[c]);
    }
    return meta;
}

struct LoadedModel {
    ModelBundle bundle;
    NormStats stats;
    std::string mode;
};

inline LoadedModel load_model_checkpoint(const std::string& path) {
    auto [params, meta] = nn::load_checkpoint(path);
    auto need = [&](const std::string& k) -> std::string {
        auto it = meta.find(k);
        if (it == meta.end())
            throw DataError(path + ": checkpoint missing metadata '" + k + "'");
        return it->second;
    };
    ModelConfig cfg;
    cfg.window_n = std::stoi(need("window_n"));
    cfg.d_z = std::stoi(need("d_z"));
    cfg.enc_hidden = std::stoi(need("enc_hidden"));
    cfg.gen_hidden = std::stoi(need("gen_hidden"));
    cfg.pred_hidden = std::stoi(need("pred_hidden"));
    cfg.disc_channels = std::stoi(need("disc_channels"));
    cfg.disc_hidden = std::stoi(need("disc_hidden"));
    cfg.disc_kernel = std::stoi(need("disc_kernel"));
    cfg.disc_stride = std::stoi(need("disc_stride"));
    cfg.source_domain = need("source_domain");
    cfg.target_domain = need("target_domain");

    LoadedModel out{ModelBundle::from_params(cfg, params), {}, need("mode")};
    for (int c = 0; c < 6; ++c) {
        out.stats.mean[c] = std::stod(need("norm_mean_" + std::to_string(c)));
        out.stats.std[c] = std::stod(need("norm_std_" + std::to_string(c)));
    }
    return out;
}

inline void save_model_checkpoint(const std::string& path, const ModelBundle& bundle,
                                  const NormStats& stats, const std::string& mode) {
    nn::save_checkpoint(path, bundle.params,
                        checkpoint_meta(bundle.config, stats, mode));
}

}  // namespace ioda
