#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ioda/dataio.hpp"
#include "ioda/errors.hpp"
#include "ioda/nn/gru.hpp"
#include "ioda/nn/params.hpp"
#include "ioda/nn/tensor.hpp"

// The network set: one shared sequence encoder, per-domain sequence
// generators, a domain-agnostic reconstruction decoder, a polar-vector
// predictor, and per-domain discriminators.
//
// Sequence tensors are time-major: a batch of B windows of n frames is a
// (n*B) x 6 tensor with row t*B + b.

namespace ioda {

struct ModelConfig {
    int window_n = 200;
    int d_z = 64;
    int enc_hidden = 32;  // per direction
    int gen_hidden = 32;
    int pred_hidden = 32;
    int disc_channels = 16;
    int disc_hidden = 24;
    int disc_kernel = 5;
    int disc_stride = 2;
    std::string source_domain = "source";
    std::string target_domain = "target";

    static constexpr int kDownsample = 4;

    int latent_steps() const { return window_n / kDownsample; }

    int disc_conv_out(int t) const {
        for (int layer = 0; layer < 3; ++layer) t = (t - disc_kernel) / disc_stride + 1;
        return t;
    }

    void validate() const {
        if (window_n < kDownsample || window_n % kDownsample != 0)
            throw UsageError("ModelConfig: window_n must be a positive multiple of 4");
        if (d_z < 1 || enc_hidden < 1 || gen_hidden < 1 || pred_hidden < 1 ||
            disc_channels < 1 || disc_hidden < 1)
            throw UsageError("ModelConfig: widths must be positive");
        if (disc_kernel < 1 || disc_stride < 1)
            throw UsageError("ModelConfig: bad discriminator conv geometry");
        int t = window_n;
        for (int layer = 0; layer < 3; ++layer) {
            if (t < disc_kernel)
                throw UsageError("ModelConfig: window too short for the "
                                 "discriminator conv stack");
            t = (t - disc_kernel) / disc_stride + 1;
        }
        if (source_domain.empty() || target_domain.empty() ||
            source_domain == target_domain)
            throw UsageError("ModelConfig: need two distinct domain names");
    }
};

// Domain-invariant representation: one d_z vector per downsampled time step,
// batched time-major ((steps*batch) x d_z).
struct LatentCode {
    nn::Tensor z;
    int batch = 0;
    int steps = 0;
    int d_z = 0;
};

struct EncoderNet {
    nn::GruParams fwd, bwd;
    nn::Tensor proj_w, proj_b;
};

// Generator and decoder share this shape: learned x4 temporal upsampling of
// the latent, a GRU over the restored frame axis, and a linear read-out to 6
// channels.
struct SeqGenNet {
    nn::Tensor up_w, up_b;
    nn::GruParams gru;
    nn::Tensor out_w, out_b;
};

struct PredictorNet {
    nn::GruParams gru;
    nn::Tensor head_w, head_b;
};

struct DiscNet {
    nn::Tensor c1_w, c1_b, c2_w, c2_b, c3_w, c3_b;
    nn::GruParams gru;
    nn::Tensor head_w, head_b;
};

namespace model_detail {

inline nn::Tensor init_linear_w(int in, int out, std::mt19937_64& rng) {
    return nn::init_uniform(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

inline nn::Tensor init_linear_b(int in, int out, std::mt19937_64& rng) {
    return nn::init_uniform(1, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

inline EncoderNet make_encoder(const ModelConfig& cfg, std::mt19937_64& rng) {
    EncoderNet e;
    e.fwd = nn::GruParams::create(6, cfg.enc_hidden, rng);
    e.bwd = nn::GruParams::create(6, cfg.enc_hidden, rng);
    e.proj_w = init_linear_w(2 * cfg.enc_hidden, cfg.d_z, rng);
    e.proj_b = init_linear_b(2 * cfg.enc_hidden, cfg.d_z, rng);
    return e;
}

inline SeqGenNet make_seq_gen(const ModelConfig& cfg, std::mt19937_64& rng) {
    SeqGenNet g;
    g.up_w = init_linear_w(cfg.d_z, ModelConfig::kDownsample * cfg.gen_hidden, rng);
    g.up_b = init_linear_b(cfg.d_z, ModelConfig::kDownsample * cfg.gen_hidden, rng);
    g.gru = nn::GruParams::create(cfg.gen_hidden, cfg.gen_hidden, rng);
    g.out_w = init_linear_w(cfg.gen_hidden, 6, rng);
    g.out_b = init_linear_b(cfg.gen_hidden, 6, rng);
    return g;
}

inline PredictorNet make_predictor(const ModelConfig& cfg, std::mt19937_64& rng) {
    PredictorNet p;
    p.gru = nn::GruParams::create(cfg.d_z, cfg.pred_hidden, rng);
    p.head_w = init_linear_w(cfg.pred_hidden, 2, rng);
    p.head_b = init_linear_b(cfg.pred_hidden, 2, rng);
    return p;
}

inline DiscNet make_disc(const ModelConfig& cfg, std::mt19937_64& rng) {
    DiscNet d;
    int c = cfg.disc_channels;
    int k = cfg.disc_kernel;
    d.c1_w = init_linear_w(k * 6, c, rng);
    d.c1_b = init_linear_b(k * 6, c, rng);
    d.c2_w = init_linear_w(k * c, 2 * c, rng);
    d.c2_b = init_linear_b(k * c, 2 * c, rng);
    d.c3_w = init_linear_w(k * 2 * c, 2 * c, rng);
    d.c3_b = init_linear_b(k * 2 * c, 2 * c, rng);
    d.gru = nn::GruParams::create(2 * c, cfg.disc_hidden, rng);
    d.head_w = init_linear_w(cfg.disc_hidden, 1, rng);
    d.head_b = init_linear_b(cfg.disc_hidden, 1, rng);
    return d;
}

inline void register_encoder(nn::ParamSet& ps, const EncoderNet& e) {
    e.fwd.register_into(ps, "encoder.fwd");
    e.bwd.register_into(ps, "encoder.bwd");
    nn::register_param(ps, "encoder.proj_w", e.proj_w);
    nn::register_param(ps, "encoder.proj_b", e.proj_b);
}

inline void register_seq_gen(nn::ParamSet& ps, const SeqGenNet& g,
                             const std::string& prefix) {
    nn::register_param(ps, prefix + ".up_w", g.up_w);
    nn::register_param(ps, prefix + ".up_b", g.up_b);
    g.gru.register_into(ps, prefix + ".gru");
    nn::register_param(ps, prefix + ".out_w", g.out_w);
    nn::register_param(ps, prefix + ".out_b", g.out_b);
}

inline void register_predictor(nn::ParamSet& ps, const PredictorNet& p) {
    p.gru.register_into(ps, "predictor.gru");
    nn::register_param(ps, "predictor.head_w", p.head_w);
    nn::register_param(ps, "predictor.head_b", p.head_b);
}

inline void register_disc(nn::ParamSet& ps, const DiscNet& d,
                          const std::string& prefix) {
    nn::register_param(ps, prefix + ".c1_w", d.c1_w);
    nn::register_param(ps, prefix + ".c1_b", d.c1_b);
    nn::register_param(ps, prefix + ".c2_w", d.c2_w);
    nn::register_param(ps, prefix + ".c2_b", d.c2_b);
    nn::register_param(ps, prefix + ".c3_w", d.c3_w);
    nn::register_param(ps, prefix + ".c3_b", d.c3_b);
    d.gru.register_into(ps, prefix + ".gru");
    nn::register_param(ps, prefix + ".head_w", d.head_w);
    nn::register_param(ps, prefix + ".head_b", d.head_b);
}

inline EncoderNet encoder_from_params(const nn::ParamSet& ps) {
    EncoderNet e;
    e.fwd = nn::GruParams::from_params(ps, "encoder.fwd");
    e.bwd = nn::GruParams::from_params(ps, "encoder.bwd");
    e.proj_w = nn::get_param(ps, "encoder.proj_w");
    e.proj_b = nn::get_param(ps, "encoder.proj_b");
    return e;
}

inline SeqGenNet seq_gen_from_params(const nn::ParamSet& ps,
                                     const std::string& prefix) {
    SeqGenNet g;
    g.up_w = nn::get_param(ps, prefix + ".up_w");
    g.up_b = nn::get_param(ps, prefix + ".up_b");
    g.gru = nn::GruParams::from_params(ps, prefix + ".gru");
    g.out_w = nn::get_param(ps, prefix + ".out_w");
    g.out_b = nn::get_param(ps, prefix + ".out_b");
    return g;
}

inline PredictorNet predictor_from_params(const nn::ParamSet& ps) {
    PredictorNet p;
    p.gru = nn::GruParams::from_params(ps, "predictor.gru");
    p.head_w = nn::get_param(ps, "predictor.head_w");
    p.head_b = nn::get_param(ps, "predictor.head_b");
    return p;
}

inline DiscNet disc_from_params(const nn::ParamSet& ps, const std::string& prefix) {
    DiscNet d;
    d.c1_w = nn::get_param(ps, prefix + ".c1_w");
    d.c1_b = nn::get_param(ps, prefix + ".c1_b");
    d.c2_w = nn::get_param(ps, prefix + ".c2_w");
    d.c2_b = nn::get_param(ps, prefix + ".c2_b");
    d.c3_w = nn::get_param(ps, prefix + ".c3_w");
    d.c3_b = nn::get_param(ps, prefix + ".c3_b");
    d.gru = nn::GruParams::from_params(ps, prefix + ".gru");
    d.head_w = nn::get_param(ps, prefix + ".head_w");
    d.head_b = nn::get_param(ps, prefix + ".head_b");
    return d;
}

// Rearrange a (steps*B) x (factor*width) tensor into ((steps*factor)*B) x
// width: each input row expands into `factor` consecutive time steps.
inline nn::Tensor upsample_time(const nn::Tensor& x, int batch, int factor) {
    if (x.cols() % factor != 0)
        throw UsageError("upsample_time: columns not divisible by factor");
    int width = x.cols() / factor;
    int steps = x.rows() / batch;
    nn::Tensor out = nn::detail::make_op(steps * factor * batch, width, {x.node()});
    const auto& xv = x.values();
    auto& ov = out.node()->val;
    for (int k = 0; k < steps; ++k)
        for (int b = 0; b < batch; ++b)
            for (int j = 0; j < factor; ++j)
                for (int c = 0; c < width; ++c)
                    ov[(static_cast<std::size_t>(k * factor + j) * batch + b) * width + c] =
                        xv[(static_cast<std::size_t>(k) * batch + b) * x.cols() + j * width + c];
    auto xn = x.node().get();
    auto on = out.node().get();
    nn::detail::set_backprop(out, [xn, on, batch, factor, width] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        int steps = xn->rows / batch;
        for (int k = 0; k < steps; ++k)
            for (int b = 0; b < batch; ++b)
                for (int j = 0; j < factor; ++j)
                    for (int c = 0; c < width; ++c)
                        xn->grad[(static_cast<std::size_t>(k) * batch + b) * xn->cols + j * width + c] +=
                            on->grad[(static_cast<std::size_t>(k * factor + j) * batch + b) * width + c];
    });
    return out;
}

}  // namespace model_detail

struct ModelBundle {
    ModelConfig config;
    nn::ParamSet params;
    EncoderNet encoder;
    std::map<std::string, SeqGenNet> generators;
    SeqGenNet decoder;
    PredictorNet predictor;
    std::map<std::string, DiscNet> discriminators;

    static ModelBundle init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        ModelBundle b;
        b.config = cfg;
        std::mt19937_64 rng(seed);
        // Fixed draw order keeps initialization reproducible and aligned
        // between full and predictor-only training paths.
        b.encoder = model_detail::make_encoder(cfg, rng);
        b.generators[cfg.source_domain] = model_detail::make_seq_gen(cfg, rng);
        b.generators[cfg.target_domain] = model_detail::make_seq_gen(cfg, rng);
        b.decoder = model_detail::make_seq_gen(cfg, rng);
        b.predictor = model_detail::make_predictor(cfg, rng);
        b.discriminators[cfg.source_domain] = model_detail::make_disc(cfg, rng);
        b.discriminators[cfg.target_domain] = model_detail::make_disc(cfg, rng);
        b.register_all();
        return b;
    }

    static ModelBundle from_params(const ModelConfig& cfg, const nn::ParamSet& ps) {
        cfg.validate();
        ModelBundle b;
        b.config = cfg;
        b.encoder = model_detail::encoder_from_params(ps);
        for (const std::string& dom : {cfg.source_domain, cfg.target_domain}) {
            b.generators[dom] = model_detail::seq_gen_from_params(ps, "generator." + dom);
            b.discriminators[dom] = model_detail::disc_from_params(ps, "discriminator." + dom);
        }
        b.decoder = model_detail::seq_gen_from_params(ps, "decoder");
        b.predictor = model_detail::predictor_from_params(ps);
        b.register_all();
        return b;
    }

    nn::ParamSet generator_side_params() const {
        nn::ParamSet out;
        for (const auto& [name, p] : params)
            if (name.rfind("discriminator.", 0) != 0) out.emplace(name, p);
        return out;
    }

    nn::ParamSet discriminator_params() const {
        return nn::params_with_prefix(params, "discriminator.");
    }

private:
    void register_all() {
        params.clear();
        model_detail::register_encoder(params, encoder);
        for (const auto& [dom, g] : generators)
            model_detail::register_seq_gen(params, g, "generator." + dom);
        model_detail::register_seq_gen(params, decoder, "decoder");
        model_detail::register_predictor(params, predictor);
        for (const auto& [dom, d] : discriminators)
            model_detail::register_disc(params, d, "discriminator." + dom);
    }
};

// Assemble normalized windows into a time-major (n*B) x 6 input tensor.
inline nn::Tensor window_batch_to_tensor(const std::vector<const Window*>& batch) {
    if (batch.empty()) throw UsageError("window_batch_to_tensor: empty batch");
    int n = batch[0]->n;
    int B = static_cast<int>(batch.size());
    std::vector<double> v(static_cast<std::size_t>(n) * B * 6);
    for (int b = 0; b < B; ++b) {
        if (batch[b]->n != n)
            throw UsageError("window_batch_to_tensor: inconsistent window lengths");
        for (int t = 0; t < n; ++t)
            for (int c = 0; c < 6; ++c)
                v[(static_cast<std::size_t>(t) * B + b) * 6 + c] = batch[b]->at(t, c);
    }
    return nn::Tensor::from_values(n * B, 6, std::move(v));
}

// Shared encoder: bidirectional GRU over the frames, temporal downsampling by
// 4 (strided pooling of the per-direction states), linear projection to d_z.
inline LatentCode encode(const ModelBundle& bundle, const nn::Tensor& x, int batch) {
    const ModelConfig& cfg = bundle.config;
    if (x.cols() != 6 || x.rows() != cfg.window_n * batch)
        throw UsageError("encode: expected (" + std::to_string(cfg.window_n) + "*" +
                         std::to_string(batch) + ") x 6 input, got " +
                         std::to_string(x.rows()) + " x " + std::to_string(x.cols()));
    auto fwd = nn::gru_sequence(x, cfg.window_n, batch, bundle.encoder.fwd);
    auto bwd = nn::gru_sequence(x, cfg.window_n, batch, bundle.encoder.bwd, true);

    std::vector<nn::Tensor> pooled;
    pooled.reserve(cfg.latent_steps());
    for (int k = 0; k < cfg.latent_steps(); ++k) {
        int t = k * ModelConfig::kDownsample + ModelConfig::kDownsample - 1;
        pooled.push_back(nn::concat_cols({fwd[t], bwd[t]}));
    }
    nn::Tensor stacked = nn::concat_rows(pooled);
    LatentCode code;
    code.z = nn::add(nn::matmul(stacked, bundle.encoder.proj_w), bundle.encoder.proj_b);
    code.batch = batch;
    code.steps = cfg.latent_steps();
    code.d_z = cfg.d_z;
    return code;
}

namespace model_detail {

inline nn::Tensor run_seq_gen(const ModelConfig& cfg, const SeqGenNet& net,
                              const LatentCode& z) {
    if (z.steps != cfg.latent_steps() || z.d_z != cfg.d_z)
        throw UsageError("sequence generator: latent shape mismatch");
    nn::Tensor up = nn::add(nn::matmul(z.z, net.up_w), net.up_b);
    nn::Tensor frames_in = upsample_time(up, z.batch, ModelConfig::kDownsample);
    auto hidden = nn::gru_sequence(frames_in, cfg.window_n, z.batch, net.gru);
    nn::Tensor h_all = nn::concat_rows(hidden);
    return nn::add(nn::matmul(h_all, net.out_w), net.out_b);
}

}  // namespace model_detail

// Domain-conditioned sequence generator: latent -> normalized window.
inline nn::Tensor generate(const ModelBundle& bundle, const LatentCode& z,
                           const DomainTag& domain) {
    auto it = bundle.generators.find(domain.name);
    if (it == bundle.generators.end())
        throw UsageError("generate: unregistered domain '" + domain.name + "'");
    return model_detail::run_seq_gen(bundle.config, it->second, z);
}

// Domain-agnostic reconstruction head.
inline nn::Tensor decode(const ModelBundle& bundle, const LatentCode& z) {
    return model_detail::run_seq_gen(bundle.config, bundle.decoder, z);
}

// Polar-vector head: GRU over the latent sequence, linear read-out of the
// final state. dl passes through softplus so it is non-negative; dpsi is
// unconstrained here and wrapped at evaluation time.
inline nn::Tensor predict_polar(const ModelBundle& bundle, const LatentCode& z) {
    const ModelConfig& cfg = bundle.config;
    if (z.steps != cfg.latent_steps() || z.d_z != cfg.d_z)
        throw UsageError("predict_polar: latent shape mismatch");
    auto hidden = nn::gru_sequence(z.z, z.steps, z.batch, bundle.predictor.gru);
    nn::Tensor head = nn::add(nn::matmul(hidden.back(), bundle.predictor.head_w),
                              bundle.predictor.head_b);
    nn::Tensor dl = nn::softplus(nn::slice_cols(head, 0, 1));
    nn::Tensor dpsi = nn::slice_cols(head, 1, 2);
    return nn::concat_cols({dl, dpsi});
}

// Per-domain critic: three strided 1-D conv layers, a GRU over what remains of
// the time axis, and a linear score head (least-squares GAN target: 1 real,
// 0 fake).
inline nn::Tensor discriminate(const ModelBundle& bundle, const nn::Tensor& x,
                               int batch, const DomainTag& domain) {
    const ModelConfig& cfg = bundle.config;
    auto it = bundle.discriminators.find(domain.name);
    if (it == bundle.discriminators.end())
        throw UsageError("discriminate: unregistered domain '" + domain.name + "'");
    const DiscNet& d = it->second;
    if (x.cols() != 6 || x.rows() != cfg.window_n * batch)
        throw UsageError("discriminate: input shape mismatch");

    int t = cfg.window_n;
    nn::Tensor h = nn::relu(nn::conv1d(x, d.c1_w, d.c1_b, batch, t, cfg.disc_kernel,
                                       cfg.disc_stride));
    t = (t - cfg.disc_kernel) / cfg.disc_stride + 1;
    h = nn::relu(nn::conv1d(h, d.c2_w, d.c2_b, batch, t, cfg.disc_kernel, cfg.disc_stride));
    t = (t - cfg.disc_kernel) / cfg.disc_stride + 1;
    h = nn::relu(nn::conv1d(h, d.c3_w, d.c3_b, batch, t, cfg.disc_kernel, cfg.disc_stride));
    t = (t - cfg.disc_kernel) / cfg.disc_stride + 1;

    auto hidden = nn::gru_sequence(h, t, batch, d.gru);
    return nn::add(nn::matmul(hidden.back(), d.head_w), d.head_b);
}

}  // namespace ioda
