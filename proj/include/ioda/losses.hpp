#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ioda/errors.hpp"
#include "ioda/models.hpp"
#include "ioda/nn/tensor.hpp"

// The loss set: least-squares GAN terms in both domain directions,
// reconstruction, polar-vector prediction with wrapped angular error,
// cycle consistency through both generators, and perceptual (latent
// preservation) consistency. total = gan + l1*ae + l2*pred + l3*cycle +
// l4*percep.

namespace ioda {

struct LossWeights {
    double lambda1 = 0.01;   // reconstruction
    double lambda2 = 100.0;  // prediction
    double lambda3 = 0.1;    // cycle consistency
    double lambda4 = 1.0;    // perceptual consistency

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
            throw UsageError("LossWeights: weights must be >= 0");
    }
};

// Per-step scalar components. `gan` is the adversarial component as it enters
// the total (generator-side objective), so the composition identity
// total = gan + l1*ae + l2*pred + l3*cycle + l4*percep always holds.
struct LossReport {
    double gan = 0.0;
    double ae = 0.0;
    double pred = 0.0;
    double cycle = 0.0;
    double percep = 0.0;
    double total = 0.0;
};

inline double total_loss(double gan, double ae, double pred, double cycle,
                         double percep, const LossWeights& w) {
    return gan + w.lambda1 * ae + w.lambda2 * pred + w.lambda3 * cycle +
           w.lambda4 * percep;
}

inline LossReport make_loss_report(double gan, double ae, double pred,
                                   double cycle, double percep,
                                   const LossWeights& w) {
    LossReport r;
    r.gan = gan;
    r.ae = ae;
    r.pred = pred;
    r.cycle = cycle;
    r.percep = percep;
    r.total = total_loss(gan, ae, pred, cycle, percep, w);
    return r;
}

inline std::string loss_history_header() {
    return "step,gan,ae,pred,cycle,percep,total";
}

inline std::string format_loss_row(long long step, const LossReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g",
                  step, r.gan, r.ae, r.pred, r.cycle, r.percep, r.total);
    return buf;
}

struct GanLossPair {
    nn::Tensor disc_loss;  // trains the discriminators; fakes detached
    nn::Tensor gen_loss;   // trains encoder and generators
};

// Least-squares GAN in both directions: source->target fakes judged by the
// target critic and vice versa. Real/fake targets are 1/0; the generator is
// rewarded for pushing fakes to 1. Gradients from disc_loss never reach the
// encoder or generators because the fakes are detached there.
inline GanLossPair gan_losses(const ModelBundle& bundle, const nn::Tensor& x_s,
                              const nn::Tensor& x_t, int batch) {
    const ModelConfig& cfg = bundle.config;
    DomainTag src{cfg.source_domain}, tgt{cfg.target_domain};

    LatentCode z_s = encode(bundle, x_s, batch);
    LatentCode z_t = encode(bundle, x_t, batch);
    nn::Tensor fake_t = generate(bundle, z_s, tgt);
    nn::Tensor fake_s = generate(bundle, z_t, src);

    nn::Tensor d_real_t = discriminate(bundle, x_t, batch, tgt);
    nn::Tensor d_fake_t_det = discriminate(bundle, nn::detach(fake_t), batch, tgt);
    nn::Tensor d_real_s = discriminate(bundle, x_s, batch, src);
    nn::Tensor d_fake_s_det = discriminate(bundle, nn::detach(fake_s), batch, src);

    GanLossPair out;
    out.disc_loss = nn::add(
        nn::scale(nn::add(nn::lsq(d_real_t, 1.0), nn::lsq(d_fake_t_det, 0.0)), 0.5),
        nn::scale(nn::add(nn::lsq(d_real_s, 1.0), nn::lsq(d_fake_s_det, 0.0)), 0.5));

    nn::Tensor d_fake_t = discriminate(bundle, fake_t, batch, tgt);
    nn::Tensor d_fake_s = discriminate(bundle, fake_s, batch, src);
    out.gen_loss = nn::add(nn::lsq(d_fake_t, 1.0), nn::lsq(d_fake_s, 1.0));
    return out;
}

// Reconstruction: decode(encode(x)) against x.
inline nn::Tensor ae_loss(const ModelBundle& bundle, const nn::Tensor& x, int batch) {
    LatentCode z = encode(bundle, x, batch);
    return nn::mse(decode(bundle, z), x);
}

// Squared error of the polar prediction, with the angular component compared
// through the wrapped difference so labels near +-pi behave.
inline nn::Tensor polar_prediction_error(const nn::Tensor& pred,
                                         const nn::Tensor& labels) {
    if (pred.cols() != 2 || labels.cols() != 2 || pred.rows() != labels.rows())
        throw UsageError("polar_prediction_error: expected matching B x 2 tensors");
    nn::Tensor dl_err = nn::mse(nn::slice_cols(pred, 0, 1), nn::slice_cols(labels, 0, 1));
    nn::Tensor dpsi_diff =
        nn::wrap_to_pi(nn::sub(nn::slice_cols(pred, 1, 2), nn::slice_cols(labels, 1, 2)));
    nn::Tensor dpsi_err = nn::lsq(dpsi_diff, 0.0);
    return nn::scale(nn::add(dl_err, dpsi_err), 0.5);
}

inline nn::Tensor pred_loss(const ModelBundle& bundle, const nn::Tensor& x_s,
                            const nn::Tensor& y_s, int batch) {
    LatentCode z = encode(bundle, x_s, batch);
    return polar_prediction_error(predict_polar(bundle, z), y_s);
}

// Source -> target -> source (and the symmetric path) must reproduce the
// input.
inline nn::Tensor cycle_loss(const ModelBundle& bundle, const nn::Tensor& x_s,
                             const nn::Tensor& x_t, int batch) {
    const ModelConfig& cfg = bundle.config;
    DomainTag src{cfg.source_domain}, tgt{cfg.target_domain};
    nn::Tensor fake_t = generate(bundle, encode(bundle, x_s, batch), tgt);
    nn::Tensor cyc_s = generate(bundle, encode(bundle, fake_t, batch), src);
    nn::Tensor fake_s = generate(bundle, encode(bundle, x_t, batch), src);
    nn::Tensor cyc_t = generate(bundle, encode(bundle, fake_s, batch), tgt);
    return nn::add(nn::mse(cyc_s, x_s), nn::mse(cyc_t, x_t));
}

// Translation must preserve the latent code. The reference code is detached:
// only the re-encoding path carries gradient.
inline nn::Tensor percep_loss(const ModelBundle& bundle, const nn::Tensor& x_s,
                              const nn::Tensor& x_t, int batch) {
    const ModelConfig& cfg = bundle.config;
    DomainTag src{cfg.source_domain}, tgt{cfg.target_domain};
    LatentCode z_s = encode(bundle, x_s, batch);
    LatentCode z_t = encode(bundle, x_t, batch);
    LatentCode z_fake_t = encode(bundle, generate(bundle, z_s, tgt), batch);
    LatentCode z_fake_s = encode(bundle, generate(bundle, z_t, src), batch);
    return nn::add(nn::mse(z_fake_t.z, nn::detach(z_s.z)),
                   nn::mse(z_fake_s.z, nn::detach(z_t.z)));
}

}  // namespace ioda
