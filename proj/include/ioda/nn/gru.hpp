#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ioda/errors.hpp"
#include "ioda/nn/params.hpp"
#include "ioda/nn/tensor.hpp"

// Gated recurrent unit. Gate column layout in the fused weight matrices is
// [reset | update | candidate].

namespace ioda::nn {

struct GruParams {
    Tensor w_x;  // input_dim x 3*hidden
    Tensor w_h;  // hidden x 3*hidden
    Tensor b_x;  // 1 x 3*hidden
    Tensor b_h;  // 1 x 3*hidden

    int input_dim() const { return w_x.rows(); }
    int hidden_dim() const { return w_h.rows(); }

    static GruParams create(int input_dim, int hidden_dim, std::mt19937_64& rng) {
        GruParams p;
        double bx = 1.0 / std::sqrt(static_cast<double>(input_dim));
        double bh = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
        p.w_x = init_uniform(input_dim, 3 * hidden_dim, bx, rng);
        p.w_h = init_uniform(hidden_dim, 3 * hidden_dim, bh, rng);
        p.b_x = init_uniform(1, 3 * hidden_dim, bh, rng);
        p.b_h = init_uniform(1, 3 * hidden_dim, bh, rng);
        return p;
    }

    void register_into(ParamSet& ps, const std::string& prefix) const {
        register_param(ps, prefix + ".w_x", w_x);
        register_param(ps, prefix + ".w_h", w_h);
        register_param(ps, prefix + ".b_x", b_x);
        register_param(ps, prefix + ".b_h", b_h);
    }

    static GruParams from_params(const ParamSet& ps, const std::string& prefix) {
        GruParams p;
        p.w_x = get_param(ps, prefix + ".w_x");
        p.w_h = get_param(ps, prefix + ".w_h");
        p.b_x = get_param(ps, prefix + ".b_x");
        p.b_h = get_param(ps, prefix + ".b_h");
        return p;
    }
};

struct GruState {
    Tensor h;  // batch x hidden
};

// One GRU update with the input projection already applied:
// gx = x_t * w_x + b_x.
inline Tensor gru_step_pre(const Tensor& gx, const Tensor& h, const GruParams& p) {
    int hd = p.hidden_dim();
    if (gx.cols() != 3 * hd || h.cols() != hd || gx.rows() != h.rows())
        throw UsageError("gru_step: projected input/state dimensions mismatch");
    Tensor gh = add(matmul(h, p.w_h), p.b_h);
    Tensor r = sigmoid(add(slice_cols(gx, 0, hd), slice_cols(gh, 0, hd)));
    Tensor z = sigmoid(add(slice_cols(gx, hd, 2 * hd), slice_cols(gh, hd, 2 * hd)));
    Tensor n = tanh(add(slice_cols(gx, 2 * hd, 3 * hd),
                        mul(r, slice_cols(gh, 2 * hd, 3 * hd))));
    // h' = (1 - z) * n + z * h
    return add(n, mul(z, sub(h, n)));
}

inline GruState gru_step(const Tensor& x_t, const GruState& state,
                         const GruParams& p) {
    if (x_t.cols() != p.input_dim())
        throw UsageError("gru_step: input width " + std::to_string(x_t.cols()) +
                         " does not match parameters (" +
                         std::to_string(p.input_dim()) + ")");
    Tensor gx = add(matmul(x_t, p.w_x), p.b_x);
    return GruState{gru_step_pre(gx, state.h, p)};
}

// Run a GRU over a time-major sequence tensor ((T*B) x input). Returns the
// hidden state per step, indexed by time regardless of direction. The zero
// initial state and a single fused input projection keep the graph small.
inline std::vector<Tensor> gru_sequence(const Tensor& x_all, int time_steps,
                                        int batch, const GruParams& p,
                                        bool reverse = false) {
    if (x_all.rows() != time_steps * batch)
        throw UsageError("gru_sequence: rows do not match time*batch");
    Tensor gx_all = add(matmul(x_all, p.w_x), p.b_x);
    std::vector<Tensor> hidden(time_steps);
    Tensor h = Tensor::zeros(batch, p.hidden_dim());
    for (int i = 0; i < time_steps; ++i) {
        int t = reverse ? time_steps - 1 - i : i;
        Tensor gx = slice_rows(gx_all, t * batch, (t + 1) * batch);
        h = gru_step_pre(gx, h, p);
        hidden[t] = h;
    }
    return hidden;
}

}  // namespace ioda::nn
