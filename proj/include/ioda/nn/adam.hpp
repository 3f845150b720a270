#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ioda/nn/params.hpp"

namespace ioda::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected adaptive-moment optimizer. Moment state is kept per parameter
// name; update order follows the (ordered) ParamSet, so runs are reproducible.
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ParamSet& params) {
        ++step_index_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_index_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_index_));
        for (auto& [name, p] : params) {
            if (!p.trainable()) continue;
            p.node()->ensure_grad();
            const std::vector<double>& g = p.node()->grad;
            auto& [m, v] = state_[name];
            if (m.size() != g.size()) {
                m.assign(g.size(), 0.0);
                v.assign(g.size(), 0.0);
            }
            std::vector<double>& w = p.mutable_values();
            for (std::size_t i = 0; i < g.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                double m_hat = m[i] / bc1;
                double v_hat = v[i] / bc2;
                w[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
            }
        }
    }

    long long step_index() const { return step_index_; }

private:
    AdamConfig cfg_;
    long long step_index_ = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> state_;
};

}  // namespace ioda::nn
