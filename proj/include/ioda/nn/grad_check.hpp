#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ioda/nn/params.hpp"
#include "ioda/nn/tensor.hpp"

namespace ioda::nn {

// Central finite differences against analytic gradients, elementwise over
// every parameter. f must be a deterministic scalar function of the
// parameters. Returns the maximum relative error.
inline double grad_check(const std::function<Tensor()>& f, ParamSet& params,
                         double eps = 1e-5) {
    zero_grad(params);
    Tensor loss = f();
    backward(loss);
    std::map<std::string, std::vector<double>> analytic;
    for (auto& [name, p] : params) {
        p.node()->ensure_grad();
        analytic[name] = p.node()->grad;
    }
    release_graph(loss);

    double max_rel = 0.0;
    for (auto& [name, p] : params) {
        std::vector<double>& w = p.mutable_values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            double saved = w[i];
            double fp, fm;
            {
                NoGradGuard no_grad;
                w[i] = saved + eps;
                fp = f().scalar_value();
                w[i] = saved - eps;
                fm = f().scalar_value();
            }
            w[i] = saved;
            double numeric = (fp - fm) / (2.0 * eps);
            double ana = analytic[name][i];
            double denom = std::max({std::abs(numeric), std::abs(ana), 1e-4});
            max_rel = std::max(max_rel, std::abs(numeric - ana) / denom);
        }
    }
    return max_rel;
}

}  // namespace ioda::nn
