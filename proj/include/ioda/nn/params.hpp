#pragma once

#include <map>
#include <random>
#include <string>

#include "ioda/errors.hpp"
#include "ioda/nn/tensor.hpp"

namespace ioda::nn {

// Named trainable parameter collection. Ordered map so that every traversal
// (optimizer updates, checkpointing) is deterministic.
using ParamSet = std::map<std::string, Tensor>;

inline void zero_grad(ParamSet& params) {
    for (auto& [name, p] : params) {
        p.node()->ensure_grad();
        std::fill(p.node()->grad.begin(), p.node()->grad.end(), 0.0);
    }
}

inline Tensor init_uniform(int rows, int cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    for (double& x : v) x = dist(rng);
    return Tensor::from_values(rows, cols, std::move(v), /*trainable=*/true);
}

inline void register_param(ParamSet& ps, const std::string& name, const Tensor& t) {
    if (!ps.emplace(name, t).second)
        throw UsageError("duplicate parameter name: " + name);
}

inline const Tensor& get_param(const ParamSet& ps, const std::string& name) {
    auto it = ps.find(name);
    if (it == ps.end()) throw UsageError("missing parameter: " + name);
    return it->second;
}

// Sub-view of a ParamSet: every entry whose name starts with prefix. The
// tensors are shared, not copied.
inline ParamSet params_with_prefix(const ParamSet& ps, const std::string& prefix) {
    ParamSet out;
    for (const auto& [name, p] : ps)
        if (name.rfind(prefix, 0) == 0) out.emplace(name, p);
    return out;
}

inline void merge_params(ParamSet& dst, const ParamSet& src) {
    for (const auto& [name, p] : src) register_param(dst, name, p);
}

}  // namespace ioda::nn
