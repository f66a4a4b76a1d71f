#pragma once

#include <map>
#include <string>
#include <vector>

#include "molang/error.hpp"
#include "molang/tensor.hpp"

namespace molang {

// Named parameter registry. Iteration order is the sorted name order, which
// makes optimizer sweeps and checkpoint layouts deterministic.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor init) {
        auto [it, fresh] = params_.emplace(name, std::move(init));
        if (!fresh) throw ContractError("duplicate parameter name: " + name);
        return it->second;
    }
    Tensor& get(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }
    const Tensor& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("unknown parameter: " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    std::size_t count() const { return params_.size(); }
    long numel() const {
        long n = 0;
        for (const auto& [k, v] : params_) n += v.size();
        return n;
    }
    std::map<std::string, Tensor>& items() { return params_; }
    const std::map<std::string, Tensor>& items() const { return params_; }

private:
    std::map<std::string, Tensor> params_;
};

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// AdamW with decoupled weight decay: the decay term is applied directly to the
// weights at the learning rate, never routed through the moment estimates.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    const AdamWConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    long step_count() const { return t_; }

    // One update over all (param, grad) pairs; pairs must be presented in a
    // fixed order across steps (ParamStore's sorted order satisfies this).
    void step(std::vector<std::pair<Tensor*, const Tensor*>>& pairs);

    // Scales all grads in place so their global L2 norm is <= max_norm.
    // Returns the pre-clip norm.
    static double clip_global_norm(std::vector<Tensor*>& grads, double max_norm);

private:
    struct Slot {
        Tensor m, v;
    };
    AdamWConfig cfg_;
    long t_ = 0;
    std::map<const Tensor*, Slot> slots_;
};

}  // namespace molang
