#include "molang/optim.hpp"

#include <cmath>

namespace molang {

void AdamW::step(std::vector<std::pair<Tensor*, const Tensor*>>& pairs) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [p, gptr] : pairs) {
        const Tensor& grad = *gptr;
        if (!p->same_shape(grad)) throw ShapeError("AdamW: grad shape mismatch");
        auto it = slots_.find(p);
        if (it == slots_.end()) {
            Slot s;
            s.m = Tensor::zeros(p->shape());
            s.v = Tensor::zeros(p->shape());
            it = slots_.emplace(p, std::move(s)).first;
        }
        Tensor& m = it->second.m;
        Tensor& v = it->second.v;
        Tensor& w = *p;
        for (long i = 0; i < w.size(); ++i) {
            const double gi = grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i]);
        }
    }
}

double AdamW::clip_global_norm(std::vector<Tensor*>& grads, double max_norm) {
    double sq = 0.0;
    for (Tensor* g : grads)
        for (long i = 0; i < g->size(); ++i) sq += (*g)[i] * (*g)[i];
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (Tensor* g : grads)
            for (long i = 0; i < g->size(); ++i) (*g)[i] *= s;
    }
    return norm;
}

}  // namespace molang
