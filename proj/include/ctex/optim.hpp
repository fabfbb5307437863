#pragma once

#include <cmath>
#include <vector>

#include "ctex/network.hpp"

namespace ctex {

// Cosine annealing factor: base_lr * 0.5 * (1 + cos(pi * step / total)).
// No warmup, no restarts.
inline double cosine_lr(long step, long total_steps, double base_lr) {
    if (total_steps <= 0) throw std::invalid_argument("cosine_lr: total_steps must be > 0");
    if (step < 0 || step > total_steps) {
        throw std::invalid_argument("cosine_lr: step " + std::to_string(step) +
                                    " outside [0, " + std::to_string(total_steps) + "]");
    }
    return base_lr * 0.5 *
           (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) /
                           static_cast<double>(total_steps)));
}

// AdamW with decoupled weight decay and per-parameter-group base learning
// rates. The moment update is scaled by lr_scale * base_lr; the decay term
// uses base_lr alone, so schedule annealing does not also anneal decay:
//   p -= lr_scale * base_lr * m_hat / (sqrt(v_hat) + eps) + base_lr * decay * p
template <typename S>
class AdamW {
public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    explicit AdamW(const ParamStore<S>& store, double default_lr = 1e-3) {
        m_.resize(static_cast<std::size_t>(store.size()));
        v_.resize(static_cast<std::size_t>(store.size()));
        base_lr_.assign(static_cast<std::size_t>(store.size()), default_lr);
        for (int i = 0; i < store.size(); ++i) {
            m_[static_cast<std::size_t>(i)] = ArrX<S>::Zero(store[i].value.size());
            v_[static_cast<std::size_t>(i)] = ArrX<S>::Zero(store[i].value.size());
        }
    }

    void set_lr(const std::vector<int>& ids, double lr) {
        for (int id : ids) base_lr_.at(static_cast<std::size_t>(id)) = lr;
    }

    long step_count() const { return step_; }

    // One update over the whole store; grads[i] pairs with store[i]. An empty
    // grad array means "no gradient" and skips the moment update for that
    // parameter (decay still applies).
    void step(ParamStore<S>& store, const std::vector<ArrX<S>>& grads, double lr_scale = 1.0) {
        if (static_cast<int>(grads.size()) != store.size()) {
            throw std::invalid_argument("AdamW::step: " + std::to_string(grads.size()) +
                                        " grads for " + std::to_string(store.size()) +
                                        " parameters");
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (int i = 0; i < store.size(); ++i) {
            auto& p = store[i].value;
            const double lr = base_lr_[static_cast<std::size_t>(i)];
            const auto& g = grads[static_cast<std::size_t>(i)];
            if (weight_decay != 0.0) p *= static_cast<S>(1.0 - lr * weight_decay);
            if (g.size() > 0) {
                if (g.size() != p.size()) {
                    throw ShapeError("AdamW::step: grad size mismatch for '" + store[i].name +
                                     "'");
                }
                auto& m = m_[static_cast<std::size_t>(i)];
                auto& v = v_[static_cast<std::size_t>(i)];
                m = m * static_cast<S>(beta1) + g * static_cast<S>(1.0 - beta1);
                v = v * static_cast<S>(beta2) + g.square() * static_cast<S>(1.0 - beta2);
                const ArrX<S> m_hat = m / static_cast<S>(bc1);
                const ArrX<S> v_hat = v / static_cast<S>(bc2);
                p -= static_cast<S>(lr_scale * lr) * m_hat /
                     (v_hat.sqrt() + static_cast<S>(eps));
            }
        }
    }

private:
    long step_ = 0;
    std::vector<ArrX<S>> m_, v_;
    std::vector<double> base_lr_;
};

}  // namespace ctex
