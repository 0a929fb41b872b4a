#include "sarlv/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace sarlv {

double lr_at(std::int64_t step, const OptimizerConfig& cfg) {
    if (step < 0) throw std::invalid_argument("lr_at: negative step");
    if (cfg.warmup_steps <= 0) return cfg.learning_rate;
    double ramp = static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
    return cfg.learning_rate * std::min(1.0, ramp);
}

AdamW::AdamW(std::vector<ParamPtr> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0) {
        throw std::invalid_argument("AdamW: betas must lie in [0, 1)");
    }
    if (cfg_.learning_rate < 0.0) throw std::invalid_argument("AdamW: learning rate must be >= 0");
    moments_.resize(params_.size());
}

void AdamW::step() { step_with_lr(lr_at(step_, cfg_)); }

void AdamW::step_with_lr(double lr) {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& p = *params_[pi];
        if (!p.trainable) continue;
        auto node = p.value.node();
        if (node->grad.empty()) continue;  // untouched by the last backward
        auto& g = node->grad;
        if (g.size() != node->data.size()) {
            throw std::invalid_argument("AdamW: gradient shape mismatch for " + p.name);
        }
        auto& mom = moments_[pi];
        if (mom.m.empty()) {
            mom.m.assign(g.size(), 0.0);
            mom.v.assign(g.size(), 0.0);
        }
        bool decay = p.decay && cfg_.weight_decay > 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double gi = g[i];
            mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * gi;
            mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * gi * gi;
            double mhat = mom.m[i] / bc1;
            double vhat = mom.v[i] / bc2;
            double theta = node->data[i];
            double update = lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
            if (decay) update += lr * cfg_.weight_decay * theta;
            node->data[i] = theta - update;
        }
        round_to_precision(node->data, node->precision);
        node->grad.clear();
    }
}

std::int64_t steps_per_run(std::int64_t n, std::int64_t batch, std::int64_t epochs) {
    if (n < 1 || batch < 1 || epochs < 1) {
        throw std::invalid_argument("steps_per_run: n, batch, and epochs must all be >= 1");
    }
    return ((n + batch - 1) / batch) * epochs;
}

}  // namespace sarlv
