#pragma once

#include <cstdint>
#include <vector>

#include "sarlv/nn.hpp"

namespace sarlv {

struct OptimizerConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    double epsilon = 1e-8;
    std::int64_t warmup_steps = 50;
};

/// Linear warmup to the constant rate: lr * min(1, (step+1)/warmup_steps).
double lr_at(std::int64_t step, const OptimizerConfig& cfg);

/// Decoupled-decay Adam with bias correction. Updates consume the gradient
/// buffers accumulated on each parameter and clear them afterwards. Frozen
/// parameters (and parameters the loss never touched) are skipped entirely;
/// weight decay applies only to parameters flagged for decay (rank >= 2).
class AdamW {
public:
    AdamW(std::vector<ParamPtr> params, OptimizerConfig cfg);

    /// One update at the warmup-scheduled rate for the current step count.
    void step();
    /// One update at an explicit effective learning rate.
    void step_with_lr(double lr);

    std::int64_t steps_done() const { return step_; }
    const OptimizerConfig& config() const { return cfg_; }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    std::vector<ParamPtr> params_;
    std::vector<Moments> moments_;
    OptimizerConfig cfg_;
    std::int64_t step_ = 0;
};

/// ceil(n / batch) * epochs; partial final batches are kept and trained.
std::int64_t steps_per_run(std::int64_t n, std::int64_t batch, std::int64_t epochs);

}  // namespace sarlv
