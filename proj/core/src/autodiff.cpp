#include "sarlv/autodiff.hpp"

#include <stdexcept>

namespace sarlv {

namespace {
thread_local Tape* g_current_tape = nullptr;
}

Tape* Tape::current() { return g_current_tape; }

void Tape::record(const char* op, std::shared_ptr<detail::TensorNode> output,
                  std::function<void()> backward) {
    entries_.push_back(Entry{op, std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss, double seed) {
    if (!loss.defined() || loss.size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    (loss.defined() ? shape_str(loss.shape()) : "<empty>"));
    }
    auto node = loss.node();
    if (node->grad.empty()) node->grad.assign(1, 0.0);
    node->grad[0] += seed;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->output->grad.empty()) continue;  // not on a path to the loss
        it->backward();
    }
}

std::vector<Tensor> Tape::grad(const Tensor& loss, const std::vector<Tensor>& params) {
    for (const auto& p : params) p.node()->grad.clear();
    backward(loss);
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) {
        out.push_back(p.grad());
        p.node()->grad.clear();
    }
    return out;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_current_tape) { g_current_tape = &tape; }

TapeScope::~TapeScope() { g_current_tape = previous_; }

std::vector<Tensor> grad_of(const std::function<Tensor()>& fn,
                            const std::vector<Tensor>& params) {
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = fn();
    }
    return tape.grad(loss, params);
}

}  // namespace sarlv
