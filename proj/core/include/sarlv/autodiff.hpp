#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sarlv/tensor.hpp"

namespace sarlv {

/// Define-by-run tape. While a TapeScope is open on the current thread, each
/// primitive op whose output needs a gradient appends one entry in execution
/// order; backward() replays the entries exactly once in reverse.
class Tape {
public:
    struct Entry {
        const char* op;
        std::shared_ptr<detail::TensorNode> output;
        std::function<void()> backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return entries_.size(); }

    void record(const char* op, std::shared_ptr<detail::TensorNode> output,
                std::function<void()> backward);

    /// Seed d(loss)/d(loss) = seed and accumulate gradients into every
    /// reachable node's grad buffer. loss must be scalar.
    void backward(const Tensor& loss, double seed = 1.0);

    /// backward() then collect per-param gradients (zeros for params the loss
    /// never touched). Param grad accumulators are cleared on exit.
    std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& params);

    static Tape* current();

private:
    friend class TapeScope;
    std::vector<Entry> entries_;
};

/// RAII: makes a tape current on this thread for the scope's lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Convenience wrapper around a one-shot tape: records fn's ops, then returns
/// d(fn result)/d(param) for each param.
std::vector<Tensor> grad_of(const std::function<Tensor()>& fn,
                            const std::vector<Tensor>& params);

}  // namespace sarlv
