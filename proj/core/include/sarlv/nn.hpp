#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sarlv/nf4.hpp"
#include "sarlv/ops.hpp"
#include "sarlv/rng.hpp"
#include "sarlv/tensor.hpp"

namespace sarlv {

struct Parameter {
    std::string name;
    Tensor value;
    bool trainable = true;
    bool decay = true;  // decoupled weight decay applies (rank >= 2 only)

    void set_trainable(bool v) {
        trainable = v;
        value.set_requires_grad(v);
    }
};

using ParamPtr = std::shared_ptr<Parameter>;

/// Ordered, named parameter list. Composed models share the same Parameter
/// objects as their sub-models, so freezing propagates everywhere.
class ParamRegistry {
public:
    Tensor add(std::string name, Tensor value, bool trainable = true);
    void append(const ParamRegistry& other);
    const std::vector<ParamPtr>& items() const { return items_; }
    ParamPtr find(std::string_view name) const;
    std::vector<Tensor> trainable_tensors() const;
    void set_all_trainable(bool v);
    /// Re-tag every parameter's storage precision (f64 is lossless widening;
    /// gradient-check tests rely on it).
    void set_precision(Precision p);

private:
    std::vector<ParamPtr> items_;
};

/// Pass-through state for forward calls; rng drives dropout during training.
struct ForwardCtx {
    bool training = false;
    RngState* rng = nullptr;
};

struct LoraAdapter {
    Tensor a;  // [r, d_in], Gaussian init N(0, 1/r)
    Tensor b;  // [d_out, r], zero init so the adapter starts as a no-op
    double scaling = 2.0;  // alpha / r
    double dropout_p = 0.0;
};

/// y = x W + bias, with optional LoRA delta and optional NF4-quantized base.
/// When quantized, the frozen base weight is replaced in the forward pass by
/// a cached bf16(dequantize(q)) tensor, numerically identical to the on-the-
/// fly path.
struct Linear {
    Tensor weight;  // [d_in, d_out]
    Tensor bias;    // [d_out]
    std::optional<LoraAdapter> lora;
    std::optional<QuantizedTensor> qweight;
    Tensor qdequant;  // cache, set alongside qweight

    Tensor forward(const Tensor& x, const ForwardCtx& ctx) const;
    std::int64_t d_in() const { return weight.dim(0); }
    std::int64_t d_out() const { return weight.dim(1); }
};

Linear make_linear(ParamRegistry& reg, const std::string& name, std::int64_t d_in,
                   std::int64_t d_out, RngState& rng, double init_std = -1.0);

struct LayerNormParams {
    Tensor gamma;
    Tensor beta;
    Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

LayerNormParams make_layer_norm(ParamRegistry& reg, const std::string& name, std::int64_t d);

struct Attention {
    Linear q, k, v, o;
    int heads = 1;

    Tensor forward(const Tensor& x, bool causal, const ForwardCtx& ctx) const;
};

/// Pre-norm block: x + Attn(LN(x)), then x + MLP(LN(x)) with a GELU inside.
struct TransformerBlock {
    LayerNormParams ln1, ln2;
    Attention attn;
    Linear mlp_in, mlp_out;

    Tensor forward(const Tensor& x, bool causal, const ForwardCtx& ctx) const;
};

TransformerBlock make_block(ParamRegistry& reg, const std::string& prefix, std::int64_t d,
                            int heads, RngState& rng);

/// Additive causal mask: 0 on and below the diagonal, -1e30 above.
Tensor causal_mask(std::int64_t n);

}  // namespace sarlv
