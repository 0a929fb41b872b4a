#include "sarlv/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace sarlv {

Tensor ParamRegistry::add(std::string name, Tensor value, bool trainable) {
    for (const auto& p : items_) {
        if (p->name == name) throw std::invalid_argument("duplicate parameter name: " + name);
    }
    value.set_requires_grad(trainable);
    auto p = std::make_shared<Parameter>();
    p->name = std::move(name);
    p->value = value;
    p->trainable = trainable;
    p->decay = value.rank() >= 2;
    items_.push_back(std::move(p));
    return value;
}

void ParamRegistry::append(const ParamRegistry& other) {
    for (const auto& p : other.items_) {
        for (const auto& mine : items_) {
            if (mine->name == p->name)
                throw std::invalid_argument("duplicate parameter name: " + p->name);
        }
        items_.push_back(p);
    }
}

ParamPtr ParamRegistry::find(std::string_view name) const {
    for (const auto& p : items_) {
        if (p->name == name) return p;
    }
    return nullptr;
}

std::vector<Tensor> ParamRegistry::trainable_tensors() const {
    std::vector<Tensor> out;
    for (const auto& p : items_) {
        if (p->trainable) out.push_back(p->value);
    }
    return out;
}

void ParamRegistry::set_all_trainable(bool v) {
    for (const auto& p : items_) p->set_trainable(v);
}

void ParamRegistry::set_precision(Precision p) {
    for (const auto& item : items_) item->value.set_precision(p);
}

Tensor Linear::forward(const Tensor& x, const ForwardCtx& ctx) const {
    const Tensor& w = qweight ? qdequant : weight;
    Tensor y = add(matmul(x, w), bias);
    if (lora) {
        Tensor xin = x;
        if (ctx.training && lora->dropout_p > 0.0) {
            if (!ctx.rng) throw std::invalid_argument("Linear: training dropout needs an rng");
            xin = dropout(x, lora->dropout_p, *ctx.rng, true);
        }
        Tensor delta = matmul(matmul(xin, transpose(lora->a)), transpose(lora->b));
        y = add(y, scale(delta, lora->scaling));
    }
    return y;
}

Linear make_linear(ParamRegistry& reg, const std::string& name, std::int64_t d_in,
                   std::int64_t d_out, RngState& rng, double init_std) {
    if (init_std < 0.0) init_std = 1.0 / std::sqrt(static_cast<double>(d_in));
    Linear l;
    l.weight = reg.add(name + ".weight", Tensor::randn({d_in, d_out}, rng, 0.0, init_std));
    l.bias = reg.add(name + ".bias", Tensor::zeros({d_out}));
    return l;
}

LayerNormParams make_layer_norm(ParamRegistry& reg, const std::string& name, std::int64_t d) {
    LayerNormParams ln;
    ln.gamma = reg.add(name + ".gamma", Tensor::ones({d}));
    ln.beta = reg.add(name + ".beta", Tensor::zeros({d}));
    return ln;
}

Tensor causal_mask(std::int64_t n) {
    auto mask = Tensor::zeros({n, n}, Precision::f32);
    auto& data = mask.data();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = i + 1; j < n; ++j) {
            data[static_cast<std::size_t>(i * n + j)] = -1e30;
        }
    }
    return mask;
}

Tensor Attention::forward(const Tensor& x, bool causal, const ForwardCtx& ctx) const {
    std::int64_t n = x.dim(0);
    std::int64_t d = q.d_out();
    std::int64_t dh = d / heads;
    Tensor Q = q.forward(x, ctx);
    Tensor K = k.forward(x, ctx);
    Tensor V = v.forward(x, ctx);
    Tensor mask;
    if (causal) mask = causal_mask(n);
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(heads));
    double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < heads; ++h) {
        auto qs = slice(Q, 1, h * dh, (h + 1) * dh);
        auto ks = slice(K, 1, h * dh, (h + 1) * dh);
        auto vs = slice(V, 1, h * dh, (h + 1) * dh);
        auto scores = scale(matmul(qs, transpose(ks)), inv_sqrt_dh);
        if (causal) scores = add(scores, mask);
        head_outputs.push_back(matmul(softmax(scores, -1), vs));
    }
    Tensor merged = heads == 1 ? head_outputs[0] : concat(head_outputs, 1);
    return o.forward(merged, ctx);
}

Tensor TransformerBlock::forward(const Tensor& x, bool causal, const ForwardCtx& ctx) const {
    Tensor h = add(x, attn.forward(ln1.forward(x), causal, ctx));
    return add(h, mlp_out.forward(gelu(mlp_in.forward(ln2.forward(h), ctx)), ctx));
}

TransformerBlock make_block(ParamRegistry& reg, const std::string& prefix, std::int64_t d,
                            int heads, RngState& rng) {
    if (heads < 1 || d % heads != 0) {
        throw std::invalid_argument("make_block: width " + std::to_string(d) +
                                    " not divisible by heads " + std::to_string(heads));
    }
    TransformerBlock b;
    b.ln1 = make_layer_norm(reg, prefix + ".ln1", d);
    b.attn.q = make_linear(reg, prefix + ".attn.q", d, d, rng);
    b.attn.k = make_linear(reg, prefix + ".attn.k", d, d, rng);
    b.attn.v = make_linear(reg, prefix + ".attn.v", d, d, rng);
    b.attn.o = make_linear(reg, prefix + ".attn.o", d, d, rng);
    b.attn.heads = heads;
    b.ln2 = make_layer_norm(reg, prefix + ".ln2", d);
    b.mlp_in = make_linear(reg, prefix + ".mlp_in", d, 4 * d, rng);
    b.mlp_out = make_linear(reg, prefix + ".mlp_out", 4 * d, d, rng);
    return b;
}

}  // namespace sarlv
