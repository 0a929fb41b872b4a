#include "sarlv/lora.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sarlv {

void to_json(nlohmann::json& j, const LoraConfig& cfg) {
    j = nlohmann::json{{"rank", cfg.rank},          {"alpha", cfg.alpha},
                       {"dropout", cfg.dropout},    {"targets", cfg.targets},
                       {"nf4_base", cfg.nf4_base},  {"train_projector", cfg.train_projector}};
}

void from_json(const nlohmann::json& j, LoraConfig& cfg) {
    j.at("rank").get_to(cfg.rank);
    j.at("alpha").get_to(cfg.alpha);
    j.at("dropout").get_to(cfg.dropout);
    j.at("targets").get_to(cfg.targets);
    cfg.nf4_base = j.value("nf4_base", false);
    cfg.train_projector = j.value("train_projector", true);
}

ParamCensus count_params(const ParamRegistry& params) {
    ParamCensus census;
    for (const auto& p : params.items()) {
        census.total += p->value.size();
        if (p->trainable) census.trainable += p->value.size();
    }
    census.fraction = census.total == 0
                          ? 0.0
                          : static_cast<double>(census.trainable) / static_cast<double>(census.total);
    return census;
}

ParamCensus count_params(const LlvmModel& model) { return count_params(model.params()); }

namespace {

Linear* resolve_target(TransformerBlock& block, const std::string& name) {
    if (name == "q") return &block.attn.q;
    if (name == "k") return &block.attn.k;
    if (name == "v") return &block.attn.v;
    if (name == "o") return &block.attn.o;
    if (name == "mlp_in") return &block.mlp_in;
    if (name == "mlp_out") return &block.mlp_out;
    return nullptr;
}

}  // namespace

void inject_lora(LlvmModel& model, const LoraConfig& cfg, RngState& rng) {
    if (cfg.rank < 1) throw std::invalid_argument("inject_lora: rank must be >= 1");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
        throw std::invalid_argument("inject_lora: dropout must lie in [0, 1)");
    }
    if (cfg.targets.empty()) throw std::invalid_argument("inject_lora: empty target set");
    auto& blocks = model.lm().blocks();
    if (blocks.empty()) throw std::invalid_argument("inject_lora: language model has no blocks");
    for (const auto& t : cfg.targets) {
        if (!resolve_target(blocks[0], t)) {
            throw std::invalid_argument("inject_lora: unknown target \"" + t +
                                        "\"; available: q, k, v, o, mlp_in, mlp_out");
        }
    }

    // Base model freezes; only adapters (and optionally the projector) train.
    model.params().set_all_trainable(false);

    ParamRegistry adapters;
    double stddev = 1.0 / std::sqrt(static_cast<double>(cfg.rank));
    const std::string lm_prefix = model.lm().prefix();
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        for (const auto& t : cfg.targets) {
            Linear* target = resolve_target(blocks[bi], t);
            if (target->lora) {
                throw std::invalid_argument("inject_lora: target \"" + t + "\" already adapted");
            }
            std::string base =
                lm_prefix + ".blocks." + std::to_string(bi) +
                (t == "mlp_in" || t == "mlp_out" ? ".": ".attn.") + t;
            LoraAdapter adapter;
            adapter.a = adapters.add(base + ".lora_a",
                                     Tensor::randn({cfg.rank, target->d_in()}, rng, 0.0, stddev));
            adapter.b = adapters.add(base + ".lora_b",
                                     Tensor::zeros({target->d_out(), cfg.rank}));
            adapter.scaling = cfg.alpha / static_cast<double>(cfg.rank);
            adapter.dropout_p = cfg.dropout;
            target->lora = std::move(adapter);
        }
    }
    model.params().append(adapters);
    model.lm().params().append(adapters);

    if (cfg.nf4_base) {
        for (auto& block : blocks) {
            for (const char* name : {"q", "k", "v", "o", "mlp_in", "mlp_out"}) {
                Linear* lin = resolve_target(block, name);
                lin->qweight = quantize_nf4(lin->weight);
                lin->qdequant = bf16_round(dequantize(*lin->qweight));
            }
        }
    }

    if (cfg.train_projector) {
        for (const char* name : {"projector.weight", "projector.bias"}) {
            auto p = model.params().find(name);
            if (p) p->set_trainable(true);
        }
    }
}

}  // namespace sarlv
