#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sarlv/llvm_model.hpp"

namespace sarlv {

struct LoraConfig {
    int rank = 8;
    double alpha = 16.0;
    double dropout = 0.05;
    /// Language-model projection names; available: q, k, v, o, mlp_in, mlp_out.
    std::vector<std::string> targets = {"q", "v"};
    /// Quantize the frozen LM linear bases to NF4 (bf16 compute emulation).
    bool nf4_base = false;
    /// Keep the LLaVA projector trainable alongside the adapters.
    bool train_projector = true;
};

void to_json(nlohmann::json& j, const LoraConfig& cfg);
void from_json(const nlohmann::json& j, LoraConfig& cfg);

struct ParamCensus {
    std::int64_t total = 0;
    std::int64_t trainable = 0;
    double fraction = 0.0;  // trainable / total, in float64
};

/// Walks every named parameter of the model.
ParamCensus count_params(const LlvmModel& model);
ParamCensus count_params(const ParamRegistry& params);

/// Attaches a LoRA adapter (A Gaussian, B zero, scaling alpha/rank) to every
/// targeted projection of every LM block, then freezes everything except the
/// adapters (and the projector when configured). The adapted model computes
/// y = W0 x + (alpha/r) B (A dropout(x)); at injection time it equals the
/// base model exactly. With nf4_base, frozen LM linear weights additionally
/// run through NF4 quantization with bf16 compute.
void inject_lora(LlvmModel& model, const LoraConfig& cfg, RngState& rng);

}  // namespace sarlv
