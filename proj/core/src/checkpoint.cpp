#include "sarlv/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sarlv/hash.hpp"
#include "sarlv/tensor_io.hpp"

namespace sarlv {

namespace {

nlohmann::json vision_config_json(const VisionEncoderConfig& cfg) {
    nlohmann::json j;
    j["patch_size"] = cfg.patch_size;
    j["d_vision"] = cfg.d_vision;
    j["depth"] = cfg.depth;
    j["heads"] = cfg.heads;
    j["max_image_hw"] = cfg.max_image_hw;
    if (cfg.native_resolution) j["native_resolution"] = *cfg.native_resolution;
    j["resize_to_native"] = cfg.resize_to_native;
    return j;
}

VisionEncoderConfig vision_config_from_json(const nlohmann::json& j) {
    VisionEncoderConfig cfg;
    cfg.patch_size = j.at("patch_size").get<std::int64_t>();
    cfg.d_vision = j.at("d_vision").get<std::int64_t>();
    cfg.depth = j.at("depth").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.max_image_hw = j.at("max_image_hw").get<std::int64_t>();
    if (j.contains("native_resolution")) cfg.native_resolution = j["native_resolution"].get<std::int64_t>();
    cfg.resize_to_native = j.at("resize_to_native").get<bool>();
    return cfg;
}

nlohmann::json lm_config_json(const LanguageModelConfig& cfg) {
    nlohmann::json j;
    j["vocab_size"] = cfg.vocab_size;
    j["d_model"] = cfg.d_model;
    j["depth"] = cfg.depth;
    j["heads"] = cfg.heads;
    j["context_length"] = cfg.context_length;
    return j;
}

LanguageModelConfig lm_config_from_json(const nlohmann::json& j) {
    LanguageModelConfig cfg;
    cfg.vocab_size = j.at("vocab_size").get<std::int64_t>();
    cfg.d_model = j.at("d_model").get<std::int64_t>();
    cfg.depth = j.at("depth").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.context_length = j.at("context_length").get<std::int64_t>();
    return cfg;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const LlvmModel& model,
                     const Vocabulary& vocab, const std::optional<LoraConfig>& lora) {
    std::filesystem::create_directories(dir / "params");

    nlohmann::json config;
    config["vision"] = vision_config_json(model.vision().config());
    config["lm"] = lm_config_json(model.lm().config());
    config["prompt_template"] = model.prompt_template();
    if (lora) config["lora"] = *lora;
    {
        std::ofstream out(dir / "config.json");
        if (!out) throw std::runtime_error("save_checkpoint: cannot write config.json");
        out << config.dump(2) << "\n";
    }
    vocab.save_json(dir / "vocab.json");

    nlohmann::json manifest;
    manifest["tensors"] = nlohmann::json::array();
    for (const auto& p : model.params().items()) {
        save_tensor(dir / "params" / p->name, p->name, p->value);
        manifest["tensors"].push_back(
            {{"name", p->name}, {"hash", hex64(tensor_blob_hash(p->value))}});
    }
    std::ofstream mout(dir / "manifest.json");
    if (!mout) throw std::runtime_error("save_checkpoint: cannot write manifest.json");
    mout << manifest.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream cin_(dir / "config.json");
    if (!cin_) throw std::runtime_error("load_checkpoint: missing config.json in " + dir.string());
    nlohmann::json config = nlohmann::json::parse(cin_);

    RngState scratch(0);  // placeholder init; every parameter is overwritten below
    VisionEncoder vision(vision_config_from_json(config.at("vision")), scratch);
    LanguageModel lm(lm_config_from_json(config.at("lm")), scratch);
    auto dv = vision.config().d_vision;
    auto dm = lm.config().d_model;
    LlvmModel model = assemble_llvm(std::move(vision), Tensor::zeros({dv, dm}),
                                    Tensor::zeros({dm}), std::move(lm),
                                    config.at("prompt_template").get<std::string>());
    std::optional<LoraConfig> lora;
    if (config.contains("lora")) {
        lora = config["lora"].get<LoraConfig>();
        RngState lora_scratch(0);
        inject_lora(model, *lora, lora_scratch);
    }

    std::ifstream min_(dir / "manifest.json");
    if (!min_) throw std::runtime_error("load_checkpoint: missing manifest.json");
    nlohmann::json manifest = nlohmann::json::parse(min_);
    for (const auto& entry : manifest.at("tensors")) {
        auto name = entry.at("name").get<std::string>();
        auto p = model.params().find(name);
        if (!p) throw std::runtime_error("load_checkpoint: unexpected tensor " + name);
        std::string stored_name;
        Tensor t = load_tensor(dir / "params" / name, &stored_name);
        if (stored_name != name || t.shape() != p->value.shape()) {
            throw std::runtime_error("load_checkpoint: tensor " + name + " does not match model");
        }
        if (hex64(tensor_blob_hash(t)) != entry.at("hash").get<std::string>()) {
            throw std::runtime_error("load_checkpoint: hash mismatch for " + name);
        }
        p->value.data() = t.data();
    }

    // Quantized caches derive from the restored weights.
    if (lora && lora->nf4_base) {
        for (auto& block : model.lm().blocks()) {
            for (Linear* lin : {&block.attn.q, &block.attn.k, &block.attn.v, &block.attn.o,
                                &block.mlp_in, &block.mlp_out}) {
                lin->qweight = quantize_nf4(lin->weight);
                lin->qdequant = bf16_round(dequantize(*lin->qweight));
            }
        }
    }

    Vocabulary vocab = Vocabulary::load_json(dir / "vocab.json");
    return LoadedCheckpoint{std::move(model), std::move(vocab), std::move(lora)};
}

}  // namespace sarlv
