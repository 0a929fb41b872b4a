#pragma once

#include <filesystem>
#include <optional>

#include "sarlv/lora.hpp"

namespace sarlv {

/// Checkpoint directory layout:
///   config.json    model/projector/lora configuration and prompt template
///   vocab.json     tokenizer snapshot, so checkpoints are self-contained
///   params/<name>.bin + .json   one tensor blob per named parameter
///   manifest.json  ordered {name, fnv1a64 hash} list of every blob
void save_checkpoint(const std::filesystem::path& dir, const LlvmModel& model,
                     const Vocabulary& vocab, const std::optional<LoraConfig>& lora);

struct LoadedCheckpoint {
    LlvmModel model;
    Vocabulary vocab;
    std::optional<LoraConfig> lora;
};

/// Rebuilds the model from config.json (re-injecting adapters when present),
/// then restores every parameter by name and verifies manifest hashes.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace sarlv
