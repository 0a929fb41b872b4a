#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sarlv/language_model.hpp"
#include "sarlv/optimizer.hpp"
#include "sarlv/vision.hpp"

namespace sarlv {

/// Learned temperature, stored as log t so t stays positive; t is clamped to
/// [1e-3, 100] after every update and may be overridden at evaluation time.
struct TemperatureParam {
    Tensor log_t;

    static TemperatureParam init(double t0 = 0.07);
    double t() const;
    void clamp();
};

/// S[i][j] = I_i . T_j; cosine similarity when rows are L2-normalized.
Tensor similarity_matrix(const Tensor& image_emb, const Tensor& text_emb);

/// Symmetric contrastive loss over the similarity matrix: the average of the
/// image-axis and text-axis cross-entropies of S/t against the diagonal,
/// halved. Differentiable w.r.t. both embedding matrices and log_t.
/// Requires unit rows (within 1e-6), matching dims, and no duplicate text
/// rows (off-diagonal entries act as negatives).
Tensor clip_loss(const Tensor& image_emb, const Tensor& text_emb, const Tensor& log_t);
/// Evaluation-only convenience at a fixed temperature; rejects t <= 0.
double clip_loss_value(const Tensor& image_emb, const Tensor& text_emb, double t);

struct AlignPair {
    GrayImage image;
    std::vector<std::int64_t> caption_ids;
    std::string class_name;
};

struct AlignConfig {
    std::int64_t steps = 800;
    std::int64_t batch = 8;  // each batch draws distinct classes
    double learning_rate = 1e-3;
    double temperature_init = 0.07;
    std::uint64_t seed = 0;
    bool train_text = false;  // text encoder stays frozen by default
};

struct AlignLogRow {
    std::int64_t step;
    double loss;
    double temperature;
};

struct AlignResult {
    std::vector<AlignLogRow> history;
    TemperatureParam temperature;
};

/// Minibatch gradient descent on clip_loss. Image side uses the pooled patch
/// embedding, text side the mean over token positions of the final hidden
/// states; both are L2-normalized. Batches never repeat a class internally.
AlignResult align_train(VisionEncoder& vision, LanguageModel& text,
                        const std::vector<AlignPair>& pairs, const AlignConfig& cfg);

void write_align_log_csv(const std::string& path, const std::vector<AlignLogRow>& history);

}  // namespace sarlv
