#include "sarlv/clip.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace sarlv {

TemperatureParam TemperatureParam::init(double t0) {
    if (t0 <= 0.0) throw std::invalid_argument("TemperatureParam: t must be positive");
    TemperatureParam p;
    p.log_t = Tensor::scalar(std::log(t0), Precision::f64);
    p.log_t.set_requires_grad(true);
    return p;
}

double TemperatureParam::t() const { return std::exp(log_t.value()); }

void TemperatureParam::clamp() {
    double lo = std::log(1e-3), hi = std::log(100.0);
    auto& v = log_t.data()[0];
    v = std::clamp(v, lo, hi);
}

Tensor similarity_matrix(const Tensor& image_emb, const Tensor& text_emb) {
    if (image_emb.rank() != 2 || text_emb.rank() != 2 ||
        image_emb.dim(1) != text_emb.dim(1)) {
        throw std::invalid_argument("similarity_matrix: dimension mismatch " +
                                    shape_str(image_emb.shape()) + " vs " +
                                    shape_str(text_emb.shape()));
    }
    return matmul(image_emb, transpose(text_emb));
}

namespace {

void check_alignment_batch(const Tensor& image_emb, const Tensor& text_emb) {
    std::int64_t n = image_emb.dim(0);
    if (n < 1 || text_emb.dim(0) != n) {
        throw std::invalid_argument("clip_loss: batch sides disagree: " +
                                    shape_str(image_emb.shape()) + " vs " +
                                    shape_str(text_emb.shape()));
    }
    std::int64_t d = image_emb.dim(1);
    for (const Tensor* m : {&image_emb, &text_emb}) {
        for (std::int64_t r = 0; r < n; ++r) {
            double ss = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                double v = m->data()[static_cast<std::size_t>(r * d + j)];
                ss += v * v;
            }
            if (std::fabs(std::sqrt(ss) - 1.0) > 1e-6) {
                throw std::invalid_argument("clip_loss: row " + std::to_string(r) +
                                            " is not L2-normalized");
            }
        }
    }
    // duplicate text rows would make "negatives" identical to the positive
    for (std::int64_t a = 0; a < n; ++a) {
        for (std::int64_t b = a + 1; b < n; ++b) {
            bool same = true;
            for (std::int64_t j = 0; j < d && same; ++j) {
                same = text_emb.data()[static_cast<std::size_t>(a * d + j)] ==
                       text_emb.data()[static_cast<std::size_t>(b * d + j)];
            }
            if (same) {
                throw std::invalid_argument("clip_loss: duplicate pair at rows " +
                                            std::to_string(a) + " and " + std::to_string(b));
            }
        }
    }
}

}  // namespace

Tensor clip_loss(const Tensor& image_emb, const Tensor& text_emb, const Tensor& log_t) {
    if (log_t.size() != 1) throw std::invalid_argument("clip_loss: log_t must be scalar");
    check_alignment_batch(image_emb, text_emb);
    std::int64_t n = image_emb.dim(0);
    Tensor sim = similarity_matrix(image_emb, text_emb);
    Tensor inv_t = exp(scale(log_t, -1.0));
    Tensor logits = multiply(sim, inv_t);
    std::vector<std::int64_t> diagonal(static_cast<std::size_t>(n));
    std::iota(diagonal.begin(), diagonal.end(), 0);
    Tensor image_axis = mean_all(cross_entropy_with_logits(logits, diagonal));
    Tensor text_axis = mean_all(cross_entropy_with_logits(transpose(logits), diagonal));
    return scale(add(image_axis, text_axis), 0.5);
}

double clip_loss_value(const Tensor& image_emb, const Tensor& text_emb, double t) {
    if (t <= 0.0) throw std::invalid_argument("clip_loss: temperature must be positive");
    auto log_t = Tensor::scalar(std::log(t), Precision::f64);
    return clip_loss(image_emb, text_emb, log_t).value();
}

namespace {

Tensor stack_rows(const std::vector<Tensor>& rows) {
    std::vector<Tensor> shaped;
    shaped.reserve(rows.size());
    for (const auto& r : rows) shaped.push_back(reshape(r, {1, r.dim(0)}));
    return shaped.size() == 1 ? shaped[0] : concat(shaped, 0);
}

}  // namespace

AlignResult align_train(VisionEncoder& vision, LanguageModel& text,
                        const std::vector<AlignPair>& pairs, const AlignConfig& cfg) {
    if (pairs.size() < 2) throw std::invalid_argument("align_train: need at least 2 pairs");
    if (cfg.batch < 2) throw std::invalid_argument("align_train: batch must be >= 2");
    if (cfg.batch > static_cast<std::int64_t>(pairs.size())) {
        throw std::invalid_argument("align_train: batch " + std::to_string(cfg.batch) +
                                    " larger than dataset of " + std::to_string(pairs.size()));
    }

    // group pair indices by class; batches draw distinct classes
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < pairs.size(); ++i) by_class[pairs[i].class_name].push_back(i);
    std::vector<std::string> class_names;
    for (const auto& [name, members] : by_class) class_names.push_back(name);
    if (cfg.batch > static_cast<std::int64_t>(class_names.size())) {
        throw std::invalid_argument(
            "align_train: batch " + std::to_string(cfg.batch) + " exceeds the " +
            std::to_string(class_names.size()) + " distinct classes available");
    }

    AlignResult result;
    result.temperature = TemperatureParam::init(cfg.temperature_init);

    std::vector<ParamPtr> optimized;
    for (const auto& p : vision.params().items()) {
        if (p->trainable) optimized.push_back(p);
    }
    if (cfg.train_text) {
        for (const auto& p : text.params().items()) {
            if (p->trainable) optimized.push_back(p);
        }
    }
    auto temp_param = std::make_shared<Parameter>();
    temp_param->name = "align.log_t";
    temp_param->value = result.temperature.log_t;
    temp_param->trainable = true;
    temp_param->decay = false;
    optimized.push_back(temp_param);

    OptimizerConfig ocfg;
    ocfg.learning_rate = cfg.learning_rate;
    ocfg.weight_decay = 0.0;
    ocfg.warmup_steps = 0;
    AdamW optimizer(optimized, ocfg);

    // Frozen text encoder: caption embeddings are fixed, compute them once.
    std::map<std::string, Tensor> frozen_text_cache;
    ForwardCtx eval_ctx;
    if (!cfg.train_text) {
        for (const auto& pair : pairs) {
            if (frozen_text_cache.count(pair.class_name)) continue;
            Tensor hidden = text.hidden_embedded(text.embed(pair.caption_ids), eval_ctx);
            frozen_text_cache.emplace(pair.class_name,
                                      l2_normalize(mean(hidden, 0), -1).detach());
        }
    }

    RngState rng(RngState::derive(cfg.seed, "align"));
    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        // sample cfg.batch distinct classes
        std::vector<std::string> order = class_names;
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_index(i)]);
        }
        std::vector<std::size_t> chosen;
        for (std::int64_t b = 0; b < cfg.batch; ++b) {
            const auto& members = by_class[order[static_cast<std::size_t>(b)]];
            chosen.push_back(members[rng.uniform_index(members.size())]);
        }

        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            ForwardCtx ctx;
            ctx.training = true;
            ctx.rng = &rng;
            std::vector<Tensor> image_rows, text_rows;
            for (auto idx : chosen) {
                const auto& pair = pairs[idx];
                image_rows.push_back(l2_normalize(vision.encode(pair.image, ctx).pooled, -1));
                if (cfg.train_text) {
                    Tensor hidden = text.hidden_embedded(text.embed(pair.caption_ids), ctx);
                    text_rows.push_back(l2_normalize(mean(hidden, 0), -1));
                } else {
                    text_rows.push_back(frozen_text_cache.at(pair.class_name));
                }
            }
            loss = clip_loss(stack_rows(image_rows), stack_rows(text_rows),
                             result.temperature.log_t);
        }
        double loss_value = loss.value();
        if (!std::isfinite(loss_value)) {
            throw std::runtime_error("align_train: non-finite loss at step " +
                                     std::to_string(step));
        }
        tape.backward(loss);
        optimizer.step_with_lr(cfg.learning_rate);
        result.temperature.clamp();
        result.history.push_back(AlignLogRow{step, loss_value, result.temperature.t()});
    }
    return result;
}

void write_align_log_csv(const std::string& path, const std::vector<AlignLogRow>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_align_log_csv: cannot open " + path);
    out << "step,loss,t\n";
    for (const auto& row : history) {
        out << row.step << "," << row.loss << "," << row.temperature << "\n";
    }
}

}  // namespace sarlv
