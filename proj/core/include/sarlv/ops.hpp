#pragma once

#include <cstdint>
#include <vector>

#include "sarlv/autodiff.hpp"
#include "sarlv/rng.hpp"
#include "sarlv/tensor.hpp"

namespace sarlv {

/// When on, every op rejects non-finite inputs. Off by default.
void set_strict_finite(bool on);
bool strict_finite();

// Forward values are computed in double and rounded to the result precision
// (f64 if any input is f64, else f32). Each op registers its backward rule on
// the current tape when one is open and a gradient is required.

Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise; b may broadcast when its shape is a suffix of a's.
Tensor add(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // 2-d
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t stop);
Tensor mean_all(const Tensor& a);     // rank-0 result
Tensor sum_all(const Tensor& a);      // rank-0 result
Tensor mean(const Tensor& a, int axis);
Tensor scale(const Tensor& a, double c);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softmax(const Tensor& a, int axis = -1);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor gelu(const Tensor& a);
Tensor embedding_lookup(const Tensor& table, const std::vector<std::int64_t>& ids);
/// Per-row -log softmax(logits)[target]; result shape [n].
Tensor cross_entropy_with_logits(const Tensor& logits,
                                 const std::vector<std::int64_t>& targets);
Tensor l2_normalize(const Tensor& a, int axis = -1);
/// Inverted scaling: kept activations divide by (1-p); identity when not training.
Tensor dropout(const Tensor& a, double p, RngState& rng, bool training);
/// Same data viewed under a new shape (copying; gradients reshape back).
Tensor reshape(const Tensor& a, Shape shape);

/// Round every element to bfloat16 (ties to even; non-finite pass through).
/// Result is tagged bf16 and detached from autodiff.
Tensor bf16_round(const Tensor& a);

/// L2 norm over the concatenation of all elements; empty list gives 0.
double global_norm(const std::vector<Tensor>& tensors);

/// Index of the max element of the last row of a 2-d tensor (ties -> lowest).
std::int64_t argmax_last_row(const Tensor& logits);

}  // namespace sarlv
