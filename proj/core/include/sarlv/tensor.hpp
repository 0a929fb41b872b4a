#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sarlv/rng.hpp"

namespace sarlv {

/// Storage precision tag. Values are always held as doubles; f32 and bf16
/// tensors hold doubles that are exactly representable at that width, enforced
/// by rounding at op boundaries (bf16 only via explicit bf16_round).
enum class Precision { f64, f32, bf16 };

const char* precision_name(Precision p);
Precision precision_from_name(const std::string& name);

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until backward touches this node
    Precision precision = Precision::f32;
    bool requires_grad = false;  // leaf flag
    bool needs_grad = false;     // reachable from a grad-requiring leaf
};

}  // namespace detail

/// Shared-ownership handle over an n-d row-major array. Copies alias the same
/// storage; ops return fresh nodes. A rank-0 shape is a scalar with one element.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, Precision p = Precision::f32);
    static Tensor ones(Shape shape, Precision p = Precision::f32);
    static Tensor full(Shape shape, double value, Precision p = Precision::f32);
    static Tensor scalar(double value, Precision p = Precision::f64);
    static Tensor from_data(Shape shape, std::vector<double> data,
                            Precision p = Precision::f32);
    static Tensor randn(Shape shape, RngState& rng, double mean = 0.0,
                        double stddev = 1.0, Precision p = Precision::f32);
    static Tensor rand_uniform(Shape shape, RngState& rng, double lo, double hi,
                               Precision p = Precision::f32);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int rank() const;
    std::int64_t dim(int i) const;  // negative i counts from the back
    std::int64_t size() const;
    Precision precision() const;
    /// Re-tag the storage precision. Widening is lossless; narrowing rounds.
    void set_precision(Precision p);

    const std::vector<double>& data() const;
    std::vector<double>& data();  // single-writer contract
    double value() const;         // scalar tensors only

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v);

    bool has_grad() const;
    /// Copy of the accumulated gradient; zeros when none has been recorded.
    Tensor grad() const;
    std::vector<double>& grad_buffer();  // allocated on demand
    void zero_grad();

    /// Same data, detached from autodiff (fresh leaf, requires_grad off).
    Tensor detach() const;
    /// Deep copy of values into a fresh leaf.
    Tensor clone() const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }
    static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

private:
    std::shared_ptr<detail::TensorNode> node_;
};

/// Round-to-nearest-even at the given storage width, elementwise in place.
void round_to_precision(std::vector<double>& values, Precision p);
double round_scalar_to(double v, Precision p);
/// bfloat16 rounding of one value (8-bit significand incl. the implicit bit,
/// ties to even). Non-finite values pass through.
double bf16_round_scalar(double v);

}  // namespace sarlv
