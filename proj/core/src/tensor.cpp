#include "sarlv/tensor.hpp"

#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sarlv {

const char* precision_name(Precision p) {
    switch (p) {
        case Precision::f64: return "float64";
        case Precision::f32: return "float32";
        case Precision::bf16: return "bfloat16";
    }
    return "unknown";
}

Precision precision_from_name(const std::string& name) {
    if (name == "float64") return Precision::f64;
    if (name == "float32") return Precision::f32;
    if (name == "bfloat16") return Precision::bf16;
    throw std::invalid_argument("unknown precision name: " + name);
}

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

std::shared_ptr<detail::TensorNode> make_node(Shape shape, Precision p) {
    for (auto d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->data.assign(static_cast<std::size_t>(numel(shape)), 0.0);
    node->shape = std::move(shape);
    node->precision = p;
    return node;
}

}  // namespace

Tensor Tensor::wrap(std::shared_ptr<detail::TensorNode> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

Tensor Tensor::zeros(Shape shape, Precision p) { return wrap(make_node(std::move(shape), p)); }

Tensor Tensor::ones(Shape shape, Precision p) { return full(std::move(shape), 1.0, p); }

Tensor Tensor::full(Shape shape, double value, Precision p) {
    auto node = make_node(std::move(shape), p);
    double v = round_scalar_to(value, p);
    for (auto& x : node->data) x = v;
    return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, Precision p) { return full({}, value, p); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data, Precision p) {
    if (numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw std::invalid_argument("from_data: shape " + shape_str(shape) + " needs " +
                                    std::to_string(numel(shape)) + " values, got " +
                                    std::to_string(data.size()));
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->precision = p;
    round_to_precision(node->data, p);
    return wrap(std::move(node));
}

Tensor Tensor::randn(Shape shape, RngState& rng, double mean, double stddev, Precision p) {
    auto node = make_node(std::move(shape), p);
    for (auto& x : node->data) x = rng.normal(mean, stddev);
    round_to_precision(node->data, p);
    return wrap(std::move(node));
}

Tensor Tensor::rand_uniform(Shape shape, RngState& rng, double lo, double hi, Precision p) {
    auto node = make_node(std::move(shape), p);
    for (auto& x : node->data) x = rng.uniform(lo, hi);
    round_to_precision(node->data, p);
    return wrap(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }

int Tensor::rank() const { return static_cast<int>(node_->shape.size()); }

std::int64_t Tensor::dim(int i) const {
    int r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw std::out_of_range("dim index out of range");
    return node_->shape[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::size() const { return static_cast<std::int64_t>(node_->data.size()); }

Precision Tensor::precision() const { return node_->precision; }

void Tensor::set_precision(Precision p) {
    node_->precision = p;
    round_to_precision(node_->data, p);
}

const std::vector<double>& Tensor::data() const { return node_->data; }
std::vector<double>& Tensor::data() { return node_->data; }

double Tensor::value() const {
    if (size() != 1) {
        throw std::invalid_argument("value(): tensor of shape " + shape_str(shape()) +
                                    " is not a scalar");
    }
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
    node_->requires_grad = v;
    node_->needs_grad = v;
    return *this;
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }

Tensor Tensor::grad() const {
    if (node_->grad.empty()) return Tensor::zeros(node_->shape, Precision::f64);
    return Tensor::from_data(node_->shape, node_->grad, Precision::f64);
}

std::vector<double>& Tensor::grad_buffer() {
    if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = node_->shape;
    node->data = node_->data;
    node->precision = node_->precision;
    return wrap(std::move(node));
}

Tensor Tensor::clone() const { return detach(); }

double bf16_round_scalar(double v) {
    float f = static_cast<float>(v);
    if (!std::isfinite(f)) return f;
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    std::uint32_t rounding_bias = 0x7fffu + ((bits >> 16) & 1u);
    bits += rounding_bias;
    bits &= 0xffff0000u;
    return std::bit_cast<float>(bits);
}

double round_scalar_to(double v, Precision p) {
    switch (p) {
        case Precision::f64: return v;
        case Precision::f32: return static_cast<double>(static_cast<float>(v));
        case Precision::bf16: return bf16_round_scalar(v);
    }
    return v;
}

void round_to_precision(std::vector<double>& values, Precision p) {
    if (p == Precision::f64) return;
    if (p == Precision::f32) {
        for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
    } else {
        for (auto& v : values) v = bf16_round_scalar(v);
    }
}

}  // namespace sarlv
