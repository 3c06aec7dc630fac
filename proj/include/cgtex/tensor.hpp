#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgtex/error.hpp"
#include "cgtex/rng.hpp"

namespace cgtex {

class Tape;

// Dense rank-1..5 tensor of 32-bit reals, row-major contiguous. Values are
// treated as immutable once an op has produced them; the mutating accessors
// exist for optimizers and samplers, which only touch tensors while no tape
// that recorded them is still alive.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);  // zero-filled
    static Tensor full(std::vector<int> shape, float value);
    static Tensor from_data(std::vector<int> shape, std::vector<float> data);
    static Tensor scalar(float value);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t numel() const;
    bool defined() const { return data_ != nullptr; }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    const float* data() const { return data_->data(); }
    float* data() { return data_->data(); }
    float item() const;                         // requires numel() == 1
    float at(std::initializer_list<int> idx) const;

    Tensor clone() const;                       // deep copy, detached
    Tensor detached() const;                    // shares data, drops tape link
    Tensor reshaped(std::vector<int> shape) const;  // shares data, detached

    bool all_finite() const;

    // Tape link. node < 0 means constant with respect to any tape.
    Tape* tape = nullptr;
    int node = -1;

private:
    std::vector<int> shape_;
    std::shared_ptr<std::vector<float>> data_;
};

std::string shape_str(const std::vector<int>& shape);

// Convolution geometry, one entry per spatial axis. Empty vectors mean
// all-ones (stride/dilation) or no padding.
struct ConvGeom {
    std::vector<int> stride;
    std::vector<int> dilation;
    std::vector<int> pad;
};

// Differentiable operations. Inputs and outputs use the layout
// [spatial..., channels]; kernels are [kernel..., in_channels, out_channels].
// Each op evaluates eagerly and, when an input is tape-linked, records
// itself so Tape::backward can reach it.
Tensor conv_forward(const Tensor& input, const Tensor& kernel, const ConvGeom& geom = {});
Tensor hard_sigmoid(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale_shift(const Tensor& x, float scale, float shift);
Tensor sum(const Tensor& x);                 // scalar
Tensor gram(const Tensor& feature);          // [s..., C] -> [C, C]: F^T F / N
Tensor channel_mean(const Tensor& feature);  // [s..., C] -> [C]
Tensor frob_diff(const Tensor& a, const Tensor& b);  // ||a - b||_F, scalar
Tensor upsample_nearest2(const Tensor& x);   // doubles every spatial extent
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, std::vector<int> shape);

// Result of a reverse pass: gradient per tape node. Leaves the root never
// reached get zeros of their own shape.
class Gradients {
public:
    Tensor grad(const Tensor& t) const;

private:
    friend class Tape;
    std::vector<Tensor> by_node_;
};

// Records one evaluation. Nodes are stored in creation order, which is a
// topological order by construction; backward visits each node once, in
// reverse. A tape is single-use and confined to one thread; it must not
// outlive in-place mutation of the tensors it watched.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Marks t as a differentiable leaf and returns the tape-linked view.
    Tensor watch(const Tensor& t);

    Gradients backward(const Tensor& scalar_output);

    int size() const { return static_cast<int>(nodes_.size()); }

    // Recording internals, used by the op implementations.
    using Backprop = std::function<void(Tape&, const Tensor& grad_out)>;
    int record(const std::vector<int>& shape, Backprop fn);
    // Accumulation buffer for a node's gradient, zero-initialized on first use.
    Tensor& grad_buffer(int node_id, const std::vector<int>& shape);

private:
    struct Node {
        std::vector<int> shape;
        Backprop backprop;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool used_ = false;
};

// Tensor of i.i.d. N(0, std^2) entries; deterministic per seed/stream.
Tensor gaussian_noise(const std::vector<int>& shape, float std_dev, std::uint64_t seed);
Tensor gaussian_noise(const std::vector<int>& shape, float std_dev, Rng& rng);

enum class OptKind { plain, adam, rmsprop };

OptKind opt_kind_from_string(const std::string& s);
std::string to_string(OptKind k);

// First/second moment state for a parameter group. Constants are the
// published defaults: adam betas 0.9/0.999, rmsprop decay 0.9, epsilon 1e-8.
struct OptimizerState {
    OptKind kind = OptKind::adam;
    float lr = 1e-3f;
    long step_count = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

// One in-place update step; grads must shape-match params.
void optimizer_step(OptimizerState& state, std::vector<Tensor>& params,
                    const std::vector<Tensor>& grads);

}  // namespace cgtex
