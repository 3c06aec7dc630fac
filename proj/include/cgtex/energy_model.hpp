#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgtex/checkpoint.hpp"
#include "cgtex/tensor.hpp"
#include "cgtex/texture_io.hpp"

namespace cgtex {

enum class StatKind { gram, mean };

StatKind stat_kind_from_string(const std::string& s);
std::string to_string(StatKind k);

struct LayerSpec {
    std::vector<int> kernel;    // per spatial axis
    std::vector<int> stride;
    std::vector<int> dilation;
    int in_channels = 0;
    int out_channels = 0;
};

// Geometry of the two-branch network: m deep layers (small kernels, growing
// dilation) and n shallow layers (large kernels). Every conv is followed by
// hard_sigmoid and every layer contributes one statistic.
struct NetworkSpec {
    Modality modality = Modality::image;
    StatKind statistic = StatKind::gram;
    std::vector<LayerSpec> deep;
    std::vector<LayerSpec> shallow;

    // Sub-network (mD + nS) defaults per modality; m in 0..9, n in 0..3,
    // (m, n) != (0, 0).
    static NetworkSpec make(Modality modality, int m, int n, int channels, StatKind stat);

    int deep_count() const { return static_cast<int>(deep.size()); }
    int shallow_count() const { return static_cast<int>(shallow.size()); }
    int layer_count() const { return deep_count() + shallow_count(); }

    // Receptive field of a branch along its first spatial axis.
    std::int64_t receptive_field_deep() const;
    std::int64_t receptive_field_shallow() const;

    // Errors if any feature map collapses to zero extent for this input.
    void validate_for(const std::vector<int>& data_shape) const;

    std::string to_json() const;
    static NetworkSpec from_json(const std::string& json_text);
};

// The network D_w: spec plus per-layer kernels (deep branch first). Weight
// mutation must be followed by bump_version(); cached exemplar statistics
// carry the version they were computed under.
class EnergyNet {
public:
    EnergyNet() = default;
    // Kernels i.i.d. uniform in [-b, b], b = sqrt(1 / fan_in); deterministic per seed.
    EnergyNet(NetworkSpec spec, std::uint64_t seed);

    const NetworkSpec& spec() const { return spec_; }
    const std::vector<Tensor>& weights() const { return weights_; }
    std::vector<Tensor>& weights() { return weights_; }
    std::uint64_t weights_version() const { return version_; }
    void bump_version() { ++version_; }

    long update_count = 0;  // optimizer steps applied, trainer bookkeeping

private:
    NetworkSpec spec_;
    std::vector<Tensor> weights_;
    std::uint64_t version_ = 0;
};

// Adapts exemplar data to the conv layout (sound [T] becomes [T, 1]).
Tensor net_input(Modality modality, const Tensor& data);

// Per-layer post-activation features, deep branch then shallow. Both
// branches read the input directly. Works on or off tape; `weights` lets a
// caller substitute tape-watched views of the kernels.
std::vector<Tensor> net_features(const NetworkSpec& spec, const std::vector<Tensor>& weights,
                                 const Tensor& input);

// The layer statistic: Gram matrix G = F^T F / N (entries in [0,1] for
// bounded features) or the per-channel spatial mean.
Tensor gram_statistic(const Tensor& feature);
Tensor mean_statistic(const Tensor& feature);
Tensor stat_of(StatKind kind, const Tensor& feature);

// Statistics of the exemplar under the net's current weights. Invalidated
// by any weight change: consumers check weights_version.
struct LayerStats {
    std::vector<Tensor> values;
    std::uint64_t weights_version = 0;
};

LayerStats exemplar_stats(const EnergyNet& net, const Tensor& f0_data);

// Energy sum over layers of || S(D(f0)) - S(D(f)) ||_F with cached exemplar
// statistics; f may differ from f0 in size (statistics are size-normalized).
// Differentiable through f when built on a tape.
Tensor energy_expr(const NetworkSpec& spec, const std::vector<Tensor>& weights,
                   const Tensor& f_data, const LayerStats& ref);

// Same energy with both f and f0 run through the net; differentiable through
// the weights (the D-learning path).
Tensor energy_pair_expr(const NetworkSpec& spec, const std::vector<Tensor>& weights,
                        const Tensor& f_data, const Tensor& f0_data);

// Eager scalar energy; throws if ref is stale w.r.t. the net's weights.
double energy_value(const EnergyNet& net, const Tensor& f_data, const LayerStats& ref);

// Checkpoint naming: "D.deep.<i>" / "D.shallow.<i>".
void append_energy_net(const EnergyNet& net, NamedTensors* out);
EnergyNet energy_net_from_checkpoint(const NetworkSpec& spec, const NamedTensors& tensors);

}  // namespace cgtex
