#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgtex/checkpoint.hpp"
#include "cgtex/tensor.hpp"
#include "cgtex/texture_io.hpp"

namespace cgtex {

// Fully convolutional multi-scale generator: each octave's noise runs
// through three same-padded 3-kernel convs (hard_sigmoid), the coarsest map
// is repeatedly upsampled (nearest-neighbor x2) and channel-concatenated
// with the next finer octave, then two residual blocks
// (conv3 -> sigmoid -> conv3 + identity) and a 1x1 conv produce the output.
// Outputs land in [0,1]; sound is affine-mapped to [-1,1].
struct GeneratorSpec {
    Modality modality = Modality::image;
    int octaves = 5;
    int octave_channels = 8;
    int out_channels = 3;

    static GeneratorSpec make(Modality modality);

    int spatial_rank() const;
    int combined_channels() const { return octaves * octave_channels; }
    // Valid output extents are multiples of this.
    int size_multiple() const { return 1 << (octaves - 1); }

    std::string to_json() const;
    static GeneratorSpec from_json(const std::string& json_text);
};

// One noise tensor per octave, i.i.d. N(0,1), single channel, extents
// exactly halved from finest to coarsest.
struct NoisePyramid {
    std::vector<Tensor> octaves;  // index 0 = finest
};

// target_extents: the output size (no channel axis). Errors name the
// required size multiple when the extents do not halve cleanly.
NoisePyramid sample_noise(const GeneratorSpec& spec, const std::vector<int>& target_extents,
                          std::uint64_t seed);
NoisePyramid sample_noise(const GeneratorSpec& spec, const std::vector<int>& target_extents,
                          Rng& rng);

class GeneratorNet {
public:
    GeneratorNet() = default;
    GeneratorNet(GeneratorSpec spec, std::uint64_t seed);

    const GeneratorSpec& spec() const { return spec_; }
    const std::vector<Tensor>& weights() const { return weights_; }
    std::vector<Tensor>& weights() { return weights_; }

    long update_count = 0;

private:
    GeneratorSpec spec_;
    std::vector<Tensor> weights_;
};

// Tape-aware generation; `weights` may be tape-watched views for G-learning.
// Output shape equals the finest octave extents (+ channels; sound rank 1).
Tensor generate_expr(const GeneratorSpec& spec, const std::vector<Tensor>& weights,
                     const NoisePyramid& z);
Tensor generate(const GeneratorNet& net, const NoisePyramid& z);

// Checkpoint naming: tensors prefixed "G.".
void append_generator_net(const GeneratorNet& net, NamedTensors* out);
GeneratorNet generator_net_from_checkpoint(const GeneratorSpec& spec,
                                           const NamedTensors& tensors);

}  // namespace cgtex
