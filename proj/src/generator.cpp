#include "cgtex/generator.hpp"

#include <json.hpp>

namespace cgtex {

using nlohmann::json;

GeneratorSpec GeneratorSpec::make(Modality modality) {
    GeneratorSpec spec;
    spec.modality = modality;
    switch (modality) {
        case Modality::image:
            spec.octaves = 5;
            spec.out_channels = 3;
            break;
        case Modality::dynamic:
            // 12-frame exemplars only admit two halvings on the time axis
            spec.octaves = 3;
            spec.out_channels = 3;
            break;
        case Modality::sound:
            spec.octaves = 3;
            spec.out_channels = 1;
            break;
    }
    return spec;
}

int GeneratorSpec::spatial_rank() const {
    switch (modality) {
        case Modality::image: return 2;
        case Modality::dynamic: return 3;
        case Modality::sound: return 1;
    }
    return 0;
}

std::string GeneratorSpec::to_json() const {
    json j;
    j["modality"] = to_string(modality);
    j["octaves"] = octaves;
    j["octave_channels"] = octave_channels;
    j["out_channels"] = out_channels;
    return j.dump(2);
}

GeneratorSpec GeneratorSpec::from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    GeneratorSpec spec;
    spec.modality = modality_from_string(j.at("modality").get<std::string>());
    spec.octaves = j.at("octaves").get<int>();
    spec.octave_channels = j.at("octave_channels").get<int>();
    spec.out_channels = j.at("out_channels").get<int>();
    return spec;
}

NoisePyramid sample_noise(const GeneratorSpec& spec, const std::vector<int>& target_extents,
                          Rng& rng) {
    const int d = spec.spatial_rank();
    if (static_cast<int>(target_extents.size()) != d)
        throw ContractError("target size must have " + std::to_string(d) + " extents for a " +
                            to_string(spec.modality) + " generator");
    const int multiple = spec.size_multiple();
    for (int e : target_extents)
        if (e < multiple || e % multiple != 0)
            throw ContractError("target extents must be positive multiples of " +
                                std::to_string(multiple) + " (got " + shape_str(target_extents) +
                                ")");
    NoisePyramid z;
    for (int o = 0; o < spec.octaves; ++o) {
        std::vector<int> shape;
        for (int e : target_extents) shape.push_back(e >> o);
        shape.push_back(1);
        z.octaves.push_back(gaussian_noise(shape, 1.0f, rng));
    }
    return z;
}

NoisePyramid sample_noise(const GeneratorSpec& spec, const std::vector<int>& target_extents,
                          std::uint64_t seed) {
    Rng rng(substream(seed, 0x6E));
    return sample_noise(spec, target_extents, rng);
}

namespace {

// Weight layout: per octave three convs (1->c, c->c, c->c), then two
// residual blocks of two convs each at the combined width, then the 1x1
// output conv.
std::vector<std::vector<int>> weight_shapes(const GeneratorSpec& spec) {
    const int d = spec.spatial_rank();
    const int c = spec.octave_channels;
    auto conv_shape = [&](int kernel, int cin, int cout) {
        std::vector<int> s(d, kernel);
        s.push_back(cin);
        s.push_back(cout);
        return s;
    };
    std::vector<std::vector<int>> shapes;
    for (int o = 0; o < spec.octaves; ++o) {
        shapes.push_back(conv_shape(3, 1, c));
        shapes.push_back(conv_shape(3, c, c));
        shapes.push_back(conv_shape(3, c, c));
    }
    const int w = spec.combined_channels();
    for (int r = 0; r < 2; ++r) {
        shapes.push_back(conv_shape(3, w, w));
        shapes.push_back(conv_shape(3, w, w));
    }
    shapes.push_back(conv_shape(1, w, spec.out_channels));
    return shapes;
}

std::vector<std::string> weight_names(const GeneratorSpec& spec) {
    std::vector<std::string> names;
    for (int o = 0; o < spec.octaves; ++o)
        for (int i = 0; i < 3; ++i)
            names.push_back("G.oct" + std::to_string(o) + ".conv" + std::to_string(i));
    for (int r = 0; r < 2; ++r) {
        names.push_back("G.res" + std::to_string(r) + ".conv0");
        names.push_back("G.res" + std::to_string(r) + ".conv1");
    }
    names.push_back("G.out");
    return names;
}

ConvGeom same_pad_geom(const std::vector<int>& kernel_shape, int d) {
    ConvGeom g;
    g.pad.resize(d);
    for (int a = 0; a < d; ++a) g.pad[a] = (kernel_shape[a] - 1) / 2;
    return g;
}

}  // namespace

GeneratorNet::GeneratorNet(GeneratorSpec spec, std::uint64_t seed) : spec_(spec) {
    // Layers fed by [0,1] features start with positive-mean weights so
    // pre-activations land inside the hard sigmoid's active band; the
    // noise-reading convs use a symmetric init, and the second conv of each
    // residual block starts small so blocks begin near the identity.
    Rng rng(substream(seed, 0x67));
    const std::vector<std::vector<int>> shapes = weight_shapes(spec_);
    const int res_base = spec_.octaves * 3;
    for (size_t wi = 0; wi < shapes.size(); ++wi) {
        const std::vector<int>& shape = shapes[wi];
        Tensor w{shape};
        std::int64_t fan_in = 1;
        for (size_t a = 0; a + 1 < shape.size(); ++a) fan_in *= shape[a];
        const bool noise_conv = wi < static_cast<size_t>(res_base) && wi % 3 == 0;
        const bool res_second =
            wi >= static_cast<size_t>(res_base) && wi < static_cast<size_t>(res_base + 4) &&
            (wi - res_base) % 2 == 1;
        if (res_second) {
            const double b = 0.05 * std::sqrt(1.0 / static_cast<double>(fan_in));
            for (std::int64_t i = 0; i < w.numel(); ++i)
                w.data()[i] = static_cast<float>(rng.uniform(-b, b));
        } else if (noise_conv) {
            const double b = std::sqrt(1.0 / static_cast<double>(fan_in));
            for (std::int64_t i = 0; i < w.numel(); ++i)
                w.data()[i] = static_cast<float>(rng.uniform(-b, b));
        } else {
            const double lo = 0.1 / static_cast<double>(fan_in);
            const double hi = 2.1 / static_cast<double>(fan_in);
            for (std::int64_t i = 0; i < w.numel(); ++i)
                w.data()[i] = static_cast<float>(rng.uniform(lo, hi));
        }
        weights_.push_back(std::move(w));
    }
}

Tensor generate_expr(const GeneratorSpec& spec, const std::vector<Tensor>& weights,
                     const NoisePyramid& z) {
    if (static_cast<int>(z.octaves.size()) != spec.octaves)
        throw ContractError("noise pyramid has " + std::to_string(z.octaves.size()) +
                            " octaves, generator expects " + std::to_string(spec.octaves));
    if (weights.size() != weight_shapes(spec).size())
        throw ContractError("generator weight count mismatch");
    const int d = spec.spatial_rank();

    auto process_octave = [&](int o) {
        Tensor x = z.octaves[o];
        for (int i = 0; i < 3; ++i) {
            const Tensor& w = weights[o * 3 + i];
            x = hard_sigmoid(conv_forward(x, w, same_pad_geom(w.shape(), d)));
        }
        return x;
    };

    Tensor cur = process_octave(spec.octaves - 1);
    for (int o = spec.octaves - 2; o >= 0; --o)
        cur = concat_channels(upsample_nearest2(cur), process_octave(o));

    const int res_base = spec.octaves * 3;
    for (int r = 0; r < 2; ++r) {
        const Tensor& wa = weights[res_base + 2 * r];
        const Tensor& wb = weights[res_base + 2 * r + 1];
        Tensor y = conv_forward(hard_sigmoid(conv_forward(cur, wa, same_pad_geom(wa.shape(), d))),
                                wb, same_pad_geom(wb.shape(), d));
        cur = add(cur, y);
    }

    const Tensor& wout = weights.back();
    Tensor out = hard_sigmoid(conv_forward(cur, wout, same_pad_geom(wout.shape(), d)));
    if (spec.modality == Modality::sound) {
        out = scale_shift(out, 2.0f, -1.0f);
        out = reshape(out, {out.shape()[0]});
    }
    return out;
}

Tensor generate(const GeneratorNet& net, const NoisePyramid& z) {
    return generate_expr(net.spec(), net.weights(), z);
}

void append_generator_net(const GeneratorNet& net, NamedTensors* out) {
    const std::vector<std::string> names = weight_names(net.spec());
    for (size_t i = 0; i < names.size(); ++i)
        out->emplace_back(names[i], net.weights()[i].clone());
}

GeneratorNet generator_net_from_checkpoint(const GeneratorSpec& spec,
                                           const NamedTensors& tensors) {
    GeneratorNet net(spec, 0);
    const std::vector<std::string> names = weight_names(spec);
    for (size_t i = 0; i < names.size(); ++i) {
        bool found = false;
        for (const auto& [n, t] : tensors) {
            if (n == names[i]) {
                if (!t.same_shape(net.weights()[i]))
                    throw FormatError("checkpoint tensor " + names[i] + " has shape " +
                                      shape_str(t.shape()) + ", generator expects " +
                                      shape_str(net.weights()[i].shape()));
                net.weights()[i] = t.clone();
                found = true;
                break;
            }
        }
        if (!found) throw FormatError("checkpoint is missing tensor " + names[i]);
    }
    return net;
}

}  // namespace cgtex
