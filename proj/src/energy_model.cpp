#include "cgtex/energy_model.hpp"

#include <json.hpp>

namespace cgtex {

using nlohmann::json;

StatKind stat_kind_from_string(const std::string& s) {
    if (s == "gram") return StatKind::gram;
    if (s == "mean") return StatKind::mean;
    throw ContractError("unknown statistic kind: " + s);
}

std::string to_string(StatKind k) { return k == StatKind::gram ? "gram" : "mean"; }

// ---------------------------------------------------------------- spec

namespace {

int spatial_rank(Modality m) {
    switch (m) {
        case Modality::image: return 2;
        case Modality::dynamic: return 3;
        case Modality::sound: return 1;
    }
    return 0;
}

int input_channels(Modality m) { return m == Modality::sound ? 1 : 3; }

// Deep-branch dilation schedule; the shallow branch uses (1, 4, 16).
constexpr int kDeepDilation[9] = {1, 1, 1, 2, 2, 2, 4, 4, 4};
constexpr int kShallowDilation[3] = {1, 4, 16};

LayerSpec uniform_layer(int d, int kernel, int stride, int dilation, int cin, int cout) {
    LayerSpec l;
    l.kernel.assign(d, kernel);
    l.stride.assign(d, stride);
    l.dilation.assign(d, dilation);
    l.in_channels = cin;
    l.out_channels = cout;
    return l;
}

}  // namespace

NetworkSpec NetworkSpec::make(Modality modality, int m, int n, int channels, StatKind stat) {
    if (m < 0 || m > 9 || n < 0 || n > 3)
        throw SpecError("sub-network counts out of range: m in 0..9, n in 0..3, got m=" +
                        std::to_string(m) + " n=" + std::to_string(n));
    if (m == 0 && n == 0) throw SpecError("sub-network must have at least one layer");
    if (channels < 1) throw SpecError("channel count must be >= 1");

    NetworkSpec spec;
    spec.modality = modality;
    spec.statistic = stat;
    const int d = spatial_rank(modality);
    const int cin0 = input_channels(modality);

    for (int i = 0; i < m; ++i) {
        const int cin = i == 0 ? cin0 : channels;
        if (modality == Modality::sound) {
            // kernel 25; stride 5 on the first layer, 10 after; no dilation
            spec.deep.push_back(uniform_layer(d, 25, i == 0 ? 5 : 10, 1, cin, channels));
        } else {
            spec.deep.push_back(uniform_layer(d, 3, 1, kDeepDilation[i], cin, channels));
        }
    }
    for (int j = 0; j < n; ++j) {
        const int cin = j == 0 ? cin0 : channels;
        const int kernel = modality == Modality::sound ? 101 : (modality == Modality::dynamic ? 5 : 11);
        spec.shallow.push_back(uniform_layer(d, kernel, 1, kShallowDilation[j], cin, channels));
    }
    return spec;
}

namespace {

std::int64_t branch_rf(const std::vector<LayerSpec>& branch) {
    std::int64_t rf = 1, jump = 1;
    for (const LayerSpec& l : branch) {
        const std::int64_t k_eff =
            static_cast<std::int64_t>(l.dilation[0]) * (l.kernel[0] - 1) + 1;
        rf += (k_eff - 1) * jump;
        jump *= l.stride[0];
    }
    return rf;
}

}  // namespace

std::int64_t NetworkSpec::receptive_field_deep() const { return branch_rf(deep); }
std::int64_t NetworkSpec::receptive_field_shallow() const { return branch_rf(shallow); }

void NetworkSpec::validate_for(const std::vector<int>& data_shape) const {
    const int d = spatial_rank(modality);
    std::vector<int> ext;
    if (modality == Modality::sound && data_shape.size() == 1)
        ext = {data_shape[0]};
    else if (static_cast<int>(data_shape.size()) == d + 1)
        ext.assign(data_shape.begin(), data_shape.end() - 1);
    else
        throw SpecError("exemplar shape " + shape_str(data_shape) + " does not fit a " +
                        to_string(modality) + " network");

    auto run_branch = [&](const std::vector<LayerSpec>& branch, const char* name) {
        std::vector<int> cur = ext;
        for (size_t i = 0; i < branch.size(); ++i) {
            const LayerSpec& l = branch[i];
            for (int a = 0; a < d; ++a) {
                const std::int64_t span =
                    static_cast<std::int64_t>(l.dilation[a]) * (l.kernel[a] - 1) + 1;
                const std::int64_t out = (cur[a] - span) / l.stride[a] + 1;
                if (cur[a] < span || out < 1)
                    throw SpecError(std::string(name) + " layer " + std::to_string(i) +
                                    " collapses the feature map to zero extent for exemplar " +
                                    shape_str(data_shape));
                cur[a] = static_cast<int>(out);
            }
        }
    };
    run_branch(deep, "deep");
    run_branch(shallow, "shallow");
}

std::string NetworkSpec::to_json() const {
    auto layer_json = [](const LayerSpec& l) {
        return json{{"kernel", l.kernel},
                    {"stride", l.stride},
                    {"dilation", l.dilation},
                    {"in_channels", l.in_channels},
                    {"out_channels", l.out_channels}};
    };
    json j;
    j["modality"] = to_string(modality);
    j["statistic"] = cgtex::to_string(statistic);
    j["deep"] = json::array();
    for (const LayerSpec& l : deep) j["deep"].push_back(layer_json(l));
    j["shallow"] = json::array();
    for (const LayerSpec& l : shallow) j["shallow"].push_back(layer_json(l));
    return j.dump(2);
}

NetworkSpec NetworkSpec::from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    auto layer_from = [](const json& lj) {
        LayerSpec l;
        l.kernel = lj.at("kernel").get<std::vector<int>>();
        l.stride = lj.at("stride").get<std::vector<int>>();
        l.dilation = lj.at("dilation").get<std::vector<int>>();
        l.in_channels = lj.at("in_channels").get<int>();
        l.out_channels = lj.at("out_channels").get<int>();
        return l;
    };
    NetworkSpec spec;
    spec.modality = modality_from_string(j.at("modality").get<std::string>());
    spec.statistic = stat_kind_from_string(j.at("statistic").get<std::string>());
    for (const json& lj : j.at("deep")) spec.deep.push_back(layer_from(lj));
    for (const json& lj : j.at("shallow")) spec.shallow.push_back(layer_from(lj));
    return spec;
}

// ---------------------------------------------------------------- net

EnergyNet::EnergyNet(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    Rng rng(substream(seed, 0xD));
    auto init_branch = [&](const std::vector<LayerSpec>& branch) {
        for (const LayerSpec& l : branch) {
            std::vector<int> shape(l.kernel);
            shape.push_back(l.in_channels);
            shape.push_back(l.out_channels);
            Tensor w{shape};
            std::int64_t fan_in = l.in_channels;
            for (int k : l.kernel) fan_in *= k;
            const double b = std::sqrt(1.0 / static_cast<double>(fan_in));
            for (std::int64_t i = 0; i < w.numel(); ++i)
                w.data()[i] = static_cast<float>(rng.uniform(-b, b));
            weights_.push_back(std::move(w));
        }
    };
    init_branch(spec_.deep);
    init_branch(spec_.shallow);
}

Tensor net_input(Modality modality, const Tensor& data) {
    if (modality == Modality::sound && data.rank() == 1)
        return reshape(data, {data.shape()[0], 1});
    return data;
}

std::vector<Tensor> net_features(const NetworkSpec& spec, const std::vector<Tensor>& weights,
                                 const Tensor& input) {
    if (static_cast<int>(weights.size()) != spec.layer_count())
        throw ContractError("weight count does not match spec layer count");
    std::vector<Tensor> features;
    features.reserve(spec.layer_count());
    const Tensor x = net_input(spec.modality, input);
    Tensor cur = x;
    for (int i = 0; i < spec.deep_count(); ++i) {
        const LayerSpec& l = spec.deep[i];
        cur = hard_sigmoid(conv_forward(cur, weights[i], ConvGeom{l.stride, l.dilation, {}}));
        features.push_back(cur);
    }
    cur = x;
    for (int j = 0; j < spec.shallow_count(); ++j) {
        const LayerSpec& l = spec.shallow[j];
        cur = hard_sigmoid(conv_forward(cur, weights[spec.deep_count() + j],
                                        ConvGeom{l.stride, l.dilation, {}}));
        features.push_back(cur);
    }
    return features;
}

Tensor gram_statistic(const Tensor& feature) { return gram(feature); }
Tensor mean_statistic(const Tensor& feature) { return channel_mean(feature); }

Tensor stat_of(StatKind kind, const Tensor& feature) {
    return kind == StatKind::gram ? gram(feature) : channel_mean(feature);
}

LayerStats exemplar_stats(const EnergyNet& net, const Tensor& f0_data) {
    LayerStats stats;
    stats.weights_version = net.weights_version();
    for (const Tensor& feat : net_features(net.spec(), net.weights(), f0_data))
        stats.values.push_back(stat_of(net.spec().statistic, feat));
    return stats;
}

Tensor energy_expr(const NetworkSpec& spec, const std::vector<Tensor>& weights,
                   const Tensor& f_data, const LayerStats& ref) {
    std::vector<Tensor> features = net_features(spec, weights, f_data);
    if (features.size() != ref.values.size())
        throw ContractError("exemplar statistics layer count mismatch");
    Tensor e;
    for (size_t l = 0; l < features.size(); ++l) {
        Tensor term = frob_diff(stat_of(spec.statistic, features[l]), ref.values[l]);
        e = l == 0 ? term : add(e, term);
    }
    return e;
}

Tensor energy_pair_expr(const NetworkSpec& spec, const std::vector<Tensor>& weights,
                        const Tensor& f_data, const Tensor& f0_data) {
    std::vector<Tensor> f_feats = net_features(spec, weights, f_data);
    std::vector<Tensor> f0_feats = net_features(spec, weights, f0_data);
    Tensor e;
    for (size_t l = 0; l < f_feats.size(); ++l) {
        Tensor term = frob_diff(stat_of(spec.statistic, f0_feats[l]),
                                stat_of(spec.statistic, f_feats[l]));
        e = l == 0 ? term : add(e, term);
    }
    return e;
}

double energy_value(const EnergyNet& net, const Tensor& f_data, const LayerStats& ref) {
    if (ref.weights_version != net.weights_version())
        throw ContractError(
            "exemplar statistics are stale: recompute after every weight update");
    return energy_expr(net.spec(), net.weights(), f_data, ref).item();
}

void append_energy_net(const EnergyNet& net, NamedTensors* out) {
    const int m = net.spec().deep_count();
    for (int i = 0; i < net.spec().layer_count(); ++i) {
        const std::string name = i < m ? "D.deep." + std::to_string(i)
                                       : "D.shallow." + std::to_string(i - m);
        out->emplace_back(name, net.weights()[i].clone());
    }
}

EnergyNet energy_net_from_checkpoint(const NetworkSpec& spec, const NamedTensors& tensors) {
    EnergyNet net(spec, 0);
    const int m = spec.deep_count();
    for (int i = 0; i < spec.layer_count(); ++i) {
        const std::string name = i < m ? "D.deep." + std::to_string(i)
                                       : "D.shallow." + std::to_string(i - m);
        bool found = false;
        for (const auto& [n, t] : tensors) {
            if (n == name) {
                if (!t.same_shape(net.weights()[i]))
                    throw FormatError("checkpoint tensor " + name + " has shape " +
                                      shape_str(t.shape()) + ", spec expects " +
                                      shape_str(net.weights()[i].shape()));
                net.weights()[i] = t.clone();
                found = true;
                break;
            }
        }
        if (!found) throw FormatError("checkpoint is missing tensor " + name);
    }
    net.bump_version();
    return net;
}

}  // namespace cgtex
