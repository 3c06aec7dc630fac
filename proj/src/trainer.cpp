#include "cgtex/trainer.hpp"

#include <cstdio>
#include <fstream>

namespace cgtex {

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "c-cgcnn") return TrainMode::c_cgcnn;
    if (s == "f-cgcnn") return TrainMode::f_cgcnn;
    if (s == "fixed-d") return TrainMode::fixed_d;
    throw ContractError("unknown training mode: " + s);
}

std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::c_cgcnn: return "c-cgcnn";
        case TrainMode::f_cgcnn: return "f-cgcnn";
        case TrainMode::fixed_d: return "fixed-d";
    }
    return "?";
}

double d_learning_step(EnergyNet& net, OptimizerState& opt,
                       const std::vector<Tensor>& samples, const Tensor& f0_data,
                       std::vector<double>* per_sample_energy) {
    if (samples.empty()) throw ContractError("d_learning_step: needs at least one sample");
    Tape tape;
    std::vector<Tensor> watched;
    watched.reserve(net.weights().size());
    for (const Tensor& w : net.weights()) watched.push_back(tape.watch(w));

    Tensor loss;
    if (per_sample_energy) per_sample_energy->clear();
    for (size_t k = 0; k < samples.size(); ++k) {
        Tensor e = energy_pair_expr(net.spec(), watched, samples[k], f0_data);
        if (per_sample_energy) per_sample_energy->push_back(e.item());
        loss = k == 0 ? e : add(loss, e);
    }
    loss = scale_shift(loss, 1.0f / static_cast<float>(samples.size()), 0.0f);
    const double mean_energy = loss.item();

    Gradients gr = tape.backward(loss);
    // ascent on the mean sample energy: feed the optimizer the negated gradient
    std::vector<Tensor> neg_grads;
    neg_grads.reserve(watched.size());
    for (const Tensor& w : watched) {
        Tensor g = gr.grad(w).clone();
        float* p = g.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) p[i] = -p[i];
        neg_grads.push_back(std::move(g));
    }
    optimizer_step(opt, net.weights(), neg_grads);
    net.bump_version();
    net.update_count += 1;
    return mean_energy;
}

double kle(const std::vector<Tensor>& samples) {
    if (samples.size() < 2) throw ContractError("kle: needs at least two samples");
    double total = 0.0;
    for (size_t i = 0; i < samples.size(); ++i)
        for (size_t j = i + 1; j < samples.size(); ++j)
            total += frob_diff(samples[i], samples[j]).item();
    return total;
}

double g_learning_step(GeneratorNet& gen, OptimizerState& opt, const EnergyNet& net,
                       const LayerStats& f0_stats, const std::vector<NoisePyramid>& noises,
                       float kle_weight) {
    if (noises.empty()) throw ContractError("g_learning_step: needs at least one noise draw");
    if (kle_weight != 0.0f && noises.size() < 2)
        throw ContractError("g_learning_step: the entropy term needs at least two samples");
    if (f0_stats.weights_version != net.weights_version())
        throw ContractError("g_learning_step: exemplar statistics are stale");

    Tape tape;
    std::vector<Tensor> watched;
    watched.reserve(gen.weights().size());
    for (const Tensor& w : gen.weights()) watched.push_back(tape.watch(w));

    std::vector<Tensor> generated;
    generated.reserve(noises.size());
    for (const NoisePyramid& z : noises)
        generated.push_back(generate_expr(gen.spec(), watched, z));

    Tensor energy_sum;
    for (size_t k = 0; k < generated.size(); ++k) {
        Tensor e = energy_expr(net.spec(), net.weights(), generated[k], f0_stats);
        energy_sum = k == 0 ? e : add(energy_sum, e);
    }
    Tensor loss = scale_shift(energy_sum, 1.0f / static_cast<float>(generated.size()), 0.0f);
    const double mean_energy = loss.item();

    if (kle_weight != 0.0f) {
        Tensor entropy;
        bool first = true;
        for (size_t i = 0; i < generated.size(); ++i)
            for (size_t j = i + 1; j < generated.size(); ++j) {
                Tensor d = frob_diff(generated[i], generated[j]);
                entropy = first ? d : add(entropy, d);
                first = false;
            }
        loss = add(loss, scale_shift(entropy, -kle_weight, 0.0f));
    }

    Gradients gr = tape.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(watched.size());
    for (const Tensor& w : watched) grads.push_back(gr.grad(w));
    optimizer_step(opt, gen.weights(), grads);
    gen.update_count += 1;
    return mean_energy;
}

namespace {

void check_common(const TrainConfig& cfg) {
    if (cfg.iterations < 1) throw ContractError("training needs T >= 1 iterations");
    if (cfg.batch < 1) throw ContractError("training needs K >= 1 samples");
}

TrainResult run_chain_loop(const TextureExemplar& f0, const NetworkSpec& spec,
                           const TrainConfig& cfg, bool learn_d) {
    check_common(cfg);
    spec.validate_for(f0.data.shape());

    TrainResult result;
    result.net = EnergyNet(spec, substream(cfg.seed, 1));

    std::vector<ChainState> chains;
    for (int k = 0; k < cfg.batch; ++k) {
        Tensor init = gaussian_noise(f0.data.shape(), cfg.init_noise_std,
                                     substream(cfg.seed, 100 + k));
        chains.emplace_back(std::move(init), cfg.sampler, substream(cfg.seed, 200 + k));
    }

    OptimizerState w_opt;
    w_opt.kind = cfg.weight_optimizer;
    w_opt.lr = cfg.lr_w;

    LayerStats stats = exemplar_stats(result.net, f0.data);
    std::vector<Tensor> samples(cfg.batch);
    std::vector<double> energies(cfg.batch);

    for (int t = 1; t <= cfg.iterations; ++t) {
        for (int k = 0; k < cfg.batch; ++k)
            langevin_run(chains[k], result.net, stats, cfg.sampler);
        for (int k = 0; k < cfg.batch; ++k) samples[k] = chains[k].sample.detached();

        if (learn_d) {
            // the pair expression values double as the post-sampling energies
            d_learning_step(result.net, w_opt, samples, f0.data, &energies);
            stats = exemplar_stats(result.net, f0.data);
        } else {
            for (int k = 0; k < cfg.batch; ++k)
                energies[k] = energy_value(result.net, samples[k], stats);
        }
        for (int k = 0; k < cfg.batch; ++k) result.trace.push_back({t, k, energies[k]});
        if (cfg.progress) {
            double mean = 0.0;
            for (double e : energies) mean += e;
            cfg.progress(t, mean / cfg.batch);
        }

        if (cfg.snapshot_interval > 0 && cfg.snapshot_hook && t % cfg.snapshot_interval == 0)
            cfg.snapshot_hook(t, samples);
    }

    result.samples = std::move(samples);
    return result;
}

std::vector<int> generation_extents(const TextureExemplar& f0) {
    std::vector<int> ext(f0.data.shape());
    if (f0.modality != Modality::sound) ext.pop_back();
    return ext;
}

}  // namespace

TrainResult train_c_cgcnn(const TextureExemplar& f0, const NetworkSpec& spec,
                          const TrainConfig& cfg) {
    if (cfg.mode != TrainMode::c_cgcnn)
        throw ContractError("train_c_cgcnn requires mode c-cgcnn");
    return run_chain_loop(f0, spec, cfg, /*learn_d=*/true);
}

TrainResult train_fixed_d(const TextureExemplar& f0, const NetworkSpec& spec,
                          const TrainConfig& cfg) {
    if (cfg.mode != TrainMode::fixed_d)
        throw ContractError("train_fixed_d requires mode fixed-d");
    return run_chain_loop(f0, spec, cfg, /*learn_d=*/false);
}

TrainResult train_f_cgcnn(const TextureExemplar& f0, const NetworkSpec& spec_d,
                          const GeneratorSpec& spec_g, const TrainConfig& cfg) {
    if (cfg.mode != TrainMode::f_cgcnn)
        throw ContractError("train_f_cgcnn requires mode f-cgcnn");
    check_common(cfg);
    if (cfg.batch < 2 && cfg.kle_weight != 0.0f)
        throw ContractError("f-cgcnn needs K >= 2 for the entropy term");
    spec_d.validate_for(f0.data.shape());

    TrainResult result;
    result.net = EnergyNet(spec_d, substream(cfg.seed, 1));
    result.gen = GeneratorNet(spec_g, substream(cfg.seed, 2));

    OptimizerState w_opt;
    w_opt.kind = cfg.weight_optimizer;
    w_opt.lr = cfg.lr_w;
    OptimizerState g_opt;
    g_opt.kind = cfg.weight_optimizer;
    g_opt.lr = cfg.lr_theta;

    const std::vector<int> extents = generation_extents(f0);
    Rng noise_rng(substream(cfg.seed, 300));
    std::vector<double> energies;

    for (int t = 1; t <= cfg.iterations; ++t) {
        // G-synthesis: K fresh noises per iteration
        std::vector<NoisePyramid> noises;
        noises.reserve(cfg.batch);
        for (int k = 0; k < cfg.batch; ++k)
            noises.push_back(sample_noise(spec_g, extents, noise_rng));
        std::vector<Tensor> samples;
        samples.reserve(cfg.batch);
        for (const NoisePyramid& z : noises)
            samples.push_back(generate(result.gen, z).detached());

        // D-learning on the generated batch, then G-learning under the new w
        d_learning_step(result.net, w_opt, samples, f0.data, &energies);
        LayerStats stats = exemplar_stats(result.net, f0.data);
        g_learning_step(result.gen, g_opt, result.net, stats, noises, cfg.kle_weight);

        for (int k = 0; k < cfg.batch; ++k) result.trace.push_back({t, k, energies[k]});
        if (cfg.progress) {
            double mean = 0.0;
            for (double e : energies) mean += e;
            cfg.progress(t, mean / cfg.batch);
        }
        if (cfg.snapshot_interval > 0 && cfg.snapshot_hook && t % cfg.snapshot_interval == 0)
            cfg.snapshot_hook(t, samples);
    }

    // final samples from the trained generator
    for (int k = 0; k < cfg.batch; ++k) {
        NoisePyramid z = sample_noise(spec_g, extents, substream(cfg.seed, 400 + k));
        result.samples.push_back(generate(result.gen, z));
    }
    return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "iteration,chain,energy\n";
    char buf[64];
    for (const TraceRow& row : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.9g\n", row.iteration, row.chain, row.energy);
        f << buf;
    }
    if (!f) throw IoError("short write to " + path);
}

}  // namespace cgtex
