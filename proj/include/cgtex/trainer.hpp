#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cgtex/energy_model.hpp"
#include "cgtex/generator.hpp"
#include "cgtex/sampler.hpp"
#include "cgtex/texture_io.hpp"

namespace cgtex {

enum class TrainMode { c_cgcnn, f_cgcnn, fixed_d };

TrainMode train_mode_from_string(const std::string& s);
std::string to_string(TrainMode m);

struct TrainConfig {
    TrainMode mode = TrainMode::c_cgcnn;
    int batch = 3;           // K samples per iteration
    int iterations = 5000;   // T
    SamplerConfig sampler;   // eps, N, noise, preconditioner
    OptKind weight_optimizer = OptKind::adam;
    float lr_w = 1e-3f;
    float lr_theta = 1e-3f;
    float init_noise_std = 0.1f;  // chains start as N(0, 0.01)
    float kle_weight = 1.0f;
    std::uint64_t seed = 0;
    int snapshot_interval = 0;  // 0 = no snapshots
    std::function<void(int iteration, const std::vector<Tensor>& samples)> snapshot_hook;
    std::function<void(int iteration, double mean_energy)> progress;
};

struct TraceRow {
    int iteration;
    int chain;
    double energy;  // measured after the sampling phase, before the D update
};

struct TrainResult {
    std::vector<Tensor> samples;
    EnergyNet net;
    GeneratorNet gen;  // f-cgCNN only
    std::vector<TraceRow> trace;
};

// One Monte-Carlo MLE step on w: ascent on the mean sample energy (the
// exemplar's own term has zero subgradient, so the data side contributes no
// gradient). Fills per_sample_energy with the pre-update energies when given.
double d_learning_step(EnergyNet& net, OptimizerState& opt,
                       const std::vector<Tensor>& samples, const Tensor& f0_data,
                       std::vector<double>* per_sample_energy = nullptr);

// Sum of pairwise Frobenius distances over unordered pairs i < j; the
// entropy surrogate for generator training. Requires at least two samples.
double kle(const std::vector<Tensor>& samples);

// One step on theta: descend mean generated-sample energy minus
// kle_weight * KLE. Requires two noise draws unless kle_weight is zero.
// Returns the mean generated-sample energy before the update.
double g_learning_step(GeneratorNet& gen, OptimizerState& opt, const EnergyNet& net,
                       const LayerStats& f0_stats, const std::vector<NoisePyramid>& noises,
                       float kle_weight);

// Alternating Langevin sampling and D-learning on persistent chains.
TrainResult train_c_cgcnn(const TextureExemplar& f0, const NetworkSpec& spec,
                          const TrainConfig& cfg);

// The same loop with D-learning disabled: optimization under a fixed random net.
TrainResult train_fixed_d(const TextureExemplar& f0, const NetworkSpec& spec,
                          const TrainConfig& cfg);

// G-synthesis / D-learning / G-learning with fresh noise each iteration.
TrainResult train_f_cgcnn(const TextureExemplar& f0, const NetworkSpec& spec_d,
                          const GeneratorSpec& spec_g, const TrainConfig& cfg);

// CSV rows "iteration,chain,energy".
void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace cgtex
