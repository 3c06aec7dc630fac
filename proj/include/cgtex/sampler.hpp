#pragma once

#include <cstdint>
#include <vector>

#include "cgtex/energy_model.hpp"
#include "cgtex/tensor.hpp"
#include "cgtex/texture_io.hpp"

namespace cgtex {

// Langevin dynamics over a synthesized texture:
//   f <- f - (eps^2/2) dE/df + eps N,   N ~ N(0, 1)
// In preconditioned mode the gradient term is replaced by one adam/rmsprop
// step at learning rate eps; the noise term is unchanged.
struct SamplerConfig {
    float step_size = 0.001f;                  // eps
    int steps = 10;                            // N per run
    bool noise = true;
    OptKind preconditioner = OptKind::adam;    // plain = bare Eq.-14 dynamics
    // When set, only entries inside the region update; the complement stays
    // bit-identical (inpainting restricts sampling to the corrupted region).
    const MaskRegion* update_region = nullptr;
};

// One chain: the evolving sample, its preconditioner state and noise stream.
struct ChainState {
    Tensor sample;
    OptimizerState opt;
    Rng rng;

    ChainState(Tensor initial, const SamplerConfig& cfg, std::uint64_t noise_seed)
        : sample(std::move(initial)), rng(noise_seed) {
        opt.kind = cfg.preconditioner;
        opt.lr = cfg.step_size;
    }
};

// The update rule alone, on a precomputed gradient. Masked-out entries keep
// their exact bit pattern (their gradient and noise are suppressed).
void apply_langevin_update(Tensor& sample, const Tensor& grad, OptimizerState& opt, Rng& rng,
                           const SamplerConfig& cfg);

// One step: evaluates E and dE/df at the current sample, applies the update,
// returns the pre-update energy.
double langevin_step(ChainState& chain, const EnergyNet& net, const LayerStats& f0_stats,
                     const SamplerConfig& cfg);

// cfg.steps sequential steps; returns the per-step energy trace.
std::vector<double> langevin_run(ChainState& chain, const EnergyNet& net,
                                 const LayerStats& f0_stats, const SamplerConfig& cfg);

}  // namespace cgtex
