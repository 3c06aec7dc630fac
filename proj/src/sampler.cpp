#include "cgtex/sampler.hpp"

namespace cgtex {

void apply_langevin_update(Tensor& sample, const Tensor& grad, OptimizerState& opt, Rng& rng,
                           const SamplerConfig& cfg) {
    if (!sample.same_shape(grad))
        throw ContractError("langevin update: gradient shape mismatch");
    const std::int64_t n = sample.numel();

    Tensor g = grad;
    std::int64_t channels = 1;
    if (cfg.update_region != nullptr) {
        const std::int64_t domain = cfg.update_region->domain_size();
        if (n % domain != 0)
            throw ContractError("update region extents do not divide the sample shape");
        channels = n / domain;
        // Zeroing the frozen entries' gradient keeps both the plain and the
        // preconditioned update exactly zero there.
        g = grad.clone();
        for (std::int64_t f = 0; f < domain; ++f)
            if (!cfg.update_region->corrupted[f])
                for (std::int64_t c = 0; c < channels; ++c) g.data()[f * channels + c] = 0.0f;
    }

    if (cfg.preconditioner == OptKind::plain) {
        const double coeff = 0.5 * static_cast<double>(cfg.step_size) * cfg.step_size;
        float* p = sample.data();
        const float* gp = g.data();
        for (std::int64_t i = 0; i < n; ++i)
            p[i] = static_cast<float>(p[i] - coeff * gp[i]);
    } else {
        std::vector<Tensor> params{sample.detached()};
        optimizer_step(opt, params, {g});
    }

    if (cfg.noise) {
        // the draw count never depends on the mask, so streams stay aligned
        Tensor noise = gaussian_noise(sample.shape(), 1.0f, rng);
        float* p = sample.data();
        const float* np = noise.data();
        if (cfg.update_region == nullptr) {
            for (std::int64_t i = 0; i < n; ++i)
                p[i] = static_cast<float>(p[i] + static_cast<double>(cfg.step_size) * np[i]);
        } else {
            const std::int64_t domain = cfg.update_region->domain_size();
            for (std::int64_t f = 0; f < domain; ++f) {
                if (!cfg.update_region->corrupted[f]) continue;
                for (std::int64_t c = 0; c < channels; ++c) {
                    const std::int64_t i = f * channels + c;
                    p[i] = static_cast<float>(p[i] + static_cast<double>(cfg.step_size) * np[i]);
                }
            }
        }
    }
}

double langevin_step(ChainState& chain, const EnergyNet& net, const LayerStats& f0_stats,
                     const SamplerConfig& cfg) {
    if (f0_stats.weights_version != net.weights_version())
        throw ContractError("langevin_step: exemplar statistics are stale");
    Tape tape;
    Tensor fv = tape.watch(chain.sample);
    Tensor e = energy_expr(net.spec(), net.weights(), fv, f0_stats);
    const double e_val = e.item();
    Gradients gr = tape.backward(e);
    Tensor g = gr.grad(fv);
    if (!g.all_finite())
        throw InternalError(
            "non-finite energy gradient in Langevin step (bounded energy should prevent this)");
    apply_langevin_update(chain.sample, g, chain.opt, chain.rng, cfg);
    return e_val;
}

std::vector<double> langevin_run(ChainState& chain, const EnergyNet& net,
                                 const LayerStats& f0_stats, const SamplerConfig& cfg) {
    if (cfg.steps < 1) throw ContractError("langevin_run: steps must be >= 1");
    std::vector<double> trace;
    trace.reserve(cfg.steps);
    for (int i = 0; i < cfg.steps; ++i)
        trace.push_back(langevin_step(chain, net, f0_stats, cfg));
    return trace;
}

}  // namespace cgtex
