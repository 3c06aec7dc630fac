#include "cgtex/inpainting.hpp"

#include "cgtex/trainer.hpp"

namespace cgtex {

std::vector<int> default_grid_stride(Modality modality, int spatial_rank) {
    switch (modality) {
        case Modality::image: return std::vector<int>(spatial_rank, 8);
        case Modality::dynamic: return std::vector<int>(spatial_rank, 4);
        case Modality::sound: return std::vector<int>(spatial_rank, 500);
    }
    return std::vector<int>(spatial_rank, 1);
}

namespace {

std::int64_t prod(const std::vector<int>& v) {
    std::int64_t n = 1;
    for (int e : v) n *= e;
    return n;
}

// Crop a window of the exemplar's spatial/temporal domain; channels ride
// along. Sound data stays rank 1.
Tensor crop_window(const Tensor& data, const std::vector<int>& domain_ext,
                   const std::vector<int>& lo, const std::vector<int>& ext) {
    const int d = static_cast<int>(domain_ext.size());
    const std::int64_t channels = data.numel() / prod(domain_ext);
    std::vector<int> out_shape(ext);
    if (data.rank() != d) out_shape.push_back(static_cast<int>(channels));
    Tensor out{out_shape};

    std::vector<std::int64_t> in_stride(d);
    in_stride[d - 1] = channels;
    for (int a = d - 2; a >= 0; --a) in_stride[a] = in_stride[a + 1] * domain_ext[a + 1];

    const std::int64_t out_domain = prod(ext);
    for (std::int64_t of = 0; of < out_domain; ++of) {
        std::int64_t rem = of, in_off = 0;
        for (int a = d - 1; a >= 0; --a) {
            const int c = static_cast<int>(rem % ext[a]);
            rem /= ext[a];
            in_off += static_cast<std::int64_t>(lo[a] + c) * in_stride[a];
        }
        for (std::int64_t ch = 0; ch < channels; ++ch)
            out.data()[of * channels + ch] = data.data()[in_off + ch];
    }
    return out;
}

// Writes the window's corrupted entries back into the full tensor.
void write_corrupted(Tensor* dst, const std::vector<int>& domain_ext,
                     const std::vector<int>& lo, const MaskRegion& window_mask,
                     const Tensor& window) {
    const int d = static_cast<int>(domain_ext.size());
    const std::int64_t channels = dst->numel() / prod(domain_ext);
    std::vector<std::int64_t> in_stride(d);
    in_stride[d - 1] = channels;
    for (int a = d - 2; a >= 0; --a) in_stride[a] = in_stride[a + 1] * domain_ext[a + 1];

    const std::int64_t win_domain = window_mask.domain_size();
    for (std::int64_t wf = 0; wf < win_domain; ++wf) {
        if (!window_mask.corrupted[wf]) continue;
        std::int64_t rem = wf, in_off = 0;
        for (int a = d - 1; a >= 0; --a) {
            const int c = static_cast<int>(rem % window_mask.extents[a]);
            rem /= window_mask.extents[a];
            in_off += static_cast<std::int64_t>(lo[a] + c) * in_stride[a];
        }
        for (std::int64_t ch = 0; ch < channels; ++ch)
            dst->data()[in_off + ch] = window.data()[wf * channels + ch];
    }
}

bool window_intersects_omega(const MaskRegion& region, const std::vector<int>& off,
                             const std::vector<int>& ext) {
    const int d = static_cast<int>(region.extents.size());
    std::vector<std::int64_t> stride(d);
    stride[d - 1] = 1;
    for (int a = d - 2; a >= 0; --a) stride[a] = stride[a + 1] * region.extents[a + 1];
    const std::int64_t n = prod(ext);
    for (std::int64_t f = 0; f < n; ++f) {
        std::int64_t rem = f, flat = 0;
        for (int a = d - 1; a >= 0; --a) {
            const int c = static_cast<int>(rem % ext[a]);
            rem /= ext[a];
            flat += static_cast<std::int64_t>(off[a] + c) * stride[a];
        }
        if (region.corrupted[flat]) return true;
    }
    return false;
}

}  // namespace

TemplateMatch template_search(const Tensor& current, const MaskRegion& region,
                              const EnergyNet& net, const std::vector<int>& grid_stride) {
    const int d = static_cast<int>(region.extents.size());
    if (static_cast<int>(grid_stride.size()) != d)
        throw ContractError("grid stride needs one entry per axis");
    for (int s : grid_stride)
        if (s < 1) throw ContractError("grid stride entries must be >= 1");

    std::vector<int> lo, hi;
    region.closure_bbox(&lo, &hi);
    std::vector<int> ext(d);
    for (int a = 0; a < d; ++a) ext[a] = hi[a] - lo[a];

    const Tensor window = crop_window(current, region.extents, lo, ext);
    const LayerStats ref = exemplar_stats(net, window);

    // grid offsets per axis: 0, stride, 2*stride, ...
    std::vector<int> counts(d);
    for (int a = 0; a < d; ++a) {
        const int room = region.extents[a] - ext[a];
        if (room < 0)
            throw ContractError("closure extents exceed the exemplar domain");
        counts[a] = room / grid_stride[a] + 1;
    }

    TemplateMatch best;
    bool found = false;
    std::vector<int> off(d);
    const std::int64_t total = prod(counts);
    for (std::int64_t c = 0; c < total; ++c) {
        std::int64_t rem = c;
        for (int a = d - 1; a >= 0; --a) {
            off[a] = static_cast<int>(rem % counts[a]) * grid_stride[a];
            rem /= counts[a];
        }
        if (window_intersects_omega(region, off, ext)) continue;
        const Tensor candidate = crop_window(current, region.extents, off, ext);
        const double e = energy_value(net, candidate, ref);
        if (!found || e < best.energy) {  // first candidate wins ties
            best.offset = off;
            best.extents = ext;
            best.energy = e;
            found = true;
        }
    }
    if (!found)
        throw ContractError(
            "no candidate patch avoids the corrupted region; reduce the border width or "
            "supply a template");
    return best;
}

InpaintResult inpaint(const TextureExemplar& corrupted, const MaskRegion& region,
                      const InpaintConfig& cfg) {
    if (cfg.search_steps < 1 || cfg.update_steps < 1)
        throw ContractError("inpainting needs search steps T >= 1 and update steps S >= 1");
    if (corrupted.data.numel() % region.domain_size() != 0)
        throw ContractError("mask extents do not match the exemplar");

    const int d = static_cast<int>(region.extents.size());
    std::vector<int> grid = cfg.grid_stride.empty()
                                ? default_grid_stride(corrupted.modality, d)
                                : cfg.grid_stride;

    InpaintResult result;
    result.output = apply_mask(corrupted.data, region);

    std::vector<int> lo, hi;
    region.closure_bbox(&lo, &hi);
    std::vector<int> ext(d);
    for (int a = 0; a < d; ++a) ext[a] = hi[a] - lo[a];

    // corrupted flags restricted to the closure window
    std::vector<std::uint8_t> win_flags(prod(ext));
    {
        std::vector<std::int64_t> stride(d);
        stride[d - 1] = 1;
        for (int a = d - 2; a >= 0; --a) stride[a] = stride[a + 1] * region.extents[a + 1];
        for (std::int64_t f = 0; f < static_cast<std::int64_t>(win_flags.size()); ++f) {
            std::int64_t rem = f, flat = 0;
            for (int a = d - 1; a >= 0; --a) {
                const int c = static_cast<int>(rem % ext[a]);
                rem /= ext[a];
                flat += static_cast<std::int64_t>(lo[a] + c) * stride[a];
            }
            win_flags[f] = region.corrupted[flat];
        }
    }
    const MaskRegion window_mask = make_mask(ext, std::move(win_flags), 0);

    Tensor window0 = crop_window(result.output, region.extents, lo, ext);
    cfg.spec.validate_for(window0.shape());
    result.net = EnergyNet(cfg.spec, substream(cfg.seed, 3));

    SamplerConfig sampler = cfg.sampler;
    sampler.update_region = &window_mask;
    ChainState chain(window0, sampler, substream(cfg.seed, 5));

    OptimizerState w_opt;
    w_opt.kind = cfg.weight_optimizer;
    w_opt.lr = cfg.lr_w;

    for (int t = 1; t <= cfg.search_steps; ++t) {
        TemplateMatch match;
        if (cfg.template_offset) {
            match.offset = *cfg.template_offset;
            match.extents = ext;
            if (static_cast<int>(match.offset.size()) != d)
                throw ContractError("template offset needs one entry per axis");
            for (int a = 0; a < d; ++a)
                if (match.offset[a] < 0 || match.offset[a] + ext[a] > region.extents[a])
                    throw ContractError("template window falls outside the exemplar");
            if (window_intersects_omega(region, match.offset, ext))
                throw ContractError("template window overlaps the corrupted region");
        } else {
            match = template_search(result.output, region, result.net, grid);
        }

        const Tensor tmpl = crop_window(result.output, region.extents, match.offset, ext);
        LayerStats stats = exemplar_stats(result.net, tmpl);
        if (cfg.template_offset)
            match.energy = energy_value(result.net, chain.sample, stats);
        result.templates.push_back(match);
        result.start_energies.push_back(energy_value(result.net, chain.sample, stats));

        for (int s = 1; s <= cfg.update_steps; ++s) {
            langevin_run(chain, result.net, stats, sampler);
            d_learning_step(result.net, w_opt, {chain.sample.detached()}, tmpl);
            stats = exemplar_stats(result.net, tmpl);
        }
        result.final_energies.push_back(energy_value(result.net, chain.sample, stats));
        write_corrupted(&result.output, region.extents, lo, window_mask, chain.sample);
    }
    return result;
}

}  // namespace cgtex
