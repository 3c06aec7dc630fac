#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cgtex/energy_model.hpp"
#include "cgtex/sampler.hpp"
#include "cgtex/texture_io.hpp"

namespace cgtex {

// Alternating template search and masked synthesis over a corrupted region:
// each outer iteration picks the lowest-energy uncorrupted patch as the
// conditioning exemplar, then runs S rounds of Langevin sampling restricted
// to the region plus D-learning against that template.
struct InpaintConfig {
    int search_steps = 10;   // T outer iterations
    int update_steps = 50;   // S synthesis rounds per template
    SamplerConfig sampler;   // N Langevin steps per round, eps, preconditioner
    std::vector<int> grid_stride;  // per spatial axis; empty = modality default
    NetworkSpec spec;
    OptKind weight_optimizer = OptKind::adam;
    float lr_w = 1e-3f;
    // fixes the template instead of grid searching (the dynamic default)
    std::optional<std::vector<int>> template_offset;
    std::uint64_t seed = 0;
};

std::vector<int> default_grid_stride(Modality modality, int spatial_rank);

struct TemplateMatch {
    std::vector<int> offset;   // per-axis position inside the exemplar
    std::vector<int> extents;  // equals the closure bounding box extents
    double energy = 0.0;       // against the closure content at selection time
};

// Grid search over patches of the closure's extents lying entirely outside
// the corrupted region; the conditioning exemplar is the closure's current
// content. Ties break by row-major scan order, first candidate wins.
TemplateMatch template_search(const Tensor& current, const MaskRegion& region,
                              const EnergyNet& net, const std::vector<int>& grid_stride);

struct InpaintResult {
    Tensor output;
    EnergyNet net;
    std::vector<TemplateMatch> templates;  // one per outer iteration
    std::vector<double> start_energies;    // synthesis energy entering each iteration
    std::vector<double> final_energies;    // and leaving it
};

// The corrupted region is zeroed on entry; everything outside it is
// bit-identical between input and output.
InpaintResult inpaint(const TextureExemplar& corrupted, const MaskRegion& region,
                      const InpaintConfig& cfg);

}  // namespace cgtex
