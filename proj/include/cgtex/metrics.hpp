#pragma once

#include <vector>

#include "cgtex/tensor.hpp"

namespace cgtex {

// Multi-scale structural similarity. Scales are compared on
// contrast-structure terms, the coarsest also on luminance; between scales
// the signal is 2x average-pooled. RGB inputs are converted to luma
// (0.299, 0.587, 0.114) first; sound applies the same machinery with the
// window along time.
struct MsSsimConfig {
    int scales = 5;
    std::vector<double> exponents = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    int window = 11;
    double window_sigma = 1.5;
    double c1 = 0.01 * 0.01;  // (0.01 L)^2, L = 1
    double c2 = 0.03 * 0.03;  // (0.03 L)^2

    // Largest feasible scale count for the given spatial extents (smallest
    // scale must still hold the window); truncated exponents renormalized to
    // sum 1.
    static MsSsimConfig for_extents(const std::vector<int>& extents);
};

// Score in [0,1] (clamped); symmetric; 1.0 for identical inputs. Accepts
// [H,W], [H,W,3] (luma-converted) or rank-1 sound tensors.
double ms_ssim(const Tensor& a, const Tensor& b, const MsSsimConfig& cfg);
double ms_ssim(const Tensor& a, const Tensor& b);  // auto-scaled config

// Frame-averaged variant for dynamic textures [H,W,T,3].
double ms_ssim_frames(const Tensor& a, const Tensor& b, const MsSsimConfig& cfg);
double ms_ssim_frames(const Tensor& a, const Tensor& b);

}  // namespace cgtex
