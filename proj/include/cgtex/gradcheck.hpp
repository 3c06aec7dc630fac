#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace cgtex {

struct GradCheckReport {
    int cases = 0;
    int components = 0;
    int kink_skips = 0;
    int failures = 0;
    std::vector<std::string> notes;  // first few failures, for diagnostics

    bool ok() const { return failures == 0; }
};

// Central-difference verification (h = 1e-3, relative error < 1e-3 with an
// absolute escape at the float32 noise floor) of every differentiable
// operation: 1/2/3-D convolution with stride and dilation, hard sigmoid,
// Gram and mean statistics, the Frobenius norm, the full conditional energy
// (both the sample and the weight path) and the generator blocks. Points
// where the difference interval straddles an activation kink are skipped.
GradCheckReport run_gradient_suite(std::uint64_t seed, int cases_per_op, std::ostream* log);

}  // namespace cgtex
