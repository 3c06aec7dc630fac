#pragma once

// Shared helpers for the unit tests: random tensors, finite-difference
// gradients and the naive convolution reference. Everything here evaluates
// forward passes only; nothing reuses the tape machinery it checks.

#include <cmath>
#include <functional>
#include <vector>

#include "cgtex/rng.hpp"
#include "cgtex/tensor.hpp"

namespace testutil {

inline cgtex::Tensor random_tensor(const std::vector<int>& shape, cgtex::Rng& rng,
                                   double lo = -1.0, double hi = 1.0) {
    cgtex::Tensor t(shape);
    float* p = t.data();
    for (std::int64_t i = 0; i < t.numel(); ++i)
        p[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// Central finite difference of a scalar function w.r.t. args[which][i].
inline double fd_component(const std::function<double(const std::vector<cgtex::Tensor>&)>& f,
                           const std::vector<cgtex::Tensor>& args, size_t which,
                           std::int64_t i, double h = 1e-3) {
    std::vector<cgtex::Tensor> hi_args, lo_args;
    for (size_t k = 0; k < args.size(); ++k) {
        hi_args.push_back(args[k].clone());
        lo_args.push_back(args[k].clone());
    }
    hi_args[which].data()[i] += static_cast<float>(h);
    lo_args[which].data()[i] -= static_cast<float>(h);
    return (f(hi_args) - f(lo_args)) / (2.0 * h);
}

// Relative error < tol, with an absolute escape at the float32 noise level:
// a central difference of a float32-valued function of magnitude `scale`
// carries ~eps32*scale/(2h) of quantization noise, so components below that
// cannot be resolved by the oracle no matter how exact the gradient is.
inline bool grad_close(double analytic, double fd, double scale = 1.0, double tol = 1e-3) {
    const double rel = std::abs(analytic - fd) / std::max(std::abs(analytic) + std::abs(fd), 1e-12);
    if (rel < tol) return true;
    const double noise = 6e-4 * std::max(1.0, std::abs(scale));
    return std::abs(analytic - fd) < noise;
}

// Reference convolution: nothing shared with the library implementation.
// input [s..., cin], kernel [k..., cin, cout], zero padding.
inline cgtex::Tensor naive_conv(const cgtex::Tensor& input, const cgtex::Tensor& kernel,
                                std::vector<int> stride = {}, std::vector<int> dilation = {},
                                std::vector<int> pad = {}) {
    const int d = input.rank() - 1;
    std::vector<int> in_ext(input.shape().begin(), input.shape().end() - 1);
    std::vector<int> k_ext(kernel.shape().begin(), kernel.shape().end() - 2);
    const int cin = input.shape().back();
    const int cout = kernel.shape().back();
    if (stride.empty()) stride.assign(d, 1);
    if (dilation.empty()) dilation.assign(d, 1);
    if (pad.empty()) pad.assign(d, 0);

    std::vector<int> out_ext(d);
    for (int a = 0; a < d; ++a)
        out_ext[a] = (in_ext[a] + 2 * pad[a] - dilation[a] * (k_ext[a] - 1) - 1) / stride[a] + 1;

    std::vector<int> out_shape(out_ext);
    out_shape.push_back(cout);
    cgtex::Tensor out(out_shape);

    std::int64_t out_spatial = 1, k_spatial = 1;
    for (int a = 0; a < d; ++a) {
        out_spatial *= out_ext[a];
        k_spatial *= k_ext[a];
    }
    for (std::int64_t of = 0; of < out_spatial; ++of) {
        int oc[3] = {0, 0, 0};
        std::int64_t rem = of;
        for (int a = d - 1; a >= 0; --a) {
            oc[a] = static_cast<int>(rem % out_ext[a]);
            rem /= out_ext[a];
        }
        for (int co = 0; co < cout; ++co) {
            double acc = 0.0;
            for (std::int64_t kf = 0; kf < k_spatial; ++kf) {
                int kc[3] = {0, 0, 0};
                std::int64_t krem = kf;
                for (int a = d - 1; a >= 0; --a) {
                    kc[a] = static_cast<int>(krem % k_ext[a]);
                    krem /= k_ext[a];
                }
                bool inside = true;
                std::int64_t in_flat = 0;
                for (int a = 0; a < d; ++a) {
                    const int c = oc[a] * stride[a] - pad[a] + kc[a] * dilation[a];
                    if (c < 0 || c >= in_ext[a]) {
                        inside = false;
                        break;
                    }
                    in_flat = in_flat * in_ext[a] + c;
                }
                if (!inside) continue;
                for (int ci = 0; ci < cin; ++ci) {
                    std::int64_t w_flat = (kf * cin + ci) * cout + co;
                    acc += static_cast<double>(input.data()[in_flat * cin + ci]) *
                           static_cast<double>(kernel.data()[w_flat]);
                }
            }
            out.data()[of * cout + co] = static_cast<float>(acc);
        }
    }
    return out;
}

// Reference conv gradients in double precision: scatter loops over output
// positions, independent of the tape implementation.
inline void naive_conv_grads(const cgtex::Tensor& input, const cgtex::Tensor& kernel,
                             const cgtex::Tensor& gout, cgtex::Tensor* gx, cgtex::Tensor* gk,
                             std::vector<int> stride = {}, std::vector<int> dilation = {},
                             std::vector<int> pad = {}) {
    const int d = input.rank() - 1;
    std::vector<int> in_ext(input.shape().begin(), input.shape().end() - 1);
    std::vector<int> k_ext(kernel.shape().begin(), kernel.shape().end() - 2);
    const int cin = input.shape().back();
    const int cout = kernel.shape().back();
    if (stride.empty()) stride.assign(d, 1);
    if (dilation.empty()) dilation.assign(d, 1);
    if (pad.empty()) pad.assign(d, 0);
    std::vector<int> out_ext(gout.shape().begin(), gout.shape().end() - 1);

    std::vector<double> ax(input.numel(), 0.0), ak(kernel.numel(), 0.0);
    std::int64_t out_spatial = 1, k_spatial = 1;
    for (int a = 0; a < d; ++a) out_spatial *= out_ext[a];
    for (int a = 0; a < d; ++a) k_spatial *= k_ext[a];
    for (std::int64_t of = 0; of < out_spatial; ++of) {
        int oc[3] = {0, 0, 0};
        std::int64_t rem = of;
        for (int a = d - 1; a >= 0; --a) {
            oc[a] = static_cast<int>(rem % out_ext[a]);
            rem /= out_ext[a];
        }
        for (std::int64_t kf = 0; kf < k_spatial; ++kf) {
            int kc[3] = {0, 0, 0};
            std::int64_t krem = kf;
            for (int a = d - 1; a >= 0; --a) {
                kc[a] = static_cast<int>(krem % k_ext[a]);
                krem /= k_ext[a];
            }
            bool inside = true;
            std::int64_t in_flat = 0;
            for (int a = 0; a < d; ++a) {
                const int c = oc[a] * stride[a] - pad[a] + kc[a] * dilation[a];
                if (c < 0 || c >= in_ext[a]) {
                    inside = false;
                    break;
                }
                in_flat = in_flat * in_ext[a] + c;
            }
            if (!inside) continue;
            for (int ci = 0; ci < cin; ++ci) {
                for (int co = 0; co < cout; ++co) {
                    const double go = gout.data()[of * cout + co];
                    const std::int64_t w_flat = (kf * cin + ci) * cout + co;
                    ax[in_flat * cin + ci] += go * kernel.data()[w_flat];
                    ak[w_flat] += go * input.data()[in_flat * cin + ci];
                }
            }
        }
    }
    *gx = cgtex::Tensor(input.shape());
    *gk = cgtex::Tensor(kernel.shape());
    for (std::int64_t i = 0; i < gx->numel(); ++i) gx->data()[i] = static_cast<float>(ax[i]);
    for (std::int64_t i = 0; i < gk->numel(); ++i) gk->data()[i] = static_cast<float>(ak[i]);
}

inline double max_abs_diff(const cgtex::Tensor& a, const cgtex::Tensor& b) {
    double m = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    return m;
}

inline bool bit_identical(const cgtex::Tensor& a, const cgtex::Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

}  // namespace testutil
