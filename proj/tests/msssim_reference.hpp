#pragma once

// Independent MS-SSIM reference, written straight from the published
// formula with brute-force window loops. Shares nothing with the library
// implementation: its own luma conversion, Gaussian weights, per-position
// statistics and 2x pooling.

#include <cmath>
#include <vector>

#include "cgtex/tensor.hpp"

namespace msssim_ref {

struct Plane {
    int h = 0, w = 0;  // w = 1 for 1-D signals
    std::vector<double> v;
    double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

inline Plane plane_of(const cgtex::Tensor& t) {
    Plane p;
    if (t.rank() == 1) {
        p.h = t.shape()[0];
        p.w = 1;
        p.v.assign(t.data(), t.data() + t.numel());
    } else if (t.rank() == 2) {
        p.h = t.shape()[0];
        p.w = t.shape()[1];
        p.v.assign(t.data(), t.data() + t.numel());
    } else {
        p.h = t.shape()[0];
        p.w = t.shape()[1];
        p.v.resize(static_cast<size_t>(p.h) * p.w);
        for (size_t i = 0; i < p.v.size(); ++i)
            p.v[i] = 0.299 * t.data()[3 * i] + 0.587 * t.data()[3 * i + 1] +
                     0.114 * t.data()[3 * i + 2];
    }
    return p;
}

inline Plane halve(const Plane& in) {
    Plane out;
    out.h = in.h / 2;
    out.w = in.w == 1 ? 1 : in.w / 2;
    out.v.resize(static_cast<size_t>(out.h) * out.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            if (in.w == 1)
                out.v[y] = (in.at(2 * y, 0) + in.at(2 * y + 1, 0)) / 2.0;
            else
                out.v[static_cast<size_t>(y) * out.w + x] =
                    (in.at(2 * y, 2 * x) + in.at(2 * y, 2 * x + 1) + in.at(2 * y + 1, 2 * x) +
                     in.at(2 * y + 1, 2 * x + 1)) /
                    4.0;
        }
    return out;
}

// mean contrast-structure term and mean full SSIM term at one scale
inline void scale_terms(const Plane& a, const Plane& b, int window, double sigma, double c1,
                        double c2, double* mean_cs, double* mean_ssim) {
    const bool one_d = a.w == 1;
    const int wy = window;
    const int wx = one_d ? 1 : window;
    std::vector<double> g(static_cast<size_t>(wy) * wx);
    double gsum = 0.0;
    for (int i = 0; i < wy; ++i)
        for (int j = 0; j < wx; ++j) {
            const double dy = i - (wy - 1) / 2.0;
            const double dx = j - (wx - 1) / 2.0;
            g[static_cast<size_t>(i) * wx + j] =
                std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            gsum += g[static_cast<size_t>(i) * wx + j];
        }
    for (double& x : g) x /= gsum;

    const int oh = a.h - wy + 1;
    const int ow = one_d ? 1 : a.w - wx + 1;
    double cs_sum = 0.0, ssim_sum = 0.0;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
            for (int i = 0; i < wy; ++i)
                for (int j = 0; j < wx; ++j) {
                    const double wgt = g[static_cast<size_t>(i) * wx + j];
                    const double va = a.at(y + i, x + j);
                    const double vb = b.at(y + i, x + j);
                    ma += wgt * va;
                    mb += wgt * vb;
                    maa += wgt * va * va;
                    mbb += wgt * vb * vb;
                    mab += wgt * va * vb;
                }
            const double sa = maa - ma * ma;
            const double sb = mbb - mb * mb;
            const double sab = mab - ma * mb;
            const double cs = (2.0 * sab + c2) / (sa + sb + c2);
            const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            cs_sum += cs;
            ssim_sum += lum * cs;
        }
    *mean_cs = cs_sum / (static_cast<double>(oh) * ow);
    *mean_ssim = ssim_sum / (static_cast<double>(oh) * ow);
}

inline double ms_ssim(const cgtex::Tensor& ta, const cgtex::Tensor& tb, int scales,
                      const std::vector<double>& exponents, int window = 11,
                      double sigma = 1.5, double c1 = 1e-4, double c2 = 9e-4) {
    Plane a = plane_of(ta);
    Plane b = plane_of(tb);
    double score = 1.0;
    for (int j = 0; j < scales; ++j) {
        double cs, ssim;
        scale_terms(a, b, window, sigma, c1, c2, &cs, &ssim);
        double base = j == scales - 1 ? ssim : cs;
        if (base < 0.0) base = 0.0;
        if (base > 1.0) base = 1.0;
        score *= std::pow(base, exponents[j]);
        if (j != scales - 1) {
            a = halve(a);
            b = halve(b);
        }
    }
    return score < 0.0 ? 0.0 : (score > 1.0 ? 1.0 : score);
}

}  // namespace msssim_ref
