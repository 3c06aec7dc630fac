#include "cgtex/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace cgtex {

namespace {

// Working signal: doubles over 1-D or 2-D extents.
struct Signal {
    std::vector<int> ext;  // 1 or 2 entries
    std::vector<double> v;
    std::int64_t size() const {
        std::int64_t n = 1;
        for (int e : ext) n *= e;
        return n;
    }
};

Signal to_signal(const Tensor& t) {
    Signal s;
    if (t.rank() == 1) {
        s.ext = {t.shape()[0]};
        s.v.resize(t.numel());
        for (std::int64_t i = 0; i < t.numel(); ++i) s.v[i] = t.data()[i];
    } else if (t.rank() == 2) {
        s.ext = {t.shape()[0], t.shape()[1]};
        s.v.resize(t.numel());
        for (std::int64_t i = 0; i < t.numel(); ++i) s.v[i] = t.data()[i];
    } else if (t.rank() == 3 && t.shape()[2] == 3) {
        s.ext = {t.shape()[0], t.shape()[1]};
        s.v.resize(s.size());
        const float* p = t.data();
        for (std::int64_t i = 0; i < s.size(); ++i)
            s.v[i] = 0.299 * p[3 * i] + 0.587 * p[3 * i + 1] + 0.114 * p[3 * i + 2];
    } else {
        throw ContractError("ms_ssim expects [H,W], [H,W,3] or a rank-1 sound tensor, got " +
                            shape_str(t.shape()));
    }
    return s;
}

std::vector<double> gaussian_window(int taps, double sigma) {
    std::vector<double> w(taps);
    const double mid = (taps - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < taps; ++i) {
        const double d = (i - mid) / sigma;
        w[i] = std::exp(-0.5 * d * d);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

// Separable valid-window filtering along every axis.
Signal filter_valid(const Signal& in, const std::vector<double>& win) {
    const int taps = static_cast<int>(win.size());
    Signal cur = in;
    for (size_t axis = 0; axis < in.ext.size(); ++axis) {
        Signal next;
        next.ext = cur.ext;
        next.ext[axis] = cur.ext[axis] - taps + 1;
        next.v.resize(next.size());
        const int d = static_cast<int>(cur.ext.size());
        const std::int64_t stride = axis + 1 < static_cast<size_t>(d)
                                        ? static_cast<std::int64_t>(cur.ext[1])
                                        : 1;
        // iterate output coordinates; only the filtered axis shrinks
        const int oh = next.ext[0];
        const int ow = d == 2 ? next.ext[1] : 1;
        const std::int64_t row = d == 2 ? cur.ext[1] : 1;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const std::int64_t base = static_cast<std::int64_t>(y) * row + x;
                double acc = 0.0;
                for (int k = 0; k < taps; ++k) acc += win[k] * cur.v[base + k * stride];
                next.v[static_cast<std::int64_t>(y) * ow + x] = acc;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

Signal downsample2(const Signal& in) {
    Signal out;
    out.ext = in.ext;
    for (int& e : out.ext) e /= 2;
    out.v.resize(out.size());
    if (in.ext.size() == 1) {
        for (int i = 0; i < out.ext[0]; ++i)
            out.v[i] = 0.5 * (in.v[2 * i] + in.v[2 * i + 1]);
    } else {
        const int w = in.ext[1];
        for (int y = 0; y < out.ext[0]; ++y)
            for (int x = 0; x < out.ext[1]; ++x)
                out.v[static_cast<std::int64_t>(y) * out.ext[1] + x] =
                    0.25 * (in.v[static_cast<std::int64_t>(2 * y) * w + 2 * x] +
                            in.v[static_cast<std::int64_t>(2 * y) * w + 2 * x + 1] +
                            in.v[static_cast<std::int64_t>(2 * y + 1) * w + 2 * x] +
                            in.v[static_cast<std::int64_t>(2 * y + 1) * w + 2 * x + 1]);
    }
    return out;
}

struct ScaleScore {
    double cs = 0.0;
    double ssim = 0.0;  // luminance * cs, used at the coarsest scale
};

ScaleScore scale_score(const Signal& a, const Signal& b, const MsSsimConfig& cfg) {
    const std::vector<double> win = gaussian_window(cfg.window, cfg.window_sigma);
    Signal mu_a = filter_valid(a, win);
    Signal mu_b = filter_valid(b, win);

    Signal aa = a, bb = b, ab = a;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        aa.v[i] = a.v[i] * a.v[i];
        bb.v[i] = b.v[i] * b.v[i];
        ab.v[i] = a.v[i] * b.v[i];
    }
    Signal mu_aa = filter_valid(aa, win);
    Signal mu_bb = filter_valid(bb, win);
    Signal mu_ab = filter_valid(ab, win);

    double cs_sum = 0.0, ssim_sum = 0.0;
    const std::int64_t n = mu_a.size();
    for (std::int64_t i = 0; i < n; ++i) {
        const double ma = mu_a.v[i], mb = mu_b.v[i];
        const double va = mu_aa.v[i] - ma * ma;
        const double vb = mu_bb.v[i] - mb * mb;
        const double cov = mu_ab.v[i] - ma * mb;
        const double cs = (2.0 * cov + cfg.c2) / (va + vb + cfg.c2);
        const double lum = (2.0 * ma * mb + cfg.c1) / (ma * ma + mb * mb + cfg.c1);
        cs_sum += cs;
        ssim_sum += lum * cs;
    }
    return {cs_sum / n, ssim_sum / n};
}

}  // namespace

MsSsimConfig MsSsimConfig::for_extents(const std::vector<int>& extents) {
    MsSsimConfig cfg;
    int min_ext = extents.empty() ? 0 : extents[0];
    for (int e : extents) min_ext = std::min(min_ext, e);
    int scales = 0;
    while (scales < 5 && min_ext >= cfg.window * (1 << scales)) ++scales;
    scales = std::max(scales, 1);
    if (scales < cfg.scales) {
        cfg.exponents.resize(scales);
        double sum = 0.0;
        for (double w : cfg.exponents) sum += w;
        for (double& w : cfg.exponents) w /= sum;
        cfg.scales = scales;
    }
    return cfg;
}

double ms_ssim(const Tensor& a, const Tensor& b, const MsSsimConfig& cfg) {
    if (!a.same_shape(b))
        throw ContractError("ms_ssim: shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    if (cfg.scales < 1 || static_cast<int>(cfg.exponents.size()) != cfg.scales)
        throw ContractError("ms_ssim: exponent count must equal the scale count");
    double esum = 0.0;
    for (double w : cfg.exponents) esum += w;
    // the published five-scale exponents sum to 1.0001 as printed
    if (std::abs(esum - 1.0) > 2e-4)
        throw ContractError("ms_ssim: exponents must sum to 1");

    Signal sa = to_signal(a);
    Signal sb = to_signal(b);
    const int min_size = cfg.window * (1 << (cfg.scales - 1));
    for (int e : sa.ext)
        if (e < min_size)
            throw ContractError("ms_ssim: input extent " + std::to_string(e) +
                                " below the minimum " + std::to_string(min_size) + " for " +
                                std::to_string(cfg.scales) + " scales");

    double score = 1.0;
    for (int j = 0; j < cfg.scales; ++j) {
        ScaleScore s = scale_score(sa, sb, cfg);
        const bool coarsest = j == cfg.scales - 1;
        double base = coarsest ? s.ssim : s.cs;
        base = std::clamp(base, 0.0, 1.0);
        score *= std::pow(base, cfg.exponents[j]);
        if (!coarsest) {
            sa = downsample2(sa);
            sb = downsample2(sb);
        }
    }
    return std::clamp(score, 0.0, 1.0);
}

double ms_ssim(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ContractError("ms_ssim: shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    std::vector<int> ext(a.shape());
    if (a.rank() == 3) ext.pop_back();
    return ms_ssim(a, b, MsSsimConfig::for_extents(ext));
}

double ms_ssim_frames(const Tensor& a, const Tensor& b, const MsSsimConfig& cfg) {
    if (!a.same_shape(b))
        throw ContractError("ms_ssim_frames: shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    if (a.rank() != 4 || a.shape()[3] != 3)
        throw ContractError("ms_ssim_frames expects HxWxTx3, got " + shape_str(a.shape()));
    const int h = a.shape()[0], w = a.shape()[1], frames = a.shape()[2];
    Tensor fa({h, w, 3}), fb({h, w, 3});
    double sum = 0.0;
    for (int t = 0; t < frames; ++t) {
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i)
            for (int c = 0; c < 3; ++c) {
                fa.data()[i * 3 + c] = a.data()[(i * frames + t) * 3 + c];
                fb.data()[i * 3 + c] = b.data()[(i * frames + t) * 3 + c];
            }
        sum += ms_ssim(fa, fb, cfg);
    }
    return sum / frames;
}

double ms_ssim_frames(const Tensor& a, const Tensor& b) {
    if (a.rank() != 4) throw ContractError("ms_ssim_frames expects HxWxTx3");
    return ms_ssim_frames(a, b, MsSsimConfig::for_extents({a.shape()[0], a.shape()[1]}));
}

}  // namespace cgtex
