#include "cgtex/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "cgtex/parallel.hpp"

namespace cgtex {

// ---------------------------------------------------------------- Tensor

namespace {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
}

void validate_shape(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 5)
        throw ShapeError("tensor rank must be 1..5, got " + std::to_string(shape.size()));
    for (int e : shape)
        if (e <= 0)
            throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) {
    validate_shape(shape);
    shape_ = std::move(shape);
    data_ = std::make_shared<std::vector<float>>(shape_numel(shape_), 0.0f);
}

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape));
    std::fill(t.data_->begin(), t.data_->end(), value);
    return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> data) {
    validate_shape(shape);
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<float>>(std::move(data));
    return t;
}

Tensor Tensor::scalar(float value) { return from_data({1}, {value}); }

std::int64_t Tensor::numel() const { return data_ ? static_cast<std::int64_t>(data_->size()) : 0; }

float Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() requires a single-element tensor");
    return (*data_)[0];
}

float Tensor::at(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank()) throw ShapeError("at(): index rank mismatch");
    std::int64_t flat = 0;
    int a = 0;
    for (int i : idx) {
        if (i < 0 || i >= shape_[a]) throw ShapeError("at(): index out of range");
        flat = flat * shape_[a] + i;
        ++a;
    }
    return (*data_)[flat];
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<float>>(*data_);
    return t;
}

Tensor Tensor::detached() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    validate_shape(shape);
    if (shape_numel(shape) != numel())
        throw ShapeError("reshape from " + shape_str(shape_) + " to " + shape_str(shape) +
                         " changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

bool Tensor::all_finite() const {
    const float* p = data();
    std::int64_t n = numel();
    for (std::int64_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------- Tape

Tensor Tape::watch(const Tensor& t) {
    if (!t.defined()) throw ContractError("watch(): undefined tensor");
    Tensor v = t.detached();
    v.tape = this;
    v.node = record(t.shape(), nullptr);
    return v;
}

int Tape::record(const std::vector<int>& shape, Backprop fn) {
    if (used_) throw ContractError("tape already consumed by backward()");
    nodes_.push_back(Node{shape, std::move(fn)});
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buffer(int node_id, const std::vector<int>& shape) {
    Tensor& g = grads_[node_id];
    if (!g.defined()) g = Tensor(shape);
    return g;
}

Gradients Tape::backward(const Tensor& scalar_output) {
    if (scalar_output.tape != this || scalar_output.node < 0)
        throw ContractError("backward(): output was not recorded on this tape");
    if (scalar_output.numel() != 1)
        throw ContractError("backward(): output must be a scalar, got shape " +
                            shape_str(scalar_output.shape()));
    if (used_) throw ContractError("tape already consumed by backward()");
    used_ = true;
    grads_.assign(nodes_.size(), Tensor());
    grads_[scalar_output.node] = Tensor::scalar(1.0f);
    for (int id = scalar_output.node; id >= 0; --id) {
        if (!grads_[id].defined()) continue;
        if (nodes_[id].backprop) nodes_[id].backprop(*this, grads_[id]);
    }
    Gradients out;
    out.by_node_ = std::move(grads_);
    grads_.clear();
    return out;
}

Tensor Gradients::grad(const Tensor& t) const {
    if (t.node >= 0 && t.node < static_cast<int>(by_node_.size()) &&
        by_node_[t.node].defined()) {
        Tensor g = by_node_[t.node].detached();
        if (!g.same_shape(t))
            throw InternalError("gradient shape mismatch for node " + std::to_string(t.node));
        return g;
    }
    return Tensor(t.shape());  // constant or unreachable leaf: zeros
}

// ---------------------------------------------------------------- op plumbing

namespace {

Tape* pick_tape(std::initializer_list<const Tensor*> inputs) {
    Tape* t = nullptr;
    for (const Tensor* p : inputs) {
        if (p->tape != nullptr && p->node >= 0) {
            if (t != nullptr && t != p->tape)
                throw ContractError("operands were recorded on different tapes");
            t = p->tape;
        }
    }
    return t;
}

void add_into(float* dst, const float* src, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

// ---------------------------------------------------------------- convolution

struct ConvPlan {
    int d = 0;  // spatial rank
    int cin = 0, cout = 0;
    std::vector<int> in_ext, k_ext, out_ext;
    std::vector<int> stride, dil, pad;
    std::vector<std::int64_t> in_stride, out_stride;  // per spatial axis, in floats
    bool padded = false;
    std::int64_t in_spatial = 1, out_spatial = 1;
    struct Tap {
        std::int64_t in_off;  // offset inside the receptive window (unpadded use)
        std::int64_t w_off;
        int coord[3];
    };
    std::vector<Tap> taps;
};

std::vector<int> axis_param(const std::vector<int>& v, int d, int def, const char* what) {
    if (v.empty()) return std::vector<int>(d, def);
    if (static_cast<int>(v.size()) != d)
        throw ShapeError(std::string(what) + " must have one entry per spatial axis");
    for (int x : v)
        if (x < (def == 1 ? 1 : 0))
            throw ShapeError(std::string(what) + " entries out of range");
    return v;
}

ConvPlan make_conv_plan(const Tensor& input, const Tensor& kernel, const ConvGeom& geom) {
    ConvPlan p;
    if (input.rank() < 2 || input.rank() > 4)
        throw ShapeError("conv input must be [spatial..., channels] with 1..3 spatial axes, got " +
                         shape_str(input.shape()));
    p.d = input.rank() - 1;
    if (kernel.rank() != p.d + 2)
        throw ShapeError("conv kernel must be [kernel..., in_ch, out_ch]; got rank " +
                         std::to_string(kernel.rank()) + " for " + std::to_string(p.d) +
                         " spatial axes");
    p.in_ext.assign(input.shape().begin(), input.shape().end() - 1);
    p.k_ext.assign(kernel.shape().begin(), kernel.shape().end() - 2);
    p.cin = input.shape().back();
    if (kernel.shape()[p.d] != p.cin)
        throw ShapeError("conv kernel expects " + std::to_string(kernel.shape()[p.d]) +
                         " input channels, input has " + std::to_string(p.cin));
    p.cout = kernel.shape().back();
    p.stride = axis_param(geom.stride, p.d, 1, "stride");
    p.dil = axis_param(geom.dilation, p.d, 1, "dilation");
    p.pad = axis_param(geom.pad, p.d, 0, "padding");
    for (int a = 0; a < p.d; ++a)
        if (p.pad[a] > 0) p.padded = true;

    p.out_ext.resize(p.d);
    for (int a = 0; a < p.d; ++a) {
        std::int64_t span = static_cast<std::int64_t>(p.dil[a]) * (p.k_ext[a] - 1) + 1;
        std::int64_t padded_in = p.in_ext[a] + 2LL * p.pad[a];
        if (span > padded_in)
            throw ShapeError("kernel extent " + std::to_string(span) +
                             " (dilated) exceeds padded input extent " +
                             std::to_string(padded_in) + " on axis " + std::to_string(a));
        std::int64_t out = (padded_in - span) / p.stride[a] + 1;
        if (out < 1)
            throw ShapeError("degenerate geometry: zero output extent on axis " +
                             std::to_string(a));
        p.out_ext[a] = static_cast<int>(out);
    }

    p.in_stride.resize(p.d);
    p.out_stride.resize(p.d);
    p.in_stride[p.d - 1] = p.cin;
    p.out_stride[p.d - 1] = p.cout;
    for (int a = p.d - 2; a >= 0; --a) {
        p.in_stride[a] = p.in_stride[a + 1] * p.in_ext[a + 1];
        p.out_stride[a] = p.out_stride[a + 1] * p.out_ext[a + 1];
    }
    for (int a = 0; a < p.d; ++a) {
        p.in_spatial *= p.in_ext[a];
        p.out_spatial *= p.out_ext[a];
    }

    std::int64_t ktaps = 1;
    for (int a = 0; a < p.d; ++a) ktaps *= p.k_ext[a];
    p.taps.resize(ktaps);
    for (std::int64_t t = 0; t < ktaps; ++t) {
        std::int64_t rem = t;
        ConvPlan::Tap& tap = p.taps[t];
        tap.in_off = 0;
        for (int a = p.d - 1; a >= 0; --a) {
            int c = static_cast<int>(rem % p.k_ext[a]);
            rem /= p.k_ext[a];
            tap.coord[a] = c;
            tap.in_off += static_cast<std::int64_t>(c) * p.dil[a] * p.in_stride[a];
        }
        tap.w_off = t * p.cin * p.cout;
    }
    return p;
}

// Valid (unpadded) forward path. Output positions are independent; each is a
// fixed-order sum over taps and input channels, so thread count never
// changes results. Blocks of four outputs along the last axis share the
// kernel row loads.
void conv_fwd_nopad(const float* __restrict x, const float* __restrict w, float* __restrict y,
                    const ConvPlan& p) {
    const int cin = p.cin, cout = p.cout, d = p.d;
    const std::int64_t out_w = p.out_ext[d - 1];
    const std::int64_t outer = p.out_spatial / out_w;
    const std::int64_t jstep = static_cast<std::int64_t>(p.stride[d - 1]) * p.in_stride[d - 1];

    // Split the last axis as well when there are few leading rows (1-D case).
    std::int64_t jchunk = out_w;
    if (outer < worker_count()) {
        std::int64_t want = (out_w + worker_count() * 4 - 1) / (worker_count() * 4);
        jchunk = std::max<std::int64_t>(4, (want + 3) / 4 * 4);
    }
    const std::int64_t nchunks = (out_w + jchunk - 1) / jchunk;

    parallel_for(outer * nchunks, [&](std::int64_t wb, std::int64_t we) {
        std::vector<float> scratch(4 * static_cast<size_t>(cout), 0.0f);
        float* a0 = scratch.data();
        float* a1 = a0 + cout;
        float* a2 = a1 + cout;
        float* a3 = a2 + cout;
        for (std::int64_t work = wb; work < we; ++work) {
            const std::int64_t o = work / nchunks;
            const std::int64_t chunk = work % nchunks;
            std::int64_t rem = o;
            std::int64_t in_base = 0, out_base = 0;
            for (int a = d - 2; a >= 0; --a) {
                std::int64_t c = rem % p.out_ext[a];
                rem /= p.out_ext[a];
                in_base += c * p.stride[a] * p.in_stride[a];
                out_base += c * p.out_stride[a];
            }
            const std::int64_t j_lo = chunk * jchunk;
            const std::int64_t j_hi = std::min(out_w, j_lo + jchunk);
            std::int64_t j = j_lo;
            for (; j + 4 <= j_hi; j += 4) {
                std::memset(scratch.data(), 0, scratch.size() * sizeof(float));
                const float* xj = x + in_base + j * jstep;
                for (const auto& tap : p.taps) {
                    const float* __restrict wrow = w + tap.w_off;
                    const float* __restrict xb = xj + tap.in_off;
                    for (int ci = 0; ci < cin; ++ci) {
                        const float* __restrict wv = wrow + static_cast<std::int64_t>(ci) * cout;
                        const float x0 = xb[ci];
                        const float x1 = xb[jstep + ci];
                        const float x2 = xb[2 * jstep + ci];
                        const float x3 = xb[3 * jstep + ci];
                        for (int co = 0; co < cout; ++co) {
                            const float wc = wv[co];
                            a0[co] += x0 * wc;
                            a1[co] += x1 * wc;
                            a2[co] += x2 * wc;
                            a3[co] += x3 * wc;
                        }
                    }
                }
                std::memcpy(y + out_base + j * cout, scratch.data(), 4 * cout * sizeof(float));
            }
            for (; j < j_hi; ++j) {
                std::memset(a0, 0, cout * sizeof(float));
                const float* xj = x + in_base + j * jstep;
                for (const auto& tap : p.taps) {
                    const float* __restrict wrow = w + tap.w_off;
                    const float* __restrict xb = xj + tap.in_off;
                    for (int ci = 0; ci < cin; ++ci) {
                        const float* __restrict wv = wrow + static_cast<std::int64_t>(ci) * cout;
                        const float x0 = xb[ci];
                        for (int co = 0; co < cout; ++co) a0[co] += x0 * wv[co];
                    }
                }
                std::memcpy(y + out_base + j * cout, a0, cout * sizeof(float));
            }
        }
    });
}

// Generic path with zero padding: per-tap bounds checks.
void conv_fwd_padded(const float* __restrict x, const float* __restrict w, float* __restrict y,
                     const ConvPlan& p) {
    const int cin = p.cin, cout = p.cout, d = p.d;
    parallel_for(p.out_spatial, [&](std::int64_t ob, std::int64_t oe) {
        std::vector<float> acc(cout);
        int oc[3];
        for (std::int64_t of = ob; of < oe; ++of) {
            std::int64_t rem = of;
            for (int a = d - 1; a >= 0; --a) {
                oc[a] = static_cast<int>(rem % p.out_ext[a]);
                rem /= p.out_ext[a];
            }
            std::fill(acc.begin(), acc.end(), 0.0f);
            for (const auto& tap : p.taps) {
                std::int64_t in_off = 0;
                bool valid = true;
                for (int a = 0; a < d; ++a) {
                    std::int64_t c = static_cast<std::int64_t>(oc[a]) * p.stride[a] - p.pad[a] +
                                     static_cast<std::int64_t>(tap.coord[a]) * p.dil[a];
                    if (c < 0 || c >= p.in_ext[a]) {
                        valid = false;
                        break;
                    }
                    in_off += c * p.in_stride[a];
                }
                if (!valid) continue;
                const float* __restrict xb = x + in_off;
                const float* __restrict wrow = w + tap.w_off;
                for (int ci = 0; ci < cin; ++ci) {
                    const float xv = xb[ci];
                    const float* __restrict wv = wrow + static_cast<std::int64_t>(ci) * cout;
                    for (int co = 0; co < cout; ++co) acc[co] += xv * wv[co];
                }
            }
            std::memcpy(y + of * cout, acc.data(), cout * sizeof(float));
        }
    });
}

// Accumulate one input position's gradient row from one tap.
inline void bwd_input_tap_row(const float* __restrict gor, const float* __restrict wtrow,
                              float* __restrict dxacc, int cin, int cout) {
    int co = 0;
    for (; co + 4 <= cout; co += 4) {
        const float g0 = gor[co], g1 = gor[co + 1];
        const float g2 = gor[co + 2], g3 = gor[co + 3];
        const float* __restrict w0 = wtrow + static_cast<std::int64_t>(co) * cin;
        const float* __restrict w1 = w0 + cin;
        const float* __restrict w2 = w1 + cin;
        const float* __restrict w3 = w2 + cin;
        for (int ci = 0; ci < cin; ++ci)
            dxacc[ci] += g0 * w0[ci] + g1 * w1[ci] + g2 * w2[ci] + g3 * w3[ci];
    }
    for (; co < cout; ++co) {
        const float g = gor[co];
        const float* __restrict wv = wtrow + static_cast<std::int64_t>(co) * cin;
        for (int ci = 0; ci < cin; ++ci) dxacc[ci] += g * wv[ci];
    }
}

// Gradient w.r.t. the input, gather form: each input element sums over the
// output positions its value reached. The kernel is transposed up front so
// accumulation runs contiguously over input channels; with unit stride on
// the last axis, four input positions share each kernel row load.
// Accumulates into gx.
void conv_bwd_input(const float* __restrict gy, const float* __restrict w,
                    float* __restrict gx, const ConvPlan& p) {
    const int cin = p.cin, cout = p.cout, d = p.d;
    const std::int64_t ntaps = static_cast<std::int64_t>(p.taps.size());
    std::vector<float> wt(static_cast<size_t>(ntaps) * cin * cout);
    for (std::int64_t t = 0; t < ntaps; ++t)
        for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < cout; ++co)
                wt[(t * cout + co) * cin + ci] =
                    w[p.taps[t].w_off + static_cast<std::int64_t>(ci) * cout + co];

    const std::int64_t in_w = p.in_ext[d - 1];
    const std::int64_t out_w = p.out_ext[d - 1];
    const std::int64_t outer = p.in_spatial / in_w;

    std::int64_t jchunk = in_w;
    if (outer < worker_count()) {
        std::int64_t want = (in_w + worker_count() * 4 - 1) / (worker_count() * 4);
        jchunk = std::max<std::int64_t>(4, (want + 3) / 4 * 4);
    }
    const std::int64_t nchunks = (in_w + jchunk - 1) / jchunk;

    parallel_for(outer * nchunks, [&](std::int64_t wb, std::int64_t we) {
        std::vector<float> scratch(static_cast<size_t>(cin));
        float* dx0 = scratch.data();
        std::vector<std::int64_t> tout_base(ntaps);
        std::vector<char> tvalid(ntaps);
        std::int64_t last_o = -1;
        for (std::int64_t work = wb; work < we; ++work) {
            const std::int64_t o = work / nchunks;
            const std::int64_t chunk = work % nchunks;
            if (o != last_o) {
                last_o = o;
                // leading-axis validity and output base per tap for this row
                for (std::int64_t ti = 0; ti < ntaps; ++ti) {
                    const auto& tap = p.taps[ti];
                    std::int64_t rem = o, base = 0;
                    bool valid = true;
                    for (int a = d - 2; a >= 0; --a) {
                        const std::int64_t ica = rem % p.in_ext[a];
                        rem /= p.in_ext[a];
                        std::int64_t num = ica + p.pad[a] -
                                           static_cast<std::int64_t>(tap.coord[a]) * p.dil[a];
                        if (num < 0 || (p.stride[a] != 1 && num % p.stride[a] != 0)) {
                            valid = false;
                            break;
                        }
                        if (p.stride[a] != 1) num /= p.stride[a];
                        if (num >= p.out_ext[a]) {
                            valid = false;
                            break;
                        }
                        base += num * p.out_stride[a];
                    }
                    tvalid[ti] = valid ? 1 : 0;
                    tout_base[ti] = base;
                }
            }
            const std::int64_t j_lo = chunk * jchunk;
            const std::int64_t j_hi = std::min(in_w, j_lo + jchunk);
            const std::int64_t row_in = o * in_w;
            std::int64_t j = j_lo;
            for (; j < j_hi; ++j) {
                std::memset(dx0, 0, cin * sizeof(float));
                bool touched = false;
                for (std::int64_t ti = 0; ti < ntaps; ++ti) {
                    if (!tvalid[ti]) continue;
                    const auto& tap = p.taps[ti];
                    std::int64_t num = j + p.pad[d - 1] -
                                       static_cast<std::int64_t>(tap.coord[d - 1]) * p.dil[d - 1];
                    if (num < 0) continue;
                    if (p.stride[d - 1] != 1) {
                        if (num % p.stride[d - 1] != 0) continue;
                        num /= p.stride[d - 1];
                    }
                    if (num >= out_w) continue;
                    touched = true;
                    bwd_input_tap_row(gy + tout_base[ti] + num * cout,
                                      wt.data() + ti * cout * cin, dx0, cin, cout);
                }
                if (touched) {
                    float* gxr = gx + (row_in + j) * cin;
                    for (int ci = 0; ci < cin; ++ci) gxr[ci] += dx0[ci];
                }
            }
        }
    });
}

// Gradient w.r.t. the kernel; taps own disjoint slices, so parallelizing
// over taps keeps a fixed per-slice accumulation order. Accumulates into gw.
void conv_bwd_kernel(const float* __restrict gy, const float* __restrict x,
                     float* __restrict gw, const ConvPlan& p) {
    const int cin = p.cin, cout = p.cout, d = p.d;
    const std::int64_t out_w = p.out_ext[d - 1];
    const std::int64_t outer = p.out_spatial / out_w;
    const std::int64_t jstep = static_cast<std::int64_t>(p.stride[d - 1]) * p.in_stride[d - 1];
    parallel_for(static_cast<std::int64_t>(p.taps.size()), [&](std::int64_t tb, std::int64_t te) {
        for (std::int64_t ti = tb; ti < te; ++ti) {
            const auto& tap = p.taps[ti];
            float* __restrict dwrow = gw + tap.w_off;
            for (std::int64_t o = 0; o < outer; ++o) {
                std::int64_t rem = o;
                std::int64_t in_base = 0, out_base = 0;
                bool row_valid = true;
                for (int a = d - 2; a >= 0; --a) {
                    const std::int64_t c0 = rem % p.out_ext[a];
                    rem /= p.out_ext[a];
                    const std::int64_t c = c0 * p.stride[a] - p.pad[a] +
                                           static_cast<std::int64_t>(tap.coord[a]) * p.dil[a];
                    if (c < 0 || c >= p.in_ext[a]) {
                        row_valid = false;
                        break;
                    }
                    in_base += c * p.in_stride[a];
                    out_base += c0 * p.out_stride[a];
                }
                if (!row_valid) continue;
                // valid j range along the last axis for this tap
                const std::int64_t toff = static_cast<std::int64_t>(tap.coord[d - 1]) * p.dil[d - 1] -
                                          p.pad[d - 1];
                std::int64_t j_lo = 0, j_hi = out_w;
                if (p.pad[d - 1] > 0) {
                    const std::int64_t s = p.stride[d - 1];
                    while (j_lo < out_w && j_lo * s + toff < 0) ++j_lo;
                    while (j_hi > j_lo && (j_hi - 1) * s + toff >= p.in_ext[d - 1]) --j_hi;
                }
                const float* __restrict xrow = x + in_base + toff * p.in_stride[d - 1];
                const float* __restrict grow = gy + out_base;
                std::int64_t j = j_lo;
                for (; j + 4 <= j_hi; j += 4) {
                    const float* __restrict x0 = xrow + j * jstep;
                    const float* __restrict x1 = x0 + jstep;
                    const float* __restrict x2 = x1 + jstep;
                    const float* __restrict x3 = x2 + jstep;
                    const float* __restrict g0 = grow + j * cout;
                    const float* __restrict g1 = g0 + cout;
                    const float* __restrict g2 = g1 + cout;
                    const float* __restrict g3 = g2 + cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const float a0 = x0[ci], a1 = x1[ci], a2 = x2[ci], a3 = x3[ci];
                        float* __restrict dwr = dwrow + static_cast<std::int64_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co)
                            dwr[co] += a0 * g0[co] + a1 * g1[co] + a2 * g2[co] + a3 * g3[co];
                    }
                }
                for (; j < j_hi; ++j) {
                    const float* __restrict xb = xrow + j * jstep;
                    const float* __restrict gor = grow + j * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const float xv = xb[ci];
                        float* __restrict dwr = dwrow + static_cast<std::int64_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) dwr[co] += xv * gor[co];
                    }
                }
            }
        }
    });
}

}  // namespace

Tensor conv_forward(const Tensor& input, const Tensor& kernel, const ConvGeom& geom) {
    ConvPlan plan = make_conv_plan(input, kernel, geom);
    std::vector<int> out_shape(plan.out_ext.begin(), plan.out_ext.end());
    out_shape.push_back(plan.cout);
    Tensor out(out_shape);
    if (plan.padded)
        conv_fwd_padded(input.data(), kernel.data(), out.data(), plan);
    else
        conv_fwd_nopad(input.data(), kernel.data(), out.data(), plan);

    if (Tape* tp = pick_tape({&input, &kernel})) {
        const int in_id = input.node, k_id = kernel.node;
        Tensor in_saved = input.detached();
        Tensor k_saved = kernel.detached();
        out.node = tp->record(out.shape(), [plan, in_id, k_id, in_saved, k_saved](
                                               Tape& t, const Tensor& gout) {
            if (in_id >= 0) {
                Tensor& gx = t.grad_buffer(in_id, in_saved.shape());
                conv_bwd_input(gout.data(), k_saved.data(), gx.data(), plan);
            }
            if (k_id >= 0) {
                Tensor& gk = t.grad_buffer(k_id, k_saved.shape());
                conv_bwd_kernel(gout.data(), in_saved.data(), gk.data(), plan);
            }
        });
        out.tape = tp;
    }
    return out;
}

Tensor hard_sigmoid(const Tensor& x) {
    Tensor out(x.shape());
    const float* xs = x.data();
    float* ys = out.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        float v = xs[i];
        ys[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
    if (Tape* tp = pick_tape({&x})) {
        const int x_id = x.node;
        Tensor x_saved = x.detached();
        out.node = tp->record(out.shape(), [x_id, x_saved](Tape& t, const Tensor& gout) {
            Tensor& gx = t.grad_buffer(x_id, x_saved.shape());
            const float* xs = x_saved.data();
            const float* go = gout.data();
            float* g = gx.data();
            const std::int64_t n = x_saved.numel();
            // slope 1 strictly inside (0,1), 0 elsewhere including the kinks
            for (std::int64_t i = 0; i < n; ++i)
                if (xs[i] > 0.0f && xs[i] < 1.0f) g[i] += go[i];
        });
        out.tape = tp;
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor out(a.shape());
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    if (Tape* tp = pick_tape({&a, &b})) {
        const int a_id = a.node, b_id = b.node;
        const std::vector<int> shape = a.shape();
        out.node = tp->record(shape, [a_id, b_id, shape](Tape& t, const Tensor& gout) {
            if (a_id >= 0) add_into(t.grad_buffer(a_id, shape).data(), gout.data(), gout.numel());
            if (b_id >= 0) add_into(t.grad_buffer(b_id, shape).data(), gout.data(), gout.numel());
        });
        out.tape = tp;
    }
    return out;
}

Tensor scale_shift(const Tensor& x, float scale, float shift) {
    Tensor out(x.shape());
    const float* xs = x.data();
    float* ys = out.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) ys[i] = scale * xs[i] + shift;
    if (Tape* tp = pick_tape({&x})) {
        const int x_id = x.node;
        const std::vector<int> shape = x.shape();
        out.node = tp->record(shape, [x_id, shape, scale](Tape& t, const Tensor& gout) {
            float* g = t.grad_buffer(x_id, shape).data();
            const float* go = gout.data();
            const std::int64_t n = gout.numel();
            for (std::int64_t i = 0; i < n; ++i) g[i] += scale * go[i];
        });
        out.tape = tp;
    }
    return out;
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    const float* xs = x.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += xs[i];
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    if (Tape* tp = pick_tape({&x})) {
        const int x_id = x.node;
        const std::vector<int> shape = x.shape();
        out.node = tp->record({1}, [x_id, shape](Tape& t, const Tensor& gout) {
            float* g = t.grad_buffer(x_id, shape).data();
            const float go = gout.item();
            std::int64_t n = 1;
            for (int e : shape) n *= e;
            for (std::int64_t i = 0; i < n; ++i) g[i] += go;
        });
        out.tape = tp;
    }
    return out;
}

namespace {

void feature_dims(const Tensor& f, std::int64_t* n_out, int* c_out) {
    if (f.rank() < 2)
        throw ShapeError("statistic input must be [spatial..., channels], got " +
                         shape_str(f.shape()));
    const int c = f.shape().back();
    *c_out = c;
    *n_out = f.numel() / c;
}

}  // namespace

Tensor gram(const Tensor& feature) {
    std::int64_t n;
    int c;
    feature_dims(feature, &n, &c);
    // G = F^T F / N, accumulated in double; symmetric C x C.
    std::vector<double> acc(static_cast<size_t>(c) * c, 0.0);
    const float* fs = feature.data();
    for (std::int64_t i = 0; i < n; ++i) {
        const float* row = fs + i * c;
        for (int c1 = 0; c1 < c; ++c1) {
            const double v = row[c1];
            double* arow = acc.data() + static_cast<std::int64_t>(c1) * c;
            for (int c2 = 0; c2 < c; ++c2) arow[c2] += v * row[c2];
        }
    }
    Tensor out({c, c});
    float* os = out.data();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(c) * c; ++i)
        os[i] = static_cast<float>(acc[i] * inv_n);

    if (Tape* tp = pick_tape({&feature})) {
        const int f_id = feature.node;
        Tensor f_saved = feature.detached();
        out.node = tp->record(out.shape(), [f_id, f_saved, n, c](Tape& t, const Tensor& gout) {
            Tensor& gf = t.grad_buffer(f_id, f_saved.shape());
            // dF[i,:] += (gG + gG^T) F[i,:] / N
            const float* gg = gout.data();
            std::vector<float> m(static_cast<size_t>(c) * c);
            const float inv_n = 1.0f / static_cast<float>(n);
            for (int c1 = 0; c1 < c; ++c1)
                for (int c2 = 0; c2 < c; ++c2)
                    m[static_cast<std::int64_t>(c1) * c + c2] =
                        (gg[static_cast<std::int64_t>(c1) * c + c2] +
                         gg[static_cast<std::int64_t>(c2) * c + c1]) *
                        inv_n;
            const float* fs = f_saved.data();
            float* g = gf.data();
            // m is symmetric, so the matvec can run in saxpy order
            parallel_for(n, [&](std::int64_t b, std::int64_t e) {
                for (std::int64_t i = b; i < e; ++i) {
                    const float* row = fs + i * c;
                    float* grow = g + i * c;
                    int c2 = 0;
                    for (; c2 + 4 <= c; c2 += 4) {
                        const float v0 = row[c2], v1 = row[c2 + 1];
                        const float v2 = row[c2 + 2], v3 = row[c2 + 3];
                        const float* m0 = m.data() + static_cast<std::int64_t>(c2) * c;
                        const float* m1 = m0 + c;
                        const float* m2 = m1 + c;
                        const float* m3 = m2 + c;
                        for (int c1 = 0; c1 < c; ++c1)
                            grow[c1] += v0 * m0[c1] + v1 * m1[c1] + v2 * m2[c1] + v3 * m3[c1];
                    }
                    for (; c2 < c; ++c2) {
                        const float v = row[c2];
                        const float* mrow = m.data() + static_cast<std::int64_t>(c2) * c;
                        for (int c1 = 0; c1 < c; ++c1) grow[c1] += v * mrow[c1];
                    }
                }
            });
        });
        out.tape = tp;
    }
    return out;
}

Tensor channel_mean(const Tensor& feature) {
    std::int64_t n;
    int c;
    feature_dims(feature, &n, &c);
    std::vector<double> acc(c, 0.0);
    const float* fs = feature.data();
    for (std::int64_t i = 0; i < n; ++i) {
        const float* row = fs + i * c;
        for (int ch = 0; ch < c; ++ch) acc[ch] += row[ch];
    }
    Tensor out({c});
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int ch = 0; ch < c; ++ch) out.data()[ch] = static_cast<float>(acc[ch] * inv_n);

    if (Tape* tp = pick_tape({&feature})) {
        const int f_id = feature.node;
        const std::vector<int> fshape = feature.shape();
        out.node = tp->record({c}, [f_id, fshape, n, c](Tape& t, const Tensor& gout) {
            float* g = t.grad_buffer(f_id, fshape).data();
            const float* go = gout.data();
            const float inv_n = 1.0f / static_cast<float>(n);
            for (std::int64_t i = 0; i < n; ++i) {
                float* grow = g + i * c;
                for (int ch = 0; ch < c; ++ch) grow[ch] += go[ch] * inv_n;
            }
        });
        out.tape = tp;
    }
    return out;
}

Tensor frob_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("frob_diff: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const float* pa = a.data();
    const float* pb = b.data();
    const std::int64_t n = a.numel();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
        acc += d * d;
    }
    const float norm = static_cast<float>(std::sqrt(acc));
    Tensor out = Tensor::scalar(norm);
    if (Tape* tp = pick_tape({&a, &b})) {
        const int a_id = a.node, b_id = b.node;
        Tensor a_saved = a.detached();
        Tensor b_saved = b.detached();
        out.node = tp->record({1}, [a_id, b_id, a_saved, b_saved, norm](Tape& t,
                                                                        const Tensor& gout) {
            if (norm == 0.0f) return;  // subgradient at the kink is defined as 0
            const float scale = gout.item() / norm;
            const float* pa = a_saved.data();
            const float* pb = b_saved.data();
            const std::int64_t n = a_saved.numel();
            if (a_id >= 0) {
                float* g = t.grad_buffer(a_id, a_saved.shape()).data();
                for (std::int64_t i = 0; i < n; ++i) g[i] += scale * (pa[i] - pb[i]);
            }
            if (b_id >= 0) {
                float* g = t.grad_buffer(b_id, b_saved.shape()).data();
                for (std::int64_t i = 0; i < n; ++i) g[i] -= scale * (pa[i] - pb[i]);
            }
        });
        out.tape = tp;
    }
    return out;
}

Tensor upsample_nearest2(const Tensor& x) {
    if (x.rank() < 2) throw ShapeError("upsample_nearest2 expects [spatial..., channels]");
    const int d = x.rank() - 1;
    const int c = x.shape().back();
    std::vector<int> out_shape(x.shape());
    for (int a = 0; a < d; ++a) out_shape[a] *= 2;
    Tensor out(out_shape);

    std::vector<std::int64_t> in_stride(d), out_stride(d);
    in_stride[d - 1] = c;
    out_stride[d - 1] = c;
    for (int a = d - 2; a >= 0; --a) {
        in_stride[a] = in_stride[a + 1] * x.shape()[a + 1];
        out_stride[a] = out_stride[a + 1] * out_shape[a + 1];
    }
    const std::int64_t out_spatial = out.numel() / c;
    const float* xs = x.data();
    float* ys = out.data();
    for (std::int64_t of = 0; of < out_spatial; ++of) {
        std::int64_t rem = of, in_off = 0;
        for (int a = d - 1; a >= 0; --a) {
            const std::int64_t oc = rem % out_shape[a];
            rem /= out_shape[a];
            in_off += (oc / 2) * in_stride[a];
        }
        std::memcpy(ys + of * c, xs + in_off, c * sizeof(float));
    }

    if (Tape* tp = pick_tape({&x})) {
        const int x_id = x.node;
        const std::vector<int> in_shape = x.shape();
        out.node = tp->record(out_shape, [x_id, in_shape, out_shape, in_stride, d,
                                          c](Tape& t, const Tensor& gout) {
            float* g = t.grad_buffer(x_id, in_shape).data();
            const float* go = gout.data();
            std::int64_t out_spatial = 1;
            for (int a = 0; a < d; ++a) out_spatial *= out_shape[a];
            for (std::int64_t of = 0; of < out_spatial; ++of) {
                std::int64_t rem = of, in_off = 0;
                for (int a = d - 1; a >= 0; --a) {
                    const std::int64_t oc = rem % out_shape[a];
                    rem /= out_shape[a];
                    in_off += (oc / 2) * in_stride[a];
                }
                const float* gor = go + of * c;
                float* gr = g + in_off;
                for (int ch = 0; ch < c; ++ch) gr[ch] += gor[ch];
            }
        });
        out.tape = tp;
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 2)
        throw ShapeError("concat_channels: rank mismatch");
    for (int i = 0; i + 1 < a.rank(); ++i)
        if (a.shape()[i] != b.shape()[i])
            throw ShapeError("concat_channels: spatial extents differ: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    const int ca = a.shape().back(), cb = b.shape().back();
    std::vector<int> out_shape(a.shape());
    out_shape.back() = ca + cb;
    Tensor out(out_shape);
    const std::int64_t spatial = a.numel() / ca;
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < spatial; ++i) {
        std::memcpy(po + i * (ca + cb), pa + i * ca, ca * sizeof(float));
        std::memcpy(po + i * (ca + cb) + ca, pb + i * cb, cb * sizeof(float));
    }
    if (Tape* tp = pick_tape({&a, &b})) {
        const int a_id = a.node, b_id = b.node;
        const std::vector<int> as = a.shape(), bs = b.shape();
        out.node = tp->record(out_shape, [a_id, b_id, as, bs, spatial, ca, cb](
                                             Tape& t, const Tensor& gout) {
            const float* go = gout.data();
            if (a_id >= 0) {
                float* g = t.grad_buffer(a_id, as).data();
                for (std::int64_t i = 0; i < spatial; ++i)
                    add_into(g + i * ca, go + i * (ca + cb), ca);
            }
            if (b_id >= 0) {
                float* g = t.grad_buffer(b_id, bs).data();
                for (std::int64_t i = 0; i < spatial; ++i)
                    add_into(g + i * cb, go + i * (ca + cb) + ca, cb);
            }
        });
        out.tape = tp;
    }
    return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    Tensor out = x.reshaped(shape);
    if (Tape* tp = pick_tape({&x})) {
        const int x_id = x.node;
        const std::vector<int> in_shape = x.shape();
        out.node = tp->record(shape, [x_id, in_shape](Tape& t, const Tensor& gout) {
            float* g = t.grad_buffer(x_id, in_shape).data();
            add_into(g, gout.data(), gout.numel());
        });
        out.tape = tp;
    }
    return out;
}

// ---------------------------------------------------------------- noise

Tensor gaussian_noise(const std::vector<int>& shape, float std_dev, Rng& rng) {
    if (std_dev < 0.0f) throw ContractError("gaussian_noise: std must be >= 0");
    Tensor t(shape);
    float* p = t.data();
    const std::int64_t n = t.numel();
    for (std::int64_t i = 0; i < n; ++i)
        p[i] = static_cast<float>(rng.normal() * std_dev);
    return t;
}

Tensor gaussian_noise(const std::vector<int>& shape, float std_dev, std::uint64_t seed) {
    Rng rng(seed);
    return gaussian_noise(shape, std_dev, rng);
}

// ---------------------------------------------------------------- optimizer

OptKind opt_kind_from_string(const std::string& s) {
    if (s == "plain") return OptKind::plain;
    if (s == "adam") return OptKind::adam;
    if (s == "rmsprop") return OptKind::rmsprop;
    throw ContractError("unknown optimizer kind: " + s);
}

std::string to_string(OptKind k) {
    switch (k) {
        case OptKind::plain: return "plain";
        case OptKind::adam: return "adam";
        case OptKind::rmsprop: return "rmsprop";
    }
    return "?";
}

namespace {
constexpr float kAdamBeta1 = 0.9f;
constexpr float kAdamBeta2 = 0.999f;
constexpr float kRmsDecay = 0.9f;
constexpr float kOptEps = 1e-8f;
}  // namespace

void optimizer_step(OptimizerState& state, std::vector<Tensor>& params,
                    const std::vector<Tensor>& grads) {
    if (params.size() != grads.size())
        throw ContractError("optimizer_step: " + std::to_string(params.size()) + " params vs " +
                            std::to_string(grads.size()) + " grads");
    for (size_t i = 0; i < params.size(); ++i)
        if (!params[i].same_shape(grads[i]))
            throw ContractError("optimizer_step: grad shape " + shape_str(grads[i].shape()) +
                                " does not match param shape " + shape_str(params[i].shape()));

    const bool needs_m = state.kind == OptKind::adam;
    const bool needs_v = state.kind != OptKind::plain;
    if (needs_m && state.m.size() != params.size()) {
        state.m.clear();
        for (const Tensor& p : params) state.m.emplace_back(p.shape());
    }
    if (needs_v && state.v.size() != params.size()) {
        state.v.clear();
        for (const Tensor& p : params) state.v.emplace_back(p.shape());
    }
    state.step_count += 1;

    const float lr = state.lr;
    switch (state.kind) {
        case OptKind::plain: {
            for (size_t i = 0; i < params.size(); ++i) {
                float* p = params[i].data();
                const float* g = grads[i].data();
                const std::int64_t n = params[i].numel();
                for (std::int64_t j = 0; j < n; ++j) p[j] -= lr * g[j];
            }
            break;
        }
        case OptKind::adam: {
            const double bc1 = 1.0 - std::pow(static_cast<double>(kAdamBeta1), state.step_count);
            const double bc2 = 1.0 - std::pow(static_cast<double>(kAdamBeta2), state.step_count);
            for (size_t i = 0; i < params.size(); ++i) {
                float* p = params[i].data();
                float* m = state.m[i].data();
                float* v = state.v[i].data();
                const float* g = grads[i].data();
                const std::int64_t n = params[i].numel();
                for (std::int64_t j = 0; j < n; ++j) {
                    const double gj = g[j];
                    const double mj = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * gj;
                    const double vj = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * gj * gj;
                    m[j] = static_cast<float>(mj);
                    v[j] = static_cast<float>(vj);
                    p[j] = static_cast<float>(p[j] -
                                              lr * (mj / bc1) / (std::sqrt(vj / bc2) + kOptEps));
                }
            }
            break;
        }
        case OptKind::rmsprop: {
            for (size_t i = 0; i < params.size(); ++i) {
                float* p = params[i].data();
                float* v = state.v[i].data();
                const float* g = grads[i].data();
                const std::int64_t n = params[i].numel();
                for (std::int64_t j = 0; j < n; ++j) {
                    const double gj = g[j];
                    const double vj = kRmsDecay * v[j] + (1.0 - kRmsDecay) * gj * gj;
                    v[j] = static_cast<float>(vj);
                    p[j] = static_cast<float>(p[j] - lr * gj / (std::sqrt(vj) + kOptEps));
                }
            }
            break;
        }
    }
}

}  // namespace cgtex
