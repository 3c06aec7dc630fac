#include "cgtex/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "cgtex/energy_model.hpp"
#include "cgtex/generator.hpp"
#include "cgtex/tensor.hpp"

namespace cgtex {

namespace {

constexpr double kStep = 1e-3;
constexpr double kRelTol = 1e-3;

struct Case {
    std::string name;
    std::vector<Tensor> leaves;
    // builds the scalar output from the given leaf values
    std::function<Tensor(const std::vector<Tensor>&)> expr;
};

Tensor random_uniform(const std::vector<int>& shape, Rng& rng, double lo, double hi) {
    Tensor t{shape};
    for (std::int64_t i = 0; i < t.numel(); ++i)
        t.data()[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

void check_case(const Case& c, Rng& rng, int components_per_leaf, GradCheckReport* report,
                std::ostream* log) {
    report->cases += 1;

    // analytic gradients
    Tape tape;
    std::vector<Tensor> watched;
    watched.reserve(c.leaves.size());
    for (const Tensor& t : c.leaves) watched.push_back(tape.watch(t));
    Tensor out = c.expr(watched);
    const double scale = std::max(1.0, std::abs(static_cast<double>(out.item())));
    Gradients grads = tape.backward(out);

    auto value_at = [&](const std::vector<Tensor>& args) {
        return static_cast<double>(c.expr(args).item());
    };
    const double e0 = value_at(c.leaves);

    for (size_t li = 0; li < c.leaves.size(); ++li) {
        Tensor analytic = grads.grad(watched[li]);
        const std::int64_t n = c.leaves[li].numel();
        const int picks = static_cast<int>(std::min<std::int64_t>(components_per_leaf, n));
        for (int p = 0; p < picks; ++p) {
            const std::int64_t i = static_cast<std::int64_t>(rng.next_u64() % n);
            auto values_at = [&](double h, double* vp, double* vm) {
                std::vector<Tensor> plus, minus;
                for (const Tensor& t : c.leaves) {
                    plus.push_back(t.clone());
                    minus.push_back(t.clone());
                }
                plus[li].data()[i] += static_cast<float>(h);
                minus[li].data()[i] -= static_cast<float>(h);
                *vp = value_at(plus);
                *vm = value_at(minus);
            };
            double ep, em;
            values_at(kStep, &ep, &em);
            const double fd = (ep - em) / (2.0 * kStep);
            // an activation kink anywhere inside (-h, h) splits the one-sided
            // slopes apart; such points are outside the contract
            // one-sided slopes split apart when a kink lies inside the
            // interval, at any of the step sizes used
            auto kinked = [&](double h, double plus_e, double minus_e) {
                const double fwd = (plus_e - e0) / h;
                const double bwd = (e0 - minus_e) / h;
                const double noise = 4e-4 * scale * (kStep / h);
                return std::abs(fwd - bwd) >
                       std::max(noise, 3e-3 * (std::abs(fwd) + std::abs(bwd)));
            };
            double ep_h, em_h, ep_q, em_q;
            values_at(kStep / 2, &ep_h, &em_h);
            values_at(kStep / 4, &ep_q, &em_q);
            const double fd_half = (ep_h - em_h) / kStep;
            const double fd_quarter = (ep_q - em_q) / (kStep / 2);
            auto disagrees = [](double x, double y) {
                return std::abs(x - y) > 5e-3 * std::max(1.0, std::abs(x) + std::abs(y));
            };
            if (kinked(kStep, ep, em) || kinked(kStep / 4, ep_q, em_q) ||
                disagrees(fd, fd_half) || disagrees(fd_half, fd_quarter)) {
                report->kink_skips += 1;
                continue;
            }
            report->components += 1;
            const double a = analytic.data()[i];
            const double rel = std::abs(a - fd) / std::max(std::abs(a) + std::abs(fd), 1e-12);
            const double noise_floor = 6e-4 * scale;  // eps32 * |out| / (2h), with margin
            if (rel >= kRelTol && std::abs(a - fd) >= noise_floor) {
                report->failures += 1;
                if (report->notes.size() < 10) {
                    char buf[160];
                    std::snprintf(buf, sizeof(buf),
                                  "%s leaf %zu[%lld]: analytic %.6g vs fd %.6g (rel %.3g)",
                                  c.name.c_str(), li, static_cast<long long>(i), a, fd, rel);
                    report->notes.push_back(buf);
                }
            }
        }
    }
    if (log) *log << "  " << c.name << "\n";
}

Case conv_case(Rng& rng, int d) {
    std::vector<int> in_shape, k_shape, stride, dil, pad;
    for (int a = 0; a < d; ++a) {
        const int k = 1 + static_cast<int>(rng.next_u64() % 3);
        const int di = 1 + static_cast<int>(rng.next_u64() % 2);
        in_shape.push_back(di * (k - 1) + 1 + 2 + static_cast<int>(rng.next_u64() % 4));
        k_shape.push_back(k);
        stride.push_back(1 + static_cast<int>(rng.next_u64() % 2));
        dil.push_back(di);
        pad.push_back(static_cast<int>(rng.next_u64() % 2));
    }
    int cin = 1 + static_cast<int>(rng.next_u64() % 3);
    int cout = 1 + static_cast<int>(rng.next_u64() % 3);
    if (d == 3) cin = 1 + static_cast<int>(rng.next_u64() % 2);
    in_shape.push_back(cin);
    k_shape.push_back(cin);
    k_shape.push_back(cout);

    Case c;
    c.name = "conv" + std::to_string(d) + "d";
    c.leaves = {random_uniform(in_shape, rng, -1.0, 1.0),
                random_uniform(k_shape, rng, -0.8, 0.8)};
    ConvGeom geom{stride, dil, pad};
    c.expr = [geom](const std::vector<Tensor>& a) {
        Tensor y = conv_forward(a[0], a[1], geom);
        return frob_diff(y, Tensor::full(y.shape(), 0.05f));
    };
    return c;
}

Case hard_sigmoid_case(Rng& rng) {
    Case c;
    c.name = "hard_sigmoid";
    c.leaves = {random_uniform({4, 5}, rng, -1.5, 2.5)};
    c.expr = [](const std::vector<Tensor>& a) {
        return frob_diff(hard_sigmoid(a[0]), Tensor::full({4, 5}, 0.4f));
    };
    return c;
}

Case gram_case(Rng& rng) {
    Case c;
    c.name = "gram";
    const int n = 3 + static_cast<int>(rng.next_u64() % 5);
    const int ch = 2 + static_cast<int>(rng.next_u64() % 3);
    c.leaves = {random_uniform({n, n, ch}, rng, 0.0, 1.0)};
    Tensor target = random_uniform({ch, ch}, rng, 0.0, 0.4);
    c.expr = [target](const std::vector<Tensor>& a) { return frob_diff(gram(a[0]), target); };
    return c;
}

Case mean_case(Rng& rng) {
    Case c;
    c.name = "mean";
    const int n = 3 + static_cast<int>(rng.next_u64() % 5);
    const int ch = 2 + static_cast<int>(rng.next_u64() % 3);
    c.leaves = {random_uniform({n, n, ch}, rng, 0.0, 1.0)};
    Tensor target = random_uniform({ch}, rng, 0.0, 0.8);
    c.expr = [target](const std::vector<Tensor>& a) {
        return frob_diff(channel_mean(a[0]), target);
    };
    return c;
}

Case norm_case(Rng& rng) {
    Case c;
    c.name = "norm";
    c.leaves = {random_uniform({3, 4, 2}, rng, -1.0, 1.0),
                random_uniform({3, 4, 2}, rng, -1.0, 1.0)};
    c.expr = [](const std::vector<Tensor>& a) { return frob_diff(a[0], a[1]); };
    return c;
}

Case energy_sample_case(Rng& rng, int which) {
    const Modality modality =
        which % 3 == 0 ? Modality::image : (which % 3 == 1 ? Modality::sound : Modality::dynamic);
    const StatKind stat = which % 2 == 0 ? StatKind::gram : StatKind::mean;
    NetworkSpec spec;
    Tensor f0, f;
    if (modality == Modality::image) {
        spec = NetworkSpec::make(modality, 2, 0, 4, stat);
        f0 = random_uniform({12, 12, 3}, rng, 0.0, 1.0);
        f = random_uniform({12, 12, 3}, rng, 0.15, 0.85);
    } else if (modality == Modality::sound) {
        spec = NetworkSpec::make(modality, 1, 0, 4, stat);
        spec.deep[0].kernel = {9};
        spec.deep[0].stride = {3};
        f0 = random_uniform({40}, rng, -1.0, 1.0);
        f = random_uniform({40}, rng, -0.8, 0.8);
    } else {
        spec = NetworkSpec::make(modality, 1, 0, 3, stat);
        f0 = random_uniform({6, 6, 4, 3}, rng, 0.0, 1.0);
        f = random_uniform({6, 6, 4, 3}, rng, 0.15, 0.85);
    }
    EnergyNet net(spec, rng.next_u64());
    LayerStats stats = exemplar_stats(net, f0);

    Case c;
    c.name = "energy d" + std::string(to_string(modality)) + "/" + to_string(stat) + " (f path)";
    c.leaves = {f};
    const NetworkSpec cspec = spec;
    std::vector<Tensor> weights = net.weights();
    c.expr = [cspec, weights, stats](const std::vector<Tensor>& a) {
        return energy_expr(cspec, weights, a[0], stats);
    };
    return c;
}

Case energy_weight_case(Rng& rng, int which) {
    const StatKind stat = which % 2 == 0 ? StatKind::gram : StatKind::mean;
    NetworkSpec spec = NetworkSpec::make(Modality::image, 2, 0, 3, stat);
    EnergyNet net(spec, rng.next_u64());
    Tensor f0 = random_uniform({10, 10, 3}, rng, 0.0, 1.0);
    Tensor f = random_uniform({10, 10, 3}, rng, 0.1, 0.9);

    Case c;
    c.name = std::string("energy ") + to_string(stat) + " (w path)";
    c.leaves = net.weights();
    const NetworkSpec cspec = spec;
    c.expr = [cspec, f, f0](const std::vector<Tensor>& w) {
        return energy_pair_expr(cspec, w, f, f0);
    };
    return c;
}

Case generator_case(Rng& rng) {
    GeneratorSpec spec = GeneratorSpec::make(Modality::sound);
    spec.octaves = 2;
    spec.octave_channels = 2;
    GeneratorNet gen(spec, rng.next_u64());
    NoisePyramid z = sample_noise(spec, {16}, rng.next_u64());
    Tensor target = random_uniform({16}, rng, -0.4, 0.4);

    Case c;
    c.name = "generator blocks";
    c.leaves = gen.weights();
    const GeneratorSpec cspec = spec;
    c.expr = [cspec, z, target](const std::vector<Tensor>& w) {
        return frob_diff(generate_expr(cspec, w, z), target);
    };
    return c;
}

}  // namespace

GradCheckReport run_gradient_suite(std::uint64_t seed, int cases_per_op, std::ostream* log) {
    GradCheckReport report;
    Rng rng(substream(seed, 0xFD));

    auto run_group = [&](const char* label, const std::function<Case(int)>& make) {
        if (log) *log << label << "\n";
        for (int i = 0; i < cases_per_op; ++i) {
            Case c = make(i);
            check_case(c, rng, 5, &report, nullptr);
        }
    };

    run_group("conv 1-D", [&](int) { return conv_case(rng, 1); });
    run_group("conv 2-D", [&](int) { return conv_case(rng, 2); });
    run_group("conv 3-D", [&](int) { return conv_case(rng, 3); });
    run_group("hard sigmoid", [&](int) { return hard_sigmoid_case(rng); });
    run_group("gram statistic", [&](int) { return gram_case(rng); });
    run_group("mean statistic", [&](int) { return mean_case(rng); });
    run_group("frobenius norm", [&](int) { return norm_case(rng); });
    run_group("energy, sample path", [&](int i) { return energy_sample_case(rng, i); });
    run_group("energy, weight path", [&](int i) { return energy_weight_case(rng, i); });
    run_group("generator blocks", [&](int) { return generator_case(rng); });

    if (log) {
        *log << "cases " << report.cases << ", components " << report.components
             << ", kink skips " << report.kink_skips << ", failures " << report.failures
             << "\n";
        for (const std::string& note : report.notes) *log << "  " << note << "\n";
    }
    return report;
}

}  // namespace cgtex
