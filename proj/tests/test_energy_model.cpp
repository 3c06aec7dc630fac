#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cgtex/energy_model.hpp"
#include "testutil.hpp"

using namespace cgtex;
using testutil::bit_identical;
using testutil::fd_component;
using testutil::grad_close;
using testutil::random_tensor;

TEST_CASE("receptive fields of sub-networks") {
    NetworkSpec one_d = NetworkSpec::make(Modality::image, 1, 0, 64, StatKind::gram);
    CHECK(one_d.receptive_field_deep() == 3);

    NetworkSpec sound = NetworkSpec::make(Modality::sound, 4, 0, 128, StatKind::gram);
    CHECK(sound.receptive_field_deep() == 13345);
    CHECK(sound.deep[0].stride[0] == 5);
    CHECK(sound.deep[1].stride[0] == 10);
    CHECK(sound.deep[0].kernel[0] == 25);

    NetworkSpec full = NetworkSpec::make(Modality::image, 9, 3, 64, StatKind::gram);
    CHECK(full.layer_count() == 12);
    CHECK(full.receptive_field_deep() == 43);
    CHECK(full.receptive_field_shallow() == 211);
}

TEST_CASE("spec validation and errors") {
    CHECK_THROWS_AS(NetworkSpec::make(Modality::image, 0, 0, 64, StatKind::gram), SpecError);
    CHECK_THROWS_AS(NetworkSpec::make(Modality::image, 10, 0, 64, StatKind::gram), SpecError);
    CHECK_THROWS_AS(NetworkSpec::make(Modality::image, 2, 4, 64, StatKind::gram), SpecError);

    NetworkSpec spec = NetworkSpec::make(Modality::image, 9, 0, 16, StatKind::gram);
    CHECK_THROWS_AS(spec.validate_for({8, 8, 3}), SpecError);  // rf 43 > 8
    NetworkSpec small = NetworkSpec::make(Modality::image, 3, 0, 16, StatKind::gram);
    small.validate_for({16, 16, 3});  // fine
}

TEST_CASE("spec json round trip") {
    NetworkSpec spec = NetworkSpec::make(Modality::sound, 4, 0, 128, StatKind::mean);
    NetworkSpec back = NetworkSpec::from_json(spec.to_json());
    CHECK(back.modality == spec.modality);
    CHECK(back.statistic == spec.statistic);
    REQUIRE(back.deep.size() == spec.deep.size());
    for (size_t i = 0; i < spec.deep.size(); ++i) {
        CHECK(back.deep[i].kernel == spec.deep[i].kernel);
        CHECK(back.deep[i].stride == spec.deep[i].stride);
        CHECK(back.deep[i].dilation == spec.deep[i].dilation);
        CHECK(back.deep[i].out_channels == spec.deep[i].out_channels);
    }
}

TEST_CASE("weight init is deterministic and bounded by fan-in") {
    NetworkSpec spec = NetworkSpec::make(Modality::image, 2, 1, 8, StatKind::gram);
    EnergyNet a(spec, 42);
    EnergyNet b(spec, 42);
    EnergyNet c(spec, 43);
    REQUIRE(a.weights().size() == 3);
    for (size_t i = 0; i < a.weights().size(); ++i) {
        CHECK(bit_identical(a.weights()[i], b.weights()[i]));
    }
    CHECK(!bit_identical(a.weights()[0], c.weights()[0]));

    // |w| <= sqrt(1 / fan_in)
    const LayerSpec& l0 = spec.deep[0];
    std::int64_t fan_in = l0.in_channels;
    for (int k : l0.kernel) fan_in *= k;
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < a.weights()[0].numel(); ++i)
        CHECK(std::abs(a.weights()[0].data()[i]) <= bound);
}

TEST_CASE("gram statistic matches the double-loop oracle") {
    Rng rng(3);
    for (int it = 0; it < 10; ++it) {
        Tensor f = random_tensor({7, 3}, rng, 0.0, 1.0);
        Tensor g = gram_statistic(f);
        // independent double loop: G[i][j] = sum_n F[n,i] F[n,j] / N
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double acc = 0.0;
                for (int n = 0; n < 7; ++n)
                    acc += static_cast<double>(f.at({n, i})) * f.at({n, j});
                acc /= 7.0;
                CHECK(std::abs(g.at({i, j}) - acc) < 1e-6);
            }
    }
}

TEST_CASE("mean statistic matches the loop oracle") {
    Rng rng(5);
    Tensor f = random_tensor({4, 5, 3}, rng, 0.0, 1.0);
    Tensor m = mean_statistic(f);
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 5; ++x) acc += f.at({y, x, c});
        acc /= 20.0;
        CHECK(std::abs(m.data()[c] - acc) < 1e-6);
    }
}

TEST_CASE("exemplar stats: determinism, weight sensitivity, constant inputs") {
    Rng rng(11);
    NetworkSpec spec = NetworkSpec::make(Modality::image, 2, 0, 8, StatKind::gram);
    EnergyNet net(spec, 7);
    Tensor f0 = random_tensor({16, 16, 3}, rng, 0.0, 1.0);

    LayerStats s1 = exemplar_stats(net, f0);
    LayerStats s2 = exemplar_stats(net, f0);
    REQUIRE(s1.values.size() == 2);
    for (size_t l = 0; l < s1.values.size(); ++l)
        CHECK(bit_identical(s1.values[l], s2.values[l]));

    // any weight perturbation changes at least one layer's statistics
    net.weights()[0].data()[0] += 0.05f;
    net.bump_version();
    LayerStats s3 = exemplar_stats(net, f0);
    bool changed = false;
    for (size_t l = 0; l < s1.values.size(); ++l)
        if (!bit_identical(s1.values[l], s3.values[l])) changed = true;
    CHECK(changed);

    // constant exemplar: features constant per channel, Gram rank <= 1
    Tensor flat = Tensor::full({16, 16, 3}, 0.37f);
    LayerStats sc = exemplar_stats(net, flat);
    const Tensor& g = sc.values[1];
    const int c = g.shape()[0];
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j)
            for (int k = 0; k < c; ++k)
                for (int l2 = 0; l2 < c; ++l2) {
                    // all 2x2 minors of a rank-1 matrix vanish
                    const double det = static_cast<double>(g.at({i, k})) * g.at({j, l2}) -
                                       static_cast<double>(g.at({i, l2})) * g.at({j, k});
                    CHECK(std::abs(det) < 1e-6);
                }
}

TEST_CASE("energy of the exemplar against itself is exactly zero") {
    Rng rng(13);
    for (int it = 0; it < 10; ++it) {
        const bool sound = it % 2 == 1;
        NetworkSpec spec =
            sound ? NetworkSpec::make(Modality::sound, 2, 0, 8,
                                      it % 4 == 1 ? StatKind::gram : StatKind::mean)
                  : NetworkSpec::make(Modality::image, 1 + it % 3, it % 2, 8,
                                      it % 4 == 0 ? StatKind::gram : StatKind::mean);
        EnergyNet net(spec, 100 + it);
        Tensor f0 = sound ? random_tensor({600}, rng, -1.0, 1.0)
                          : random_tensor({20, 20, 3}, rng, 0.0, 1.0);
        LayerStats stats = exemplar_stats(net, f0);
        CHECK(std::abs(energy_value(net, f0, stats)) < 1e-5);
    }
}

TEST_CASE("hand-computed single-layer mean energy") {
    // one 1x1 conv, 3 -> 1 channel, mean statistic
    NetworkSpec spec;
    spec.modality = Modality::image;
    spec.statistic = StatKind::mean;
    LayerSpec l;
    l.kernel = {1, 1};
    l.stride = {1, 1};
    l.dilation = {1, 1};
    l.in_channels = 3;
    l.out_channels = 1;
    spec.deep.push_back(l);

    EnergyNet net(spec, 0);
    net.weights()[0] = Tensor::from_data({1, 1, 3, 1}, {0.2f, 0.3f, 0.4f});
    net.bump_version();

    Rng rng(17);
    Tensor f0 = random_tensor({5, 5, 3}, rng, 0.0, 1.0);
    Tensor f = random_tensor({5, 5, 3}, rng, 0.0, 1.0);

    auto hand_mean = [](const Tensor& img) {
        double acc = 0.0;
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x) {
                double v = 0.2 * img.at({y, x, 0}) + 0.3 * img.at({y, x, 1}) +
                           0.4 * img.at({y, x, 2});
                v = std::min(std::max(v, 0.0), 1.0);
                acc += v;
            }
        return acc / 25.0;
    };
    const double expected = std::abs(hand_mean(f0) - hand_mean(f));
    LayerStats stats = exemplar_stats(net, f0);
    CHECK(std::abs(energy_value(net, f, stats) - expected) < 1e-6);
}

TEST_CASE("energy is bounded by the channel sum for gram statistics") {
    Rng rng(19);
    NetworkSpec spec = NetworkSpec::make(Modality::image, 2, 1, 6, StatKind::gram);
    for (int it = 0; it < 5; ++it) {
        EnergyNet net(spec, 200 + it);
        Tensor f0 = random_tensor({18, 18, 3}, rng, 0.0, 1.0);
        Tensor f = random_tensor({18, 18, 3}, rng, -0.5, 1.5);
        LayerStats stats = exemplar_stats(net, f0);
        const double e = energy_value(net, f, stats);
        double bound = 0.0;
        for (const LayerSpec& ls : spec.deep) bound += ls.out_channels;
        for (const LayerSpec& ls : spec.shallow) bound += ls.out_channels;
        CHECK(e >= 0.0);
        CHECK(e <= bound);
    }
}

TEST_CASE("stale exemplar statistics are rejected") {
    NetworkSpec spec = NetworkSpec::make(Modality::image, 1, 0, 4, StatKind::gram);
    EnergyNet net(spec, 3);
    Tensor f0 = Tensor::full({8, 8, 3}, 0.5f);
    LayerStats stats = exemplar_stats(net, f0);
    net.weights()[0].data()[0] += 0.1f;
    net.bump_version();
    CHECK_THROWS_AS(energy_value(net, f0, stats), ContractError);
}

TEST_CASE("mean-statistic energy is exactly invariant under cyclic shift with tiling windows") {
    // kernel extent equal to stride: conv windows tile the input, so a
    // cyclic shift by one stride period permutes the window set.
    NetworkSpec spec;
    spec.modality = Modality::sound;
    spec.statistic = StatKind::mean;
    LayerSpec l;
    l.kernel = {4};
    l.stride = {4};
    l.dilation = {1};
    l.in_channels = 1;
    l.out_channels = 6;
    spec.deep.push_back(l);
    EnergyNet net(spec, 23);

    Rng rng(29);
    Tensor f0 = random_tensor({64}, rng, -1.0, 1.0);
    Tensor f = random_tensor({64}, rng, -1.0, 1.0);
    Tensor rolled({64});
    for (int i = 0; i < 64; ++i) rolled.data()[i] = f.data()[(i + 4) % 64];

    LayerStats stats = exemplar_stats(net, f0);
    const double e1 = energy_value(net, f, stats);
    const double e2 = energy_value(net, rolled, stats);
    CHECK(std::abs(e1 - e2) < 1e-6);
}

TEST_CASE("statistics are stable under 2x tiling of a periodic exemplar") {
    // periodic pattern, period 8; border effects shrink as the domain grows
    auto periodic = [](int n) {
        Tensor t({n, n, 3});
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                for (int c = 0; c < 3; ++c)
                    t.data()[(static_cast<std::int64_t>(y) * n + x) * 3 + c] =
                        0.5f + 0.25f * std::sin(2.0 * M_PI * (x + 2 * c) / 8.0) *
                                   std::sin(2.0 * M_PI * y / 8.0);
        return t;
    };
    Tensor small = periodic(32);
    Tensor big = periodic(64);  // the same texture tiled 2x

    NetworkSpec spec = NetworkSpec::make(Modality::image, 2, 0, 8, StatKind::gram);
    EnergyNet net(spec, 31);
    LayerStats ss = exemplar_stats(net, small);
    LayerStats sb = exemplar_stats(net, big);
    for (size_t l = 0; l < ss.values.size(); ++l) {
        for (std::int64_t i = 0; i < ss.values[l].numel(); ++i) {
            const double a = ss.values[l].data()[i];
            const double b = sb.values[l].data()[i];
            CHECK(std::abs(a - b) < 0.1 * std::max(std::abs(a), std::abs(b)) + 1e-3);
        }
    }
}

TEST_CASE("energy gradient w.r.t. f matches finite differences away from the kink") {
    Rng rng(37);
    NetworkSpec spec = NetworkSpec::make(Modality::image, 2, 0, 6, StatKind::gram);
    EnergyNet net(spec, 41);
    Tensor f0 = random_tensor({14, 14, 3}, rng, 0.0, 1.0);
    Tensor f = random_tensor({14, 14, 3}, rng, 0.2, 0.8);
    LayerStats stats = exemplar_stats(net, f0);

    Tape tape;
    Tensor fv = tape.watch(f);
    Tensor e = energy_expr(spec, net.weights(), fv, stats);
    const double scale = e.item();
    REQUIRE(scale > 1e-3);  // away from the E = 0 kink
    Gradients gr = tape.backward(e);
    Tensor g = gr.grad(fv);

    auto fn = [&](const std::vector<Tensor>& args) {
        return static_cast<double>(energy_expr(spec, net.weights(), args[0], stats).item());
    };
    Rng pick(43);
    for (int t = 0; t < 20; ++t) {
        std::int64_t i = static_cast<std::int64_t>(pick.next_u64() % f.numel());
        CHECK(grad_close(g.data()[i], fd_component(fn, {f}, 0, i), scale));
    }
}

TEST_CASE("checkpoint round trip preserves bytes and order") {
    namespace fs = std::filesystem;
    const std::string path =
        (fs::temp_directory_path() / "cgtex_ckpt_test.cgcn").string();
    Rng rng(47);
    NamedTensors tensors;
    tensors.emplace_back("D.deep.0", random_tensor({3, 3, 3, 4}, rng));
    tensors.emplace_back("D.deep.1", random_tensor({3, 3, 4, 4}, rng));
    tensors.emplace_back("G.oct0.conv0", random_tensor({5}, rng));
    save_checkpoint(path, tensors);
    NamedTensors back = load_checkpoint(path);
    REQUIRE(back.size() == tensors.size());
    for (size_t i = 0; i < tensors.size(); ++i) {
        CHECK(back[i].first == tensors[i].first);
        CHECK(bit_identical(back[i].second, tensors[i].second));
    }
    fs::remove(path);

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/nope.cgcn"), IoError);
}

TEST_CASE("energy net checkpoint reload") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "cgtex_net_test.cgcn").string();
    NetworkSpec spec = NetworkSpec::make(Modality::image, 2, 1, 6, StatKind::gram);
    EnergyNet net(spec, 53);
    NamedTensors tensors;
    append_energy_net(net, &tensors);
    save_checkpoint(path, tensors);
    EnergyNet back = energy_net_from_checkpoint(spec, load_checkpoint(path));
    for (size_t i = 0; i < net.weights().size(); ++i)
        CHECK(bit_identical(net.weights()[i], back.weights()[i]));
    fs::remove(path);
}
