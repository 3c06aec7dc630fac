#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "cgtex/generator.hpp"
#include "testutil.hpp"

using namespace cgtex;
using testutil::bit_identical;
using testutil::fd_component;
using testutil::grad_close;

TEST_CASE("noise pyramid extents halve exactly") {
    GeneratorSpec spec = GeneratorSpec::make(Modality::image);
    REQUIRE(spec.octaves == 5);
    NoisePyramid z = sample_noise(spec, {64, 64}, 1);
    REQUIRE(z.octaves.size() == 5);
    int expect = 64;
    for (int o = 0; o < 5; ++o) {
        CHECK(z.octaves[o].shape() == std::vector<int>{expect, expect, 1});
        expect /= 2;
    }
}

TEST_CASE("single-octave pyramid is the target size") {
    GeneratorSpec spec = GeneratorSpec::make(Modality::sound);
    spec.octaves = 1;
    NoisePyramid z = sample_noise(spec, {100}, 2);
    REQUIRE(z.octaves.size() == 1);
    CHECK(z.octaves[0].shape() == std::vector<int>{100, 1});
}

TEST_CASE("pyramid determinism and divisibility errors") {
    GeneratorSpec spec = GeneratorSpec::make(Modality::image);
    NoisePyramid a = sample_noise(spec, {32, 64}, 7);
    NoisePyramid b = sample_noise(spec, {32, 64}, 7);
    for (int o = 0; o < spec.octaves; ++o)
        CHECK(bit_identical(a.octaves[o], b.octaves[o]));

    CHECK_THROWS_WITH_AS(sample_noise(spec, {60, 64}, 1), doctest::Contains("multiples of 16"),
                         ContractError);
}

TEST_CASE("generation shape contract holds at other sizes (full convolutionality)") {
    GeneratorSpec spec = GeneratorSpec::make(Modality::image);
    spec.octave_channels = 4;
    GeneratorNet net(spec, 3);

    Tensor at_train = generate(net, sample_noise(spec, {64, 64}, 1));
    CHECK(at_train.shape() == std::vector<int>{64, 64, 3});
    for (std::int64_t i = 0; i < at_train.numel(); ++i) {
        CHECK(at_train.data()[i] >= 0.0f);
        CHECK(at_train.data()[i] <= 1.0f);
    }

    Tensor larger = generate(net, sample_noise(spec, {128, 128}, 2));
    CHECK(larger.shape() == std::vector<int>{128, 128, 3});

    GeneratorSpec mismatched = spec;
    mismatched.octaves = 3;
    NoisePyramid z3 = sample_noise(mismatched, {64, 64}, 1);
    CHECK_THROWS_AS(generate(net, z3), ContractError);
}

TEST_CASE("sound expansion sizes: train at 16384, generate 122880 samples") {
    GeneratorSpec spec = GeneratorSpec::make(Modality::sound);
    spec.octave_channels = 4;
    GeneratorNet net(spec, 5);
    Tensor small = generate(net, sample_noise(spec, {16384}, 9));
    CHECK(small.shape() == std::vector<int>{16384});
    for (std::int64_t i = 0; i < small.numel(); ++i) {
        CHECK(small.data()[i] >= -1.0f);
        CHECK(small.data()[i] <= 1.0f);
    }
    Tensor big = generate(net, sample_noise(spec, {122880}, 10));
    CHECK(big.shape() == std::vector<int>{122880});
}

TEST_CASE("dynamic expansion pyramid admits 48 frames of 512x512") {
    GeneratorSpec spec = GeneratorSpec::make(Modality::dynamic);
    REQUIRE(spec.octaves == 3);
    NoisePyramid z = sample_noise(spec, {512, 512, 48}, 11);
    CHECK(z.octaves[0].shape() == std::vector<int>{512, 512, 48, 1});
    CHECK(z.octaves[2].shape() == std::vector<int>{128, 128, 12, 1});

    // generation itself, exercised at a desk-scale size
    spec.octave_channels = 2;
    GeneratorNet net(spec, 6);
    Tensor out = generate(net, sample_noise(spec, {16, 16, 8}, 12));
    CHECK(out.shape() == std::vector<int>{16, 16, 8, 3});
}

TEST_CASE("different seeds give different outputs") {
    GeneratorSpec spec = GeneratorSpec::make(Modality::image);
    spec.octave_channels = 4;
    GeneratorNet net(spec, 13);
    Tensor a = generate(net, sample_noise(spec, {32, 32}, 100));
    Tensor b = generate(net, sample_noise(spec, {32, 32}, 101));
    CHECK(!bit_identical(a, b));
}

TEST_CASE("gradients flow to every octave path, residual blocks and output conv") {
    GeneratorSpec spec = GeneratorSpec::make(Modality::sound);
    spec.octaves = 2;
    spec.octave_channels = 2;
    GeneratorNet net(spec, 17);
    NoisePyramid z = sample_noise(spec, {16}, 21);
    Tensor target({16});

    Tape tape;
    std::vector<Tensor> watched;
    for (const Tensor& w : net.weights()) watched.push_back(tape.watch(w));
    Tensor out = generate_expr(spec, watched, z);
    Tensor loss = frob_diff(out, target);
    const double scale = loss.item();
    Gradients gr = tape.backward(loss);

    auto fn = [&](const std::vector<Tensor>& args) {
        return static_cast<double>(frob_diff(generate_expr(spec, args, z), target).item());
    };
    Rng pick(23);
    for (size_t wi = 0; wi < net.weights().size(); ++wi) {
        Tensor g = gr.grad(watched[wi]);
        bool nonzero = false;
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (g.data()[i] != 0.0f) nonzero = true;
        CHECK(nonzero);  // every path receives gradient
        for (int t = 0; t < 4; ++t) {
            std::int64_t i = static_cast<std::int64_t>(pick.next_u64() % g.numel());
            CHECK(grad_close(g.data()[i], fd_component(fn, net.weights(), wi, i), scale));
        }
    }
}

TEST_CASE("generator checkpoint round trip") {
    namespace fs = std::filesystem;
    GeneratorSpec spec = GeneratorSpec::make(Modality::image);
    spec.octave_channels = 2;
    GeneratorNet net(spec, 29);
    NamedTensors tensors;
    append_generator_net(net, &tensors);
    const std::string path = (fs::temp_directory_path() / "cgtex_gen_test.cgcn").string();
    save_checkpoint(path, tensors);
    GeneratorNet back = generator_net_from_checkpoint(spec, load_checkpoint(path));
    for (size_t i = 0; i < net.weights().size(); ++i)
        CHECK(bit_identical(net.weights()[i], back.weights()[i]));
    fs::remove(path);

    GeneratorSpec sp2 = GeneratorSpec::from_json(spec.to_json());
    CHECK(sp2.modality == spec.modality);
    CHECK(sp2.octaves == spec.octaves);
    CHECK(sp2.octave_channels == spec.octave_channels);
}
