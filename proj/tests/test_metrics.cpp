#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cgtex/metrics.hpp"
#include "msssim_reference.hpp"
#include "testutil.hpp"

using namespace cgtex;
using testutil::random_tensor;

TEST_CASE("self similarity is exactly one") {
    Rng rng(1);
    Tensor x = random_tensor({64, 64, 3}, rng, 0.0, 1.0);
    CHECK(ms_ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));

    Tensor s = random_tensor({512}, rng, -1.0, 1.0);
    CHECK(ms_ssim(s, s) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("symmetry") {
    Rng rng(2);
    Tensor a = random_tensor({48, 48, 3}, rng, 0.0, 1.0);
    Tensor b = random_tensor({48, 48, 3}, rng, 0.0, 1.0);
    CHECK(std::abs(ms_ssim(a, b) - ms_ssim(b, a)) < 1e-6);
}

TEST_CASE("shape and size contract errors") {
    Tensor a({64, 64, 3});
    Tensor b({32, 32, 3});
    CHECK_THROWS_AS(ms_ssim(a, b), ContractError);

    MsSsimConfig five;  // needs 11 * 16 = 176 per side
    Tensor small({64, 64, 3});
    CHECK_THROWS_WITH_AS(ms_ssim(small, small, five), doctest::Contains("176"), ContractError);

    // auto config downgrades the scale count and renormalizes exponents
    MsSsimConfig cfg = MsSsimConfig::for_extents({64, 64});
    CHECK(cfg.scales == 3);
    double sum = 0.0;
    for (double w : cfg.exponents) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("matches the independent reference implementation") {
    Rng rng(3);
    // correlated pair: b is a noisy version of a
    for (int trial = 0; trial < 4; ++trial) {
        Tensor a = random_tensor({96, 96, 3}, rng, 0.0, 1.0);
        Tensor b = a.clone();
        for (std::int64_t i = 0; i < b.numel(); ++i)
            b.data()[i] = std::clamp(
                b.data()[i] + static_cast<float>(rng.uniform(-0.1, 0.1) * (trial + 1) / 4.0),
                0.0f, 1.0f);
        MsSsimConfig cfg = MsSsimConfig::for_extents({96, 96});
        const double mine = ms_ssim(a, b, cfg);
        const double ref = msssim_ref::ms_ssim(a, b, cfg.scales, cfg.exponents);
        CHECK(std::abs(mine - ref) < 1e-4);
    }

    // full five-scale path on a 256-square pair
    Tensor a = random_tensor({256, 256, 3}, rng, 0.0, 1.0);
    Tensor b = a.clone();
    for (std::int64_t i = 0; i < b.numel(); ++i)
        b.data()[i] = std::clamp(b.data()[i] + static_cast<float>(rng.uniform(-0.2, 0.2)), 0.0f,
                                 1.0f);
    MsSsimConfig cfg;
    const double mine = ms_ssim(a, b, cfg);
    const double ref = msssim_ref::ms_ssim(a, b, cfg.scales, cfg.exponents);
    CHECK(std::abs(mine - ref) < 1e-4);

    // 1-D sound path
    Tensor sa = random_tensor({4096}, rng, -1.0, 1.0);
    Tensor sb = sa.clone();
    for (std::int64_t i = 0; i < sb.numel(); ++i)
        sb.data()[i] = std::clamp(sb.data()[i] + static_cast<float>(rng.uniform(-0.3, 0.3)),
                                  -1.0f, 1.0f);
    MsSsimConfig scfg = MsSsimConfig::for_extents({4096});
    CHECK(std::abs(ms_ssim(sa, sb, scfg) -
                   msssim_ref::ms_ssim(sa, sb, scfg.scales, scfg.exponents)) < 1e-4);
}

TEST_CASE("monotone degradation under increasing noise") {
    Rng rng(5);
    // smooth-ish base image so the scores are not already at the floor
    Tensor base({128, 128, 3});
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            for (int c = 0; c < 3; ++c)
                base.data()[(static_cast<std::int64_t>(y) * 128 + x) * 3 + c] =
                    0.5f + 0.3f * std::sin(2.0 * M_PI * (x + 7 * c) / 32.0) *
                               std::cos(2.0 * M_PI * y / 32.0);
    double prev = 1.0;
    for (double level : {0.02, 0.08, 0.25}) {
        Tensor noisy = base.clone();
        Rng nrng(7);
        for (std::int64_t i = 0; i < noisy.numel(); ++i)
            noisy.data()[i] = std::clamp(
                noisy.data()[i] + static_cast<float>(nrng.normal() * level), 0.0f, 1.0f);
        const double score = ms_ssim(base, noisy);
        CHECK(score < prev);
        CHECK(score >= 0.0);
        CHECK(score <= 1.0);
        prev = score;
    }
}

TEST_CASE("frame-averaged variant") {
    Rng rng(9);
    Tensor a = random_tensor({48, 48, 2, 3}, rng, 0.0, 1.0);
    CHECK(ms_ssim_frames(a, a) == doctest::Approx(1.0).epsilon(1e-9));

    Tensor b = a.clone();
    for (std::int64_t i = 0; i < b.numel(); ++i)
        b.data()[i] = std::clamp(b.data()[i] + static_cast<float>(rng.uniform(-0.2, 0.2)), 0.0f,
                                 1.0f);
    // equals the mean of the per-frame scores
    Tensor fa({48, 48, 3}), fb({48, 48, 3});
    double sum = 0.0;
    for (int t = 0; t < 2; ++t) {
        for (std::int64_t i = 0; i < 48 * 48; ++i)
            for (int c = 0; c < 3; ++c) {
                fa.data()[i * 3 + c] = a.data()[(i * 2 + t) * 3 + c];
                fb.data()[i * 3 + c] = b.data()[(i * 2 + t) * 3 + c];
            }
        sum += ms_ssim(fa, fb);
    }
    CHECK(ms_ssim_frames(a, b) == doctest::Approx(sum / 2.0).epsilon(1e-9));

    Tensor c({48, 48, 3, 3});
    CHECK_THROWS_AS(ms_ssim_frames(a, c), ContractError);
}
