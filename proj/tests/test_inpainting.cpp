#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cgtex/inpainting.hpp"
#include "cgtex/metrics.hpp"
#include "testutil.hpp"

using namespace cgtex;
using testutil::random_tensor;

namespace {

Tensor periodic_image(int n, double period = 12.0) {
    Tensor t({n, n, 3});
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int c = 0; c < 3; ++c)
                t.data()[(static_cast<std::int64_t>(y) * n + x) * 3 + c] =
                    static_cast<float>(0.5 + 0.3 * std::sin(2.0 * M_PI * (x + 3 * c) / period) *
                                                 std::cos(2.0 * M_PI * y / period));
    return t;
}

MaskRegion rect_mask(int n, int y0, int x0, int h, int w, int border) {
    std::vector<std::uint8_t> flags(static_cast<size_t>(n) * n, 0);
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) flags[static_cast<size_t>(y) * n + x] = 1;
    return make_mask({n, n}, std::move(flags), border);
}

EnergyNet tiny_net(std::uint64_t seed = 3) {
    return EnergyNet(NetworkSpec::make(Modality::image, 2, 0, 6, StatKind::gram), seed);
}

}  // namespace

TEST_CASE("planted duplicate of the closure content is found with zero energy") {
    Rng rng(1);
    Tensor img = random_tensor({48, 48, 3}, rng, 0.1, 0.9);
    MaskRegion region = rect_mask(48, 8, 8, 8, 8, 2);  // closure 12x12 at (6,6)

    // zero the hole, then plant an exact copy of the closure window at (30, 28)
    Tensor corrupted = apply_mask(img, region);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x)
            for (int c = 0; c < 3; ++c)
                corrupted.data()[(static_cast<std::int64_t>(30 + y) * 48 + 28 + x) * 3 + c] =
                    corrupted.data()[(static_cast<std::int64_t>(6 + y) * 48 + 6 + x) * 3 + c];

    EnergyNet net = tiny_net();
    TemplateMatch match = template_search(corrupted, region, net, {1, 1});
    CHECK(match.offset == std::vector<int>{30, 28});
    CHECK(match.extents == std::vector<int>{12, 12});
    CHECK(match.energy < 1e-5);
}

TEST_CASE("constant image ties break to the first scan-order candidate") {
    Tensor img = Tensor::full({32, 32, 3}, 0.5f);
    MaskRegion region = rect_mask(32, 12, 12, 6, 6, 2);
    EnergyNet net = tiny_net();
    TemplateMatch match = template_search(img, region, net, {3, 3});
    CHECK(match.offset == std::vector<int>{0, 0});
}

TEST_CASE("degenerate grid returns the single candidate") {
    Rng rng(2);
    Tensor img = random_tensor({32, 32, 3}, rng, 0.0, 1.0);
    MaskRegion region = rect_mask(32, 20, 20, 6, 6, 2);  // closure at (18..28)
    EnergyNet net = tiny_net();
    TemplateMatch match = template_search(img, region, net, {32, 32});
    CHECK(match.offset == std::vector<int>{0, 0});
}

TEST_CASE("template search matches the exhaustive stride-1 oracle") {
    Rng rng(3);
    Tensor img = random_tensor({48, 48, 3}, rng, 0.0, 1.0);
    MaskRegion region = rect_mask(48, 20, 24, 10, 8, 3);
    EnergyNet net = tiny_net(7);

    TemplateMatch got = template_search(img, region, net, {1, 1});

    // oracle: scan every offset row-major, skip overlaps, strict minimum
    std::vector<int> lo, hi;
    region.closure_bbox(&lo, &hi);
    const int eh = hi[0] - lo[0], ew = hi[1] - lo[1];
    Tensor window({eh, ew, 3});
    for (int y = 0; y < eh; ++y)
        for (int x = 0; x < ew; ++x)
            for (int c = 0; c < 3; ++c)
                window.data()[(static_cast<std::int64_t>(y) * ew + x) * 3 + c] =
                    img.at({lo[0] + y, lo[1] + x, c});
    LayerStats ref = exemplar_stats(net, window);
    double best_e = 0.0;
    std::vector<int> best_off;
    for (int oy = 0; oy + eh <= 48; ++oy)
        for (int ox = 0; ox + ew <= 48; ++ox) {
            bool overlaps = false;
            for (int y = 0; y < eh && !overlaps; ++y)
                for (int x = 0; x < ew; ++x)
                    if (region.corrupted[static_cast<size_t>(oy + y) * 48 + ox + x]) {
                        overlaps = true;
                        break;
                    }
            if (overlaps) continue;
            Tensor patch({eh, ew, 3});
            for (int y = 0; y < eh; ++y)
                for (int x = 0; x < ew; ++x)
                    for (int c = 0; c < 3; ++c)
                        patch.data()[(static_cast<std::int64_t>(y) * ew + x) * 3 + c] =
                            img.at({oy + y, ox + x, c});
            const double e = energy_value(net, patch, ref);
            if (best_off.empty() || e < best_e) {
                best_e = e;
                best_off = {oy, ox};
            }
        }
    CHECK(got.offset == best_off);
    CHECK(got.energy == doctest::Approx(best_e).epsilon(1e-9));
}

TEST_CASE("search errors when no candidate avoids the region") {
    Rng rng(4);
    Tensor img = random_tensor({16, 16, 3}, rng, 0.0, 1.0);
    MaskRegion region = rect_mask(16, 3, 3, 10, 10, 1);
    EnergyNet net(NetworkSpec::make(Modality::image, 1, 0, 4, StatKind::gram), 9);
    CHECK_THROWS_WITH_AS(template_search(img, region, net, {1, 1}),
                         doctest::Contains("no candidate"), ContractError);
}

TEST_CASE("inpainting preserves the complement exactly and improves the hole") {
    Tensor truth = periodic_image(40);
    MaskRegion region = rect_mask(40, 14, 14, 10, 10, 3);
    TextureExemplar corrupted;
    corrupted.modality = Modality::image;
    corrupted.data = apply_mask(truth, region);

    InpaintConfig cfg;
    cfg.search_steps = 2;
    cfg.update_steps = 12;
    cfg.sampler.steps = 5;
    cfg.sampler.step_size = 0.01f;
    cfg.grid_stride = {4, 4};
    cfg.spec = NetworkSpec::make(Modality::image, 2, 0, 8, StatKind::gram);
    cfg.seed = 11;

    InpaintResult r = inpaint(corrupted, region, cfg);

    // complement bit-identical to the corrupted input
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x)
            for (int c = 0; c < 3; ++c)
                if (!region.corrupted[static_cast<size_t>(y) * 40 + x])
                    CHECK(r.output.at({y, x, c}) == corrupted.data.at({y, x, c}));

    // templates never overlap the corrupted region
    REQUIRE(r.templates.size() == 2);
    for (const TemplateMatch& m : r.templates) {
        for (int y = 0; y < m.extents[0]; ++y)
            for (int x = 0; x < m.extents[1]; ++x)
                CHECK(!region.corrupted[static_cast<size_t>(m.offset[0] + y) * 40 +
                                        m.offset[1] + x]);
    }

    // the final iteration lowered the synthesis energy against its template
    CHECK(std::isfinite(r.templates.back().energy));
    CHECK(r.final_energies.back() < r.start_energies.back());

    // the filled texture is closer to the ground truth than the corrupted one
    Tensor clamped = r.output.clone();
    for (std::int64_t i = 0; i < clamped.numel(); ++i)
        clamped.data()[i] = std::clamp(clamped.data()[i], 0.0f, 1.0f);
    CHECK(ms_ssim(clamped, truth) > ms_ssim(corrupted.data, truth));
}

TEST_CASE("user-supplied template is honored and validated") {
    Tensor truth = periodic_image(32);
    MaskRegion region = rect_mask(32, 12, 12, 6, 6, 2);
    TextureExemplar corrupted;
    corrupted.modality = Modality::image;
    corrupted.data = apply_mask(truth, region);

    InpaintConfig cfg;
    cfg.search_steps = 1;
    cfg.update_steps = 3;
    cfg.sampler.steps = 3;
    cfg.spec = NetworkSpec::make(Modality::image, 1, 0, 6, StatKind::gram);
    cfg.template_offset = std::vector<int>{0, 0};
    InpaintResult r = inpaint(corrupted, region, cfg);
    CHECK(r.templates[0].offset == std::vector<int>{0, 0});

    cfg.template_offset = std::vector<int>{12, 12};  // overlaps the hole
    CHECK_THROWS_AS(inpaint(corrupted, region, cfg), ContractError);
}

TEST_CASE("sound interval inpainting preserves the complement") {
    const int n = 4000;
    Tensor truth({n});
    for (int i = 0; i < n; ++i)
        truth.data()[i] = static_cast<float>(0.6 * std::sin(2.0 * M_PI * i / 64.0));
    MaskRegion region = make_interval_mask(n, 1500, 2000, 100);
    TextureExemplar corrupted;
    corrupted.modality = Modality::sound;
    corrupted.data = apply_mask(truth, region);

    InpaintConfig cfg;
    cfg.search_steps = 2;
    cfg.update_steps = 4;
    cfg.sampler.steps = 4;
    cfg.grid_stride = {97};
    cfg.spec = NetworkSpec::make(Modality::sound, 2, 0, 8, StatKind::gram);
    cfg.seed = 13;
    InpaintResult r = inpaint(corrupted, region, cfg);

    bool hole_changed = false;
    for (int i = 0; i < n; ++i) {
        if (region.corrupted[i]) {
            if (r.output.data()[i] != corrupted.data.data()[i]) hole_changed = true;
        } else {
            CHECK(r.output.data()[i] == corrupted.data.data()[i]);
        }
    }
    CHECK(hole_changed);
}
