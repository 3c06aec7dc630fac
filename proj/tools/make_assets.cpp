// Regenerates the synthetic exemplars shipped under assets/. Everything is
// deterministic closed-form content, so the files are reproducible.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "cgtex/texture_io.hpp"

using namespace cgtex;
namespace fs = std::filesystem;

namespace {

Tensor periodic_image(int n) {
    // period-8 pattern, low contrast, distinct per-channel phases
    const double base[3] = {0.55, 0.50, 0.45};
    const int px[3] = {0, 1, 2};
    const int py[3] = {0, 2, 1};
    Tensor t({n, n, 3});
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = base[c];
                v += 0.08 * std::sin(2.0 * M_PI * (x + px[c]) / 8.0) *
                     std::sin(2.0 * M_PI * (y + py[c]) / 8.0);
                v += 0.04 * std::sin(2.0 * M_PI * (x + y + c) / 4.0);
                t.data()[(static_cast<std::int64_t>(y) * n + x) * 3 + c] =
                    static_cast<float>(v);
            }
    return t;
}

Tensor pulse_train(int n) {
    // damped ring every 256 samples
    Tensor t({n});
    for (int i = 0; i < n; ++i) {
        const int phase = i % 256;
        double v = 0.7 * std::exp(-phase / 40.0) * std::sin(2.0 * M_PI * phase / 16.0);
        v += 0.05 * std::sin(2.0 * M_PI * i / 64.0);
        t.data()[i] = static_cast<float>(v);
    }
    return t;
}

Tensor drifting_pattern(int n, int frames) {
    Tensor t({n, n, frames, 3});
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int f = 0; f < frames; ++f)
                for (int c = 0; c < 3; ++c) {
                    const double v =
                        0.5 + 0.12 * std::sin(2.0 * M_PI * (x + 2 * f + c) / 8.0) *
                                  std::sin(2.0 * M_PI * (y + c) / 8.0);
                    t.data()[((static_cast<std::int64_t>(y) * n + x) * frames + f) * 3 + c] =
                        static_cast<float>(v);
                }
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string dir = argc > 1 ? argv[1] : "assets";
    fs::create_directories(dir);

    save_image(periodic_image(64), dir + "/periodic64.png");
    save_sound(pulse_train(16384), 22050, dir + "/pulse_train.wav");
    save_frames(drifting_pattern(32, 8), dir + "/dynamic8");

    // 16x16 hole centered in a 64x64 domain
    {
        std::vector<std::uint8_t> flags(64 * 64, 0);
        for (int y = 24; y < 40; ++y)
            for (int x = 24; x < 40; ++x) flags[y * 64 + x] = 1;
        save_mask(make_mask({64, 64}, std::move(flags), 0), dir + "/mask16.png");
    }

    std::printf("assets written to %s\n", dir.c_str());
    return 0;
}
