#pragma once

// Seeded synthetic 10-class RGB images in the canonical 3x32x32 layout, for
// smoke tests and offline runs. Each class is an oriented grating with a
// class-specific orientation, frequency, and tint; phase, position of a
// distractor blob, color jitter, and pixel noise vary per image.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "rfcl/data.hpp"
#include "rfcl/random.hpp"

namespace rfcl {

struct SyntheticSpec {
    std::size_t count = 1000;
    std::uint64_t seed = 1;
    double noise = 40.0;        // pixel noise std (0-255 scale)
    double contrast = 50.0;     // grating amplitude
    double color_jitter = 25.0; // per-image tint jitter
};

inline Dataset make_synthetic(const SyntheticSpec& spec, Split split = Split::train,
                              std::string name = "synthetic") {
    Rng rng(spec.seed);
    std::uniform_int_distribution<int> pick_class(0, static_cast<int>(kNumClasses) - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset ds;
    ds.split = split;
    ds.name = std::move(name);
    ds.images.reserve(spec.count);
    const double pi = std::numbers::pi;
    for (std::size_t n = 0; n < spec.count; ++n) {
        const int cls = pick_class(rng);
        const double angle = pi * cls / static_cast<double>(kNumClasses) + 0.15 * gauss(rng);
        const double freq = 2.0 * pi * (0.08 + 0.03 * (cls % 3));
        const double phase = 2.0 * pi * unit(rng);
        const double tint[3] = {
            128.0 + 30.0 * std::cos(2.0 * pi * cls / 10.0) + spec.color_jitter * gauss(rng),
            128.0 + 30.0 * std::sin(2.0 * pi * cls / 10.0) + spec.color_jitter * gauss(rng),
            128.0 + 30.0 * std::cos(4.0 * pi * cls / 10.0) + spec.color_jitter * gauss(rng)};
        const double bx = 32.0 * unit(rng), by = 32.0 * unit(rng);
        const double blob = 60.0 * (unit(rng) - 0.5);
        const double ca = std::cos(angle), sa = std::sin(angle);
        LabeledImage li;
        li.label = static_cast<std::uint8_t>(cls);
        li.image = Tensor3(kImageChannels, kImageSide, kImageSide);
        for (std::size_t r = 0; r < kImageSide; ++r) {
            for (std::size_t c = 0; c < kImageSide; ++c) {
                const double x = static_cast<double>(c), y = static_cast<double>(r);
                const double g = std::sin(freq * (ca * x + sa * y) + phase);
                const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                const double b = blob * std::exp(-d2 / 30.0);
                for (std::size_t ch = 0; ch < kImageChannels; ++ch) {
                    const double v = tint[ch] + spec.contrast * g * (ch == static_cast<std::size_t>(cls % 3) ? 1.0 : 0.6) +
                                     b + spec.noise * gauss(rng);
                    li.image(ch, r, c) = std::clamp(std::round(v), 0.0, 255.0);
                }
            }
        }
        ds.images.push_back(std::move(li));
    }
    return ds;
}

}  // namespace rfcl
