// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <cmath>

#include "strdp/metrics.hpp"

using namespace strdp;

namespace {

Tensor3<double> random_image(Eigen::Index h, Eigen::Index w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor3<double> img(3, h, w);
    for (Eigen::Index i = 0; i < img.mat().size(); ++i) {
        img.mat().data()[i] = rng.uniform();
    }
    return img;
}

// Hand-rolled Gram distance over the extractor taps.
double gram_oracle(const Tensor3<double>& x, const Tensor3<double>& y,
                   const FeatureExtractor<double>& fe) {
    const auto tx = fe.taps(x);
    const auto ty = fe.taps(y);
    double total = 0.0;
    for (int i = 0; i < FeatureExtractor<double>::kTapCount; ++i) {
        const auto& a = tx[static_cast<std::size_t>(i)];
        const auto& b = ty[static_cast<std::size_t>(i)];
        const auto n = static_cast<double>(a.pixels());
        double tap = 0.0;
        for (Eigen::Index p = 0; p < a.channels(); ++p) {
            for (Eigen::Index q = 0; q < a.channels(); ++q) {
                double ga = 0.0, gb = 0.0;
                for (Eigen::Index s = 0; s < a.pixels(); ++s) {
                    ga += a.mat()(p, s) * a.mat()(q, s);
                    gb += b.mat()(p, s) * b.mat()(q, s);
                }
                const double d = ga / n - gb / n;
                tap += d * d;
            }
        }
        total += tap;
    }
    return total / FeatureExtractor<double>::kTapCount;
}

} // namespace

TEST_CASE("gram_style_loss: zero on identical inputs, symmetric") {
    const FeatureExtractor<double> fe(0);
    const auto x = random_image(8, 8, 1);
    const auto y = random_image(8, 8, 2);
    CHECK(gram_style_loss(x, x, fe) == 0.0);
    CHECK(gram_style_loss(x, y, fe) == doctest::Approx(gram_style_loss(y, x, fe)));
    CHECK(gram_style_loss(x, y, fe) > 0.0);
}

TEST_CASE("gram_style_loss: matches the brute-force Gram oracle") {
    const FeatureExtractor<double> fe(3);
    const auto x = random_image(8, 8, 4);
    const auto y = random_image(8, 8, 5);
    CHECK(gram_style_loss(x, y, fe) == doctest::Approx(gram_oracle(x, y, fe)).epsilon(1e-6));
}

TEST_CASE("gram_style_loss: size mismatch raises ShapeError") {
    const FeatureExtractor<double> fe(0);
    CHECK_THROWS_AS(gram_style_loss(random_image(8, 8, 1), random_image(8, 12, 2), fe),
                    ShapeError);
}

TEST_CASE("content_loss: definition and oracle") {
    const FeatureExtractor<double> fe(0);
    const auto x = random_image(8, 8, 6);
    const auto y = random_image(8, 8, 7);
    CHECK(content_loss(x, x, fe) == 0.0);
    const double loss = content_loss(x, y, fe);
    CHECK(loss >= 0.0);

    // Elementwise MSE over the dumped content-tap features.
    const auto tx = fe.taps(x)[FeatureExtractor<double>::kContentTap];
    const auto ty = fe.taps(y)[FeatureExtractor<double>::kContentTap];
    double mse = 0.0;
    for (Eigen::Index i = 0; i < tx.mat().size(); ++i) {
        const double d = tx.mat().data()[i] - ty.mat().data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(tx.mat().size());
    CHECK(std::abs(loss - mse) < 1e-7);
}

TEST_CASE("psnr: fixtures") {
    const auto x = random_image(8, 8, 8);
    CHECK(psnr(x, x) == 100.0);

    // MSE exactly 0.01 -> 20 dB.
    const auto zeros = Tensor3<double>::zeros(3, 8, 8);
    const auto tenth = Tensor3<double>::constant(3, 8, 8, 0.1);
    CHECK(psnr(zeros, tenth) == doctest::Approx(20.0).epsilon(1e-12));

    // Random pair matches the direct formula.
    const auto y = random_image(8, 8, 9);
    const double mse = (x.mat() - y.mat()).array().square().mean();
    CHECK(psnr(x, y) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-6));

    CHECK_THROWS_AS(psnr(x, random_image(4, 4, 1)), ShapeError);
}

TEST_CASE("ssim: identity, symmetry, constant-shift fixture") {
    const auto x = random_image(16, 16, 10);
    const auto y = random_image(16, 16, 11);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));

    // Constant 0 vs constant 1 (= L): single-window closed form
    // (2*0*1 + C1) / (0 + 1 + C1) with C1 = 1e-4.
    const auto black = Tensor3<double>::zeros(3, 8, 8);
    const auto white = Tensor3<double>::constant(3, 8, 8, 1.0);
    const double c1 = 1e-4;
    CHECK(ssim(black, white) == doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-12));

    CHECK(ssim(x, y) > -1.0);
    CHECK(ssim(x, y) < 1.0);
}

TEST_CASE("feature extractor: deterministic taps at decreasing resolution") {
    const FeatureExtractor<double> fe(42);
    const auto img = random_image(16, 16, 12);
    const auto taps = fe.taps(img);
    CHECK(taps[0].height() == 16);
    CHECK(taps[1].height() == 8);
    CHECK(taps[2].height() == 4);
    CHECK(taps[0].channels() == 8);
    CHECK(taps[1].channels() == 16);
    CHECK(taps[2].channels() == 32);
    const FeatureExtractor<double> fe2(42);
    const auto taps2 = fe2.taps(img);
    for (int i = 0; i < 3; ++i) {
        CHECK(bitwise_equal(taps[static_cast<std::size_t>(i)],
                            taps2[static_cast<std::size_t>(i)]));
    }
}
