// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <algorithm>
#include <vector>

#include "strdp/histogram.hpp"
#include "strdp/rng.hpp"

using namespace strdp;

namespace {

Tensor3<double> random_image(Eigen::Index c, Eigen::Index h, Eigen::Index w,
                             std::uint64_t seed) {
    Rng rng(seed);
    Tensor3<double> img(c, h, w);
    for (Eigen::Index i = 0; i < img.mat().size(); ++i) {
        img.mat().data()[i] = rng.uniform();
    }
    return img;
}

// Brute-force oracle: for every src pixel, find its rank by counting, then
// interpolate the sorted reference at the matching quantile.
double quantile_map_oracle(const std::vector<double>& src_sorted,
                           const std::vector<double>& ref_sorted, std::size_t rank) {
    const std::size_t ns = src_sorted.size();
    const std::size_t nr = ref_sorted.size();
    const double pos = ns > 1 ? static_cast<double>(rank) * static_cast<double>(nr - 1) /
                                    static_cast<double>(ns - 1)
                              : static_cast<double>(nr - 1) / 2.0;
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, nr - 1);
    const double frac = pos - static_cast<double>(lo);
    return (1.0 - frac) * ref_sorted[lo] + frac * ref_sorted[hi];
}

} // namespace

TEST_CASE("histogram_match: self-match is the identity") {
    const auto img = random_image(3, 6, 5, 1);
    const auto out = histogram_match(img, img);
    CHECK(max_abs_diff(out, img) < 1e-12);
}

TEST_CASE("histogram_match: constant reference flattens each channel") {
    const auto src = random_image(2, 4, 4, 2);
    Tensor3<double> ref(2, 3, 3);
    ref.mat().row(0).setConstant(0.25);
    ref.mat().row(1).setConstant(0.75);
    const auto out = histogram_match(src, ref);
    for (Eigen::Index i = 0; i < out.pixels(); ++i) {
        CHECK(out.mat()(0, i) == doctest::Approx(0.25));
        CHECK(out.mat()(1, i) == doctest::Approx(0.75));
    }
}

TEST_CASE("histogram_match: three-pixel quantile fixture") {
    Tensor3<double> src(1, 1, 3), ref(1, 1, 3);
    src(0, 0, 0) = 0.0;
    src(0, 0, 1) = 0.5;
    src(0, 0, 2) = 1.0;
    ref(0, 0, 0) = 0.2;
    ref(0, 0, 1) = 0.2;
    ref(0, 0, 2) = 0.8;
    const auto out = histogram_match(src, ref);
    CHECK(out(0, 0, 0) == doctest::Approx(0.2));
    CHECK(out(0, 0, 1) == doctest::Approx(0.2));
    CHECK(out(0, 0, 2) == doctest::Approx(0.8));
}

TEST_CASE("histogram_match: matches the quantile oracle on random pairs") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto src = random_image(3, 5, 7, seed * 2 + 100);
        const auto ref = random_image(3, 6, 4, seed * 2 + 101); // different size
        const auto out = histogram_match(src, ref);
        for (Eigen::Index c = 0; c < 3; ++c) {
            std::vector<double> src_sorted(src.data() + c * src.pixels(),
                                           src.data() + (c + 1) * src.pixels());
            std::vector<double> ref_sorted(ref.data() + c * ref.pixels(),
                                           ref.data() + (c + 1) * ref.pixels());
            std::sort(src_sorted.begin(), src_sorted.end());
            std::sort(ref_sorted.begin(), ref_sorted.end());
            std::vector<double> out_sorted(out.data() + c * out.pixels(),
                                           out.data() + (c + 1) * out.pixels());
            std::sort(out_sorted.begin(), out_sorted.end());
            for (std::size_t r = 0; r < out_sorted.size(); ++r) {
                CHECK(out_sorted[r] ==
                      doctest::Approx(quantile_map_oracle(src_sorted, ref_sorted, r))
                          .epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("histogram_match: monotone in every channel") {
    const auto src = random_image(3, 8, 8, 40);
    const auto ref = random_image(3, 8, 8, 41);
    const auto out = histogram_match(src, ref);
    for (Eigen::Index c = 0; c < 3; ++c) {
        for (Eigen::Index i = 0; i < src.pixels(); ++i) {
            for (Eigen::Index j = i + 1; j < src.pixels(); ++j) {
                if (src.mat()(c, i) <= src.mat()(c, j)) {
                    CHECK(out.mat()(c, i) <= out.mat()(c, j));
                }
            }
        }
    }
}

TEST_CASE("histogram_match: empty image raises ShapeError") {
    CHECK_THROWS_AS(histogram_match(Tensor3<double>(), random_image(1, 2, 2, 0)), ShapeError);
    CHECK_THROWS_AS(histogram_match(random_image(1, 2, 2, 0), Tensor3<double>()), ShapeError);
    CHECK_THROWS_AS(histogram_match(random_image(2, 2, 2, 0), random_image(1, 2, 2, 0)),
                    ShapeError);
}
