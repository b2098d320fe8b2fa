// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "strdp/codec.hpp"

using namespace strdp;

namespace {

Tensor3<double> test_image(Eigen::Index h, Eigen::Index w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor3<double> img(3, h, w);
    for (Eigen::Index i = 0; i < img.mat().size(); ++i) {
        img.mat().data()[i] = rng.uniform();
    }
    return img;
}

} // namespace

TEST_CASE("identity codec: encode/decode are bit-exact inverses") {
    IdentityCodec<double> codec;
    const auto img = test_image(6, 4, 1);
    const auto z = codec.encode(img);
    CHECK(bitwise_equal(z, img));
    CHECK(bitwise_equal(codec.decode(z), img));
    CHECK(codec.latent_channels() == 3);
    CHECK(codec.factor() == 1);
}

TEST_CASE("toy codec: paper-scale latent shape") {
    const ToyCodec<double> codec({CodecKind::Toy, 8, 4, 0});
    const auto img = test_image(512, 512, 2);
    const auto z = codec.encode(img);
    CHECK(z.channels() == 4);
    CHECK(z.height() == 64);
    CHECK(z.width() == 64);
    const auto back = codec.decode(z);
    CHECK(back.channels() == 3);
    CHECK(back.height() == 512);
    CHECK(back.width() == 512);
}

TEST_CASE("toy codec: deterministic under a fixed seed") {
    const ToyCodec<double> a({CodecKind::Toy, 4, 4, 9});
    const ToyCodec<double> b({CodecKind::Toy, 4, 4, 9});
    const auto img = test_image(16, 16, 3);
    CHECK(bitwise_equal(a.encode(img), b.encode(img)));
    CHECK(bitwise_equal(a.encode(img), a.encode(img)));
}

TEST_CASE("toy codec: decode of the zero latent is finite and in range") {
    const ToyCodec<double> codec({CodecKind::Toy, 8, 4, 0});
    const auto img = codec.decode(Tensor3<double>::zeros(4, 8, 8));
    CHECK(img.all_finite());
    CHECK(img.mat().minCoeff() >= 0.0);
    CHECK(img.mat().maxCoeff() <= 1.0);
}

TEST_CASE("toy codec: indivisible image raises ShapeError") {
    const ToyCodec<double> codec({CodecKind::Toy, 8, 4, 0});
    CHECK_THROWS_AS(codec.encode(test_image(20, 16, 4)), ShapeError);
    CHECK_THROWS_AS(codec.decode(Tensor3<double>::zeros(3, 8, 8)), ShapeError);
}

TEST_CASE("toy codec: weights round-trip through entries") {
    ToyCodec<double> a({CodecKind::Toy, 4, 4, 11});
    ToyCodec<double> b({CodecKind::Toy, 4, 4, 12});
    const auto img = test_image(16, 16, 5);
    CHECK(max_abs_diff(a.encode(img), b.encode(img)) > 0.0);
    b.import_params("c", a.export_params("c"));
    CHECK(bitwise_equal(a.encode(img), b.encode(img)));
    CHECK(bitwise_equal(a.decode(a.encode(img)), b.decode(b.encode(img))));
}

TEST_CASE("make_codec dispatches on kind") {
    CodecConfig cfg;
    cfg.kind = CodecKind::Identity;
    CHECK(make_codec<double>(cfg)->factor() == 1);
    cfg.kind = CodecKind::Toy;
    cfg.factor = 2;
    cfg.latent_channels = 5;
    CHECK(make_codec<double>(cfg)->latent_channels() == 5);
}
