// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <cmath>
#include <set>

#include "strdp/denoiser.hpp"

using namespace strdp;

namespace {

DenoiserConfig small_config() {
    DenoiserConfig cfg;
    cfg.latent_channels = 4;
    cfg.base_channels = 8;
    cfg.levels = 2;
    cfg.norm_groups = 4;
    cfg.time_embed_dim = 16;
    return cfg;
}

Tensor3<double> latent(std::uint64_t seed, Eigen::Index c = 4, Eigen::Index hw = 8) {
    Rng rng(seed);
    return Tensor3<double>::random_normal(c, hw, hw, rng);
}

// Number of spatial convolutions implied by the architecture: conv_in and
// conv_out, two convs per encoder block, one downsample per level joint,
// two in the mid block, and per decoder level one upsample conv plus a
// block with two convs and a 1x1 projection (the concat doubles channels).
int expected_hook_count(int levels) {
    return 2 + 2 * levels + 2 + (levels - 1) * (1 + 1 + 3);
}

// Records raw activations without touching them.
struct ActivationDump final : ConvObserver<double> {
    std::vector<std::pair<std::string, Tensor3<double>>> acts;
    void on_conv(std::size_t, const std::string& id, Tensor3<double>& a) override {
        acts.emplace_back(id, a);
    }
};

} // namespace

TEST_CASE("denoiser: output shape equals input shape") {
    const Denoiser<double> d(small_config(), 0);
    const auto z = latent(1);
    const auto eps = d.forward_plain(z, 1);
    CHECK(eps.channels() == z.channels());
    CHECK(eps.height() == z.height());
    CHECK(eps.width() == z.width());
}

TEST_CASE("denoiser: same seed, identical weights; different seed, different") {
    const Denoiser<double> a(small_config(), 7);
    const Denoiser<double> b(small_config(), 7);
    const Denoiser<double> c(small_config(), 8);
    const auto ea = a.export_params("d");
    const auto eb = b.export_params("d");
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
        CHECK(ea[i].name == eb[i].name);
        CHECK(std::get<std::vector<double>>(ea[i].values) ==
              std::get<std::vector<double>>(eb[i].values));
    }
    const auto z = latent(2);
    CHECK(bitwise_equal(a.forward_plain(z, 3), b.forward_plain(z, 3)));
    CHECK(max_abs_diff(a.forward_plain(z, 3), c.forward_plain(z, 3)) > 0.0);
}

TEST_CASE("denoiser: hook site count follows the architecture formula") {
    for (int levels : {1, 2, 3}) {
        DenoiserConfig cfg = small_config();
        cfg.levels = levels;
        const Denoiser<double> d(cfg, 0);
        CHECK(static_cast<int>(d.hook_sites().size()) == expected_hook_count(levels));
        std::set<std::string> ids;
        for (const auto& site : d.hook_sites()) {
            ids.insert(site.id);
        }
        CHECK(ids.size() == d.hook_sites().size()); // unique ids
    }
}

TEST_CASE("denoiser: timestep embedding is wired") {
    const Denoiser<double> d(small_config(), 0);
    const auto z = latent(3);
    const auto e1 = d.forward_plain(z, 1);
    const auto eT = d.forward_plain(z, 50);
    CHECK(max_abs_diff(e1, eT) > 1e-9);
}

TEST_CASE("denoiser: capture is passive (bitwise) and covers all sites once") {
    const Denoiser<double> d(small_config(), 1);
    const auto z = latent(4);
    const auto plain = d.forward_plain(z, 5);
    const auto [eps, stats] = d.forward_capture(z, 5);
    CHECK(bitwise_equal(eps, plain));
    REQUIRE(stats.entries.size() == d.hook_sites().size());
    for (std::size_t i = 0; i < stats.entries.size(); ++i) {
        CHECK(stats.entries[i].first == d.hook_sites()[i].id);
        CHECK(stats.entries[i].second.channels() == d.hook_sites()[i].channels);
    }
}

TEST_CASE("denoiser: captured stats match an activation-dump oracle") {
    const Denoiser<double> d(small_config(), 2);
    const auto z = latent(5);
    const auto [eps, stats] = d.forward_capture(z, 7);
    (void)eps;
    ActivationDump dump;
    d.forward(z, 7, &dump);
    REQUIRE(dump.acts.size() == stats.entries.size());
    for (std::size_t i = 0; i < dump.acts.size(); ++i) {
        const auto& act = dump.acts[i].second;
        // brute-force recomputation per channel
        for (Eigen::Index c = 0; c < act.channels(); ++c) {
            double sum = 0;
            for (Eigen::Index p = 0; p < act.pixels(); ++p) {
                sum += act.mat()(c, p);
            }
            const double mean = sum / static_cast<double>(act.pixels());
            double sq = 0;
            for (Eigen::Index p = 0; p < act.pixels(); ++p) {
                const double dv = act.mat()(c, p) - mean;
                sq += dv * dv;
            }
            const double sd = std::sqrt(sq / static_cast<double>(act.pixels()));
            CHECK(std::abs(stats.entries[i].second.mean[c] - mean) < 1e-9);
            CHECK(std::abs(stats.entries[i].second.std[c] - sd) < 1e-9);
        }
    }
}

TEST_CASE("denoiser: self-captured stats make transfer collapse to plain") {
    const Denoiser<double> d(small_config(), 3);
    const auto z = latent(6);
    const auto plain = d.forward_plain(z, 4);
    const auto [eps, stats] = d.forward_capture(z, 4);
    (void)eps;
    const auto xfer = d.forward_transfer(z, 4, stats);
    CHECK(max_abs_diff(xfer, plain) < 1e-5);
}

TEST_CASE("denoiser: transferred activations carry the style statistics") {
    const Denoiser<double> d(small_config(), 4);
    const auto z_c = latent(7);
    const auto z_s = latent(8);
    const auto [eps, style_stats] = d.forward_capture(z_s, 9);
    (void)eps;
    StatsBundle<double> post;
    const auto out = d.forward_transfer(z_c, 9, style_stats, &post);
    REQUIRE(post.entries.size() == style_stats.entries.size());
    for (std::size_t i = 0; i < post.entries.size(); ++i) {
        const auto& got = post.entries[i].second;
        const auto& want = style_stats.entries[i].second;
        for (Eigen::Index c = 0; c < got.channels(); ++c) {
            CHECK(std::abs(got.mean[c] - want.mean[c]) <= 1e-5);
            CHECK(std::abs(got.std[c] - want.std[c]) <= 1e-5 * (1.0 + want.std[c]));
        }
    }
    // And the result differs from the plain pass: the transfer is real.
    CHECK(max_abs_diff(out, d.forward_plain(z_c, 9)) > 1e-6);
}

TEST_CASE("denoiser: stats from a foreign architecture are rejected") {
    const Denoiser<double> d(small_config(), 5);
    DenoiserConfig other = small_config();
    other.levels = 1;
    const Denoiser<double> d1(other, 5);
    const auto z = latent(9);
    const auto [eps, short_stats] = d1.forward_capture(z, 2);
    (void)eps;
    CHECK_THROWS_AS(d.forward_transfer(z, 2, short_stats), BundleMismatchError);

    // Truncated bundle fails too.
    auto [eps2, stats] = d.forward_capture(z, 2);
    (void)eps2;
    stats.entries.pop_back();
    CHECK_THROWS_AS(d.forward_transfer(z, 2, stats), BundleMismatchError);
}

TEST_CASE("denoiser: WCT transfer equals AdaIN transfer on single-channel sites") {
    // One resolution level: every conv sits behind a group norm, so site
    // variances stay far above both epsilon guards and the C = 1 reduction
    // of WCT to AdaIN is exact up to rounding.
    DenoiserConfig cfg;
    cfg.latent_channels = 1;
    cfg.base_channels = 1;
    cfg.levels = 1;
    cfg.channel_mult = {1};
    cfg.norm_groups = 1;
    cfg.time_embed_dim = 8;
    const Denoiser<double> d(cfg, 6);
    for (const auto& site : d.hook_sites()) {
        CHECK(site.channels == 1);
    }
    const auto z_c = latent(10, 1, 8);
    const auto z_s = latent(11, 1, 8);
    const auto [e1, stats] = d.forward_capture(z_s, 3);
    (void)e1;
    const auto [e2, feats] = d.forward_capture_features(z_s, 3);
    (void)e2;
    const auto via_adain = d.forward_transfer(z_c, 3, stats);
    const auto via_wct = d.forward_transfer_wct(z_c, 3, feats);
    CHECK(max_abs_diff(via_wct, via_adain) < 1e-4);
}

TEST_CASE("denoiser: WCT transfer matches per-site covariance") {
    // 32x32 latent keeps every hook site at >= C^2 spatial samples, the
    // regime where the recolored covariance is exact up to rounding.
    const Denoiser<double> d(small_config(), 7);
    const auto z_c = latent(12, 4, 32);
    const auto z_s = latent(13, 4, 32);
    const auto [eps, feats] = d.forward_capture_features(z_s, 6);
    (void)eps;
    FeatureBundle<double> post;
    d.forward_transfer_wct(z_c, 6, feats, &post);
    REQUIRE(post.entries.size() == feats.entries.size());
    for (std::size_t i = 0; i < post.entries.size(); ++i) {
        const auto& a = post.entries[i].second;
        const auto& b = feats.entries[i].second;
        const Eigen::MatrixXd am = a.mat();
        const Eigen::MatrixXd bm = b.mat();
        const Eigen::VectorXd ma = am.rowwise().mean();
        const Eigen::VectorXd mb = bm.rowwise().mean();
        const Eigen::MatrixXd ca = (am.colwise() - ma) * (am.colwise() - ma).transpose() /
                                   static_cast<double>(a.pixels());
        const Eigen::MatrixXd cb = (bm.colwise() - mb) * (bm.colwise() - mb).transpose() /
                                   static_cast<double>(b.pixels());
        CHECK((ca - cb).cwiseAbs().maxCoeff() < 1e-4);
    }
}

TEST_CASE("denoiser: hook order identical between capture and transfer") {
    const Denoiser<double> d(small_config(), 8);
    const auto z = latent(14);
    const auto [eps, stats] = d.forward_capture(z, 2);
    (void)eps;
    StatsBundle<double> post;
    d.forward_transfer(z, 2, stats, &post);
    REQUIRE(post.entries.size() == stats.entries.size());
    for (std::size_t i = 0; i < post.entries.size(); ++i) {
        CHECK(post.entries[i].first == stats.entries[i].first);
    }
}

TEST_CASE("denoiser: weight export/import round-trips bitwise") {
    const Denoiser<double> a(small_config(), 20);
    Denoiser<double> b(small_config(), 21);
    const auto z = latent(15);
    CHECK(max_abs_diff(a.forward_plain(z, 1), b.forward_plain(z, 1)) > 0.0);
    b.import_params("net", a.export_params("net"));
    CHECK(bitwise_equal(a.forward_plain(z, 1), b.forward_plain(z, 1)));
}

TEST_CASE("denoiser: config validation") {
    DenoiserConfig cfg = small_config();
    cfg.norm_groups = 3;
    CHECK_THROWS_AS(Denoiser<double>(cfg, 0), ConfigError);
    cfg = small_config();
    cfg.levels = 0;
    CHECK_THROWS_AS(Denoiser<double>(cfg, 0), ConfigError);
    cfg = small_config();
    cfg.channel_mult = {1, 2, 4};
    CHECK_THROWS_AS(Denoiser<double>(cfg, 0), ConfigError);
    cfg = small_config();
    cfg.time_embed_dim = 9;
    CHECK_THROWS_AS(Denoiser<double>(cfg, 0), ConfigError);
}

TEST_CASE("denoiser: latent shape validation") {
    const Denoiser<double> d(small_config(), 0);
    CHECK_THROWS_AS(d.forward_plain(Tensor3<double>::zeros(3, 8, 8), 1), ShapeError);
    CHECK_THROWS_AS(d.forward_plain(Tensor3<double>::zeros(4, 7, 8), 1), ShapeError);
}

TEST_CASE("denoiser: float instantiation compiles and runs") {
    const Denoiser<float> d(small_config(), 0);
    Rng rng(30);
    const auto z = Tensor3<float>::random_normal(4, 8, 8, rng);
    const auto out = d.forward_plain(z, 1);
    CHECK(out.all_finite());
}
