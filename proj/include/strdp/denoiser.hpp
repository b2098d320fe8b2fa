// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "strdp/container.hpp"
#include "strdp/errors.hpp"
#include "strdp/nn.hpp"
#include "strdp/stats.hpp"
#include "strdp/tensor.hpp"

namespace strdp {

struct DenoiserConfig {
    int latent_channels = 4;
    int base_channels = 16;
    int levels = 2;
    std::vector<int> channel_mult; // per level; empty means 1, 2, 4, ...
    int norm_groups = 4;
    int time_embed_dim = 64;
};

/// One spatial convolution output inside the denoiser. Sites are listed in
/// forward execution order; ids are stable across runs of the same config.
struct HookSite {
    std::string id;
    int channels = 0;
    int position = 0;
};

/// Channel statistics captured at every hook site, in execution order.
template <typename Scalar>
struct StatsBundle {
    std::vector<std::pair<std::string, ChannelStats<Scalar>>> entries;
};

/// Full feature maps captured at every hook site (needed for WCT transfer).
template <typename Scalar>
struct FeatureBundle {
    std::vector<std::pair<std::string, Tensor3<Scalar>>> entries;
};

/// Receives every spatial convolution output during a forward pass, in
/// execution order, and may rewrite the activation in place.
template <typename Scalar>
class ConvObserver {
public:
    virtual ~ConvObserver() = default;
    virtual void on_conv(std::size_t index, const std::string& id,
                         Tensor3<Scalar>& activation) = 0;
};

/// Untrained denoising U-Net over latent tensors, with a hook at every
/// spatial convolution output. Two resolution paths joined by concatenation
/// skips, residual conv blocks with a sinusoidal timestep embedding added
/// per block, group normalization, SiLU. The 1x1 projections of the time
/// embedding are per-channel biases, not spatial convolutions, so they are
/// not hook sites.
///
/// Weights are drawn from a seeded stream (normal, std 0.02) and never
/// change afterwards, so const forward passes from multiple threads are
/// safe.
template <typename Scalar>
class Denoiser {
public:
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    Denoiser(const DenoiserConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        validate(cfg_);
        ch_.resize(cfg_.levels);
        for (int l = 0; l < cfg_.levels; ++l) {
            const int mult = cfg_.channel_mult.empty() ? (1 << l) : cfg_.channel_mult[l];
            ch_[l] = cfg_.base_channels * mult;
        }
        Rng rng(seed);
        const int ed = cfg_.time_embed_dim;
        time_mlp1_ = Linear<Scalar>(ed, ed, rng, kInitStd);
        time_mlp2_ = Linear<Scalar>(ed, ed, rng, kInitStd);
        conv_in_ = Conv2d<Scalar>(cfg_.latent_channels, ch_[0], 3, 1, 1, rng, kInitStd);
        for (int l = 0; l < cfg_.levels; ++l) {
            enc_.push_back(ResBlock(ch_[l], ch_[l], ed, cfg_.norm_groups, rng));
            if (l + 1 < cfg_.levels) {
                down_.emplace_back(ch_[l], ch_[l + 1], 3, 2, 1, rng, kInitStd);
            }
        }
        mid_ = ResBlock(ch_.back(), ch_.back(), ed, cfg_.norm_groups, rng);
        for (int l = 0; l + 1 < cfg_.levels; ++l) {
            up_.emplace_back(ch_[l + 1], ch_[l], 3, 1, 1, rng, kInitStd);
            dec_.push_back(ResBlock(2 * ch_[l], ch_[l], ed, cfg_.norm_groups, rng));
        }
        conv_out_ = Conv2d<Scalar>(ch_[0], cfg_.latent_channels, 3, 1, 1, rng, kInitStd);

        register_hook_sites();
    }

    const DenoiserConfig& config() const { return cfg_; }
    const std::vector<HookSite>& hook_sites() const { return hook_sites_; }

    /// Plain noise prediction; pure function of (weights, z, t).
    Tensor3<Scalar> forward_plain(const Tensor3<Scalar>& z, int t) const {
        return forward(z, t, nullptr);
    }

    /// Runs the plain pass while recording channel statistics at every hook
    /// site. The returned noise prediction is bitwise identical to
    /// forward_plain: observation never touches the activations.
    std::pair<Tensor3<Scalar>, StatsBundle<Scalar>> forward_capture(const Tensor3<Scalar>& z,
                                                                    int t) const {
        StatsBundle<Scalar> bundle;
        bundle.entries.reserve(hook_sites_.size());
        struct Cap final : ConvObserver<Scalar> {
            StatsBundle<Scalar>* out;
            void on_conv(std::size_t, const std::string& id, Tensor3<Scalar>& act) override {
                out->entries.emplace_back(id, channel_stats(act));
            }
        } cap;
        cap.out = &bundle;
        Tensor3<Scalar> eps = forward(z, t, &cap);
        return {std::move(eps), std::move(bundle)};
    }

    /// Like forward_capture but keeps the full feature map per site.
    std::pair<Tensor3<Scalar>, FeatureBundle<Scalar>>
    forward_capture_features(const Tensor3<Scalar>& z, int t) const {
        FeatureBundle<Scalar> bundle;
        bundle.entries.reserve(hook_sites_.size());
        struct Cap final : ConvObserver<Scalar> {
            FeatureBundle<Scalar>* out;
            void on_conv(std::size_t, const std::string& id, Tensor3<Scalar>& act) override {
                out->entries.emplace_back(id, act);
            }
        } cap;
        cap.out = &bundle;
        Tensor3<Scalar> eps = forward(z, t, &cap);
        return {std::move(eps), std::move(bundle)};
    }

    /// The statistics-constrained pass: every hook site's activation is
    /// renormalized to the bundled reference statistics before downstream
    /// layers consume it, so the constraint cascades through the whole
    /// network. When post_stats is given, the statistics of each transformed
    /// activation are recorded there (instrumentation for tests/reports).
    Tensor3<Scalar> forward_transfer(const Tensor3<Scalar>& z, int t,
                                     const StatsBundle<Scalar>& stats,
                                     StatsBundle<Scalar>* post_stats = nullptr) const {
        struct Xfer final : ConvObserver<Scalar> {
            const StatsBundle<Scalar>* stats;
            StatsBundle<Scalar>* post;
            void on_conv(std::size_t index, const std::string& id,
                         Tensor3<Scalar>& act) override {
                if (index >= stats->entries.size() || stats->entries[index].first != id) {
                    throw BundleMismatchError("forward_transfer: stats bundle has no entry for site '" +
                                              id + "' at position " + std::to_string(index));
                }
                act = adain(act, stats->entries[index].second);
                if (post) {
                    post->entries.emplace_back(id, channel_stats(act));
                }
            }
        } xfer;
        xfer.stats = &stats;
        xfer.post = post_stats;
        return forward(z, t, &xfer);
    }

    /// Same cascade with the whitening-coloring transform per site, which
    /// needs the style pass's full feature maps rather than just statistics.
    Tensor3<Scalar> forward_transfer_wct(const Tensor3<Scalar>& z, int t,
                                         const FeatureBundle<Scalar>& features,
                                         FeatureBundle<Scalar>* post_features = nullptr) const {
        struct Xfer final : ConvObserver<Scalar> {
            const FeatureBundle<Scalar>* feats;
            FeatureBundle<Scalar>* post;
            void on_conv(std::size_t index, const std::string& id,
                         Tensor3<Scalar>& act) override {
                if (index >= feats->entries.size() || feats->entries[index].first != id) {
                    throw BundleMismatchError("forward_transfer_wct: feature bundle has no entry for site '" +
                                              id + "' at position " + std::to_string(index));
                }
                act = wct(act, feats->entries[index].second);
                if (post) {
                    post->entries.emplace_back(id, act);
                }
            }
        } xfer;
        xfer.feats = &features;
        xfer.post = post_features;
        return forward(z, t, &xfer);
    }

    /// Generic forward pass; obs (if any) sees every hook site in order.
    Tensor3<Scalar> forward(const Tensor3<Scalar>& z, int t, ConvObserver<Scalar>* obs) const {
        check_input(z);
        Ctx ctx{obs, 0};
        Vector e = time_mlp1_.apply(sinusoidal_embedding<Scalar>(static_cast<double>(t),
                                                                 cfg_.time_embed_dim));
        e = silu_vec(e);
        e = time_mlp2_.apply(e);

        Tensor3<Scalar> h = conv_in_.apply(z);
        emit(ctx, "conv_in", h);

        std::vector<Tensor3<Scalar>> skips;
        for (int l = 0; l < cfg_.levels; ++l) {
            h = enc_[static_cast<std::size_t>(l)].apply(h, e, ctx, "enc" + std::to_string(l), *this);
            if (l + 1 < cfg_.levels) {
                skips.push_back(h);
                h = down_[static_cast<std::size_t>(l)].apply(h);
                emit(ctx, "down" + std::to_string(l), h);
            }
        }
        h = mid_.apply(h, e, ctx, "mid", *this);
        for (int l = cfg_.levels - 2; l >= 0; --l) {
            h = upsample_nearest_2x(h);
            h = up_[static_cast<std::size_t>(l)].apply(h);
            emit(ctx, "up" + std::to_string(l), h);
            h = concat_channels(h, skips[static_cast<std::size_t>(l)]);
            h = dec_[static_cast<std::size_t>(l)].apply(h, e, ctx, "dec" + std::to_string(l),
                                                       *this);
        }
        h = group_norm(h, cfg_.norm_groups);
        h = silu(h);
        h = conv_out_.apply(h);
        emit(ctx, "conv_out", h);

        if (!hook_sites_.empty() && ctx.index != hook_sites_.size()) {
            throw PipelineError("denoiser: hook traversal out of sync");
        }
        return h;
    }

    std::vector<ArrayEntry> export_params(const std::string& prefix) const {
        std::vector<ArrayEntry> out;
        time_mlp1_.export_params(prefix + ".time_mlp1", out);
        time_mlp2_.export_params(prefix + ".time_mlp2", out);
        conv_in_.export_params(prefix + ".conv_in", out);
        for (std::size_t l = 0; l < enc_.size(); ++l) {
            enc_[l].export_params(prefix + ".enc" + std::to_string(l), out);
        }
        for (std::size_t l = 0; l < down_.size(); ++l) {
            down_[l].export_params(prefix + ".down" + std::to_string(l), out);
        }
        mid_.export_params(prefix + ".mid", out);
        for (std::size_t l = 0; l < up_.size(); ++l) {
            up_[l].export_params(prefix + ".up" + std::to_string(l), out);
        }
        for (std::size_t l = 0; l < dec_.size(); ++l) {
            dec_[l].export_params(prefix + ".dec" + std::to_string(l), out);
        }
        conv_out_.export_params(prefix + ".conv_out", out);
        return out;
    }

    void import_params(const std::string& prefix, const std::vector<ArrayEntry>& entries) {
        time_mlp1_.import_params(prefix + ".time_mlp1", entries);
        time_mlp2_.import_params(prefix + ".time_mlp2", entries);
        conv_in_.import_params(prefix + ".conv_in", entries);
        for (std::size_t l = 0; l < enc_.size(); ++l) {
            enc_[l].import_params(prefix + ".enc" + std::to_string(l), entries);
        }
        for (std::size_t l = 0; l < down_.size(); ++l) {
            down_[l].import_params(prefix + ".down" + std::to_string(l), entries);
        }
        mid_.import_params(prefix + ".mid", entries);
        for (std::size_t l = 0; l < up_.size(); ++l) {
            up_[l].import_params(prefix + ".up" + std::to_string(l), entries);
        }
        for (std::size_t l = 0; l < dec_.size(); ++l) {
            dec_[l].import_params(prefix + ".dec" + std::to_string(l), entries);
        }
        conv_out_.import_params(prefix + ".conv_out", entries);
    }

private:
    static constexpr double kInitStd = 0.02;

    struct Ctx {
        ConvObserver<Scalar>* obs;
        std::size_t index;
    };

    /// Residual block: GN -> SiLU -> conv1 -> +time bias -> GN -> SiLU ->
    /// conv2, added to the (possibly 1x1-projected) input. Both 3x3 convs
    /// and the projection are hook sites.
    struct ResBlock {
        Conv2d<Scalar> conv1, conv2;
        Linear<Scalar> time_proj;
        std::optional<Conv2d<Scalar>> skip;
        int groups = 1;

        ResBlock() = default;
        ResBlock(int in_ch, int out_ch, int embed_dim, int groups_, Rng& rng)
            : conv1(in_ch, out_ch, 3, 1, 1, rng, kInitStd),
              conv2(out_ch, out_ch, 3, 1, 1, rng, kInitStd),
              time_proj(embed_dim, out_ch, rng, kInitStd), groups(groups_) {
            if (in_ch != out_ch) {
                skip.emplace(in_ch, out_ch, 1, 1, 0, rng, kInitStd);
            }
        }

        Tensor3<Scalar> apply(const Tensor3<Scalar>& x, const Vector& emb, Ctx& ctx,
                              const std::string& id, const Denoiser& d) const {
            Tensor3<Scalar> h = group_norm(x, groups);
            h = silu(h);
            h = conv1.apply(h);
            d.emit(ctx, id + ".conv1", h);
            const Vector bias = time_proj.apply(emb);
            h.mat().colwise() += bias;
            h = group_norm(h, groups);
            h = silu(h);
            h = conv2.apply(h);
            d.emit(ctx, id + ".conv2", h);
            if (skip) {
                Tensor3<Scalar> s = skip->apply(x);
                d.emit(ctx, id + ".skip", s);
                h.mat() += s.mat();
            } else {
                h.mat() += x.mat();
            }
            return h;
        }

        void export_params(const std::string& prefix, std::vector<ArrayEntry>& sink) const {
            conv1.export_params(prefix + ".conv1", sink);
            conv2.export_params(prefix + ".conv2", sink);
            time_proj.export_params(prefix + ".time_proj", sink);
            if (skip) {
                skip->export_params(prefix + ".skip", sink);
            }
        }
        void import_params(const std::string& prefix, const std::vector<ArrayEntry>& entries) {
            conv1.import_params(prefix + ".conv1", entries);
            conv2.import_params(prefix + ".conv2", entries);
            time_proj.import_params(prefix + ".time_proj", entries);
            if (skip) {
                skip->import_params(prefix + ".skip", entries);
            }
        }
    };

    static Vector silu_vec(const Vector& v) {
        return (v.array() / (Scalar(1) + (-v.array()).exp())).matrix();
    }

    static void validate(const DenoiserConfig& cfg) {
        if (cfg.latent_channels < 1 || cfg.base_channels < 1 || cfg.levels < 1) {
            throw ConfigError("denoiser: latent_channels, base_channels, levels must be positive");
        }
        if (!cfg.channel_mult.empty() &&
            cfg.channel_mult.size() != static_cast<std::size_t>(cfg.levels)) {
            throw ConfigError("denoiser: channel_mult must list one multiplier per level");
        }
        if (cfg.time_embed_dim < 2 || cfg.time_embed_dim % 2 != 0) {
            throw ConfigError("denoiser: time_embed_dim must be even and >= 2");
        }
        for (int l = 0; l < cfg.levels; ++l) {
            const int mult = cfg.channel_mult.empty() ? (1 << l) : cfg.channel_mult[l];
            if (mult < 1) {
                throw ConfigError("denoiser: channel multipliers must be positive");
            }
            const int ch = cfg.base_channels * mult;
            if (ch % cfg.norm_groups != 0 || (2 * ch) % cfg.norm_groups != 0) {
                throw ConfigError("denoiser: level " + std::to_string(l) + " channels (" +
                                  std::to_string(ch) + ") not divisible by norm_groups");
            }
        }
    }

    void check_input(const Tensor3<Scalar>& z) const {
        if (z.channels() != cfg_.latent_channels) {
            throw ShapeError("denoiser: expected " + std::to_string(cfg_.latent_channels) +
                             " latent channels, got " + std::to_string(z.channels()));
        }
        const Eigen::Index div = Eigen::Index(1) << (cfg_.levels - 1);
        if (z.height() < div || z.width() < div || z.height() % div != 0 ||
            z.width() % div != 0) {
            throw ShapeError("denoiser: latent " + std::to_string(z.height()) + "x" +
                             std::to_string(z.width()) + " not divisible by " +
                             std::to_string(div));
        }
    }

    void emit(Ctx& ctx, const std::string& id, Tensor3<Scalar>& act) const {
        if (ctx.obs) {
            ctx.obs->on_conv(ctx.index, id, act);
        }
        ++ctx.index;
    }

    /// Enumerates hook sites by running one forward pass at the smallest
    /// valid spatial size with a recording observer; the list is therefore
    /// always in sync with the traversal order.
    void register_hook_sites() {
        struct Reg final : ConvObserver<Scalar> {
            std::vector<HookSite>* out;
            void on_conv(std::size_t index, const std::string& id,
                         Tensor3<Scalar>& act) override {
                out->push_back({id, static_cast<int>(act.channels()), static_cast<int>(index)});
            }
        } reg;
        reg.out = &hook_sites_;
        const Eigen::Index s = Eigen::Index(1) << (cfg_.levels - 1);
        Tensor3<Scalar> probe(cfg_.latent_channels, s, s);
        forward(probe, 1, &reg);
    }

    DenoiserConfig cfg_;
    std::vector<int> ch_;
    Linear<Scalar> time_mlp1_, time_mlp2_;
    Conv2d<Scalar> conv_in_;
    std::vector<ResBlock> enc_;
    std::vector<Conv2d<Scalar>> down_;
    ResBlock mid_;
    std::vector<Conv2d<Scalar>> up_;   // indexed by target level
    std::vector<ResBlock> dec_;        // indexed by level
    Conv2d<Scalar> conv_out_;
    std::vector<HookSite> hook_sites_;
};

/// Builds the untrained toy denoiser from a config and weight seed.
template <typename Scalar>
Denoiser<Scalar> build_toy_denoiser(const DenoiserConfig& cfg, std::uint64_t seed) {
    return Denoiser<Scalar>(cfg, seed);
}

} // namespace strdp
