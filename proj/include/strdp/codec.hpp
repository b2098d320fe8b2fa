// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "strdp/container.hpp"
#include "strdp/errors.hpp"
#include "strdp/nn.hpp"
#include "strdp/tensor.hpp"

namespace strdp {

enum class CodecKind { Identity, Toy };

struct CodecConfig {
    CodecKind kind = CodecKind::Identity;
    int factor = 8;          // spatial downsampling, toy mode
    int latent_channels = 4; // toy mode
    std::uint64_t seed = 0;
};

/// Image <-> latent codec interface. Implementations are deterministic and
/// immutable after construction.
template <typename Scalar>
class Codec {
public:
    virtual ~Codec() = default;
    virtual Tensor3<Scalar> encode(const Tensor3<Scalar>& image) const = 0;
    virtual Tensor3<Scalar> decode(const Tensor3<Scalar>& latent) const = 0;
    virtual int latent_channels() const = 0;
    virtual int factor() const = 0;
    virtual std::vector<ArrayEntry> export_params(const std::string& prefix) const = 0;
};

/// Latent space == image space, bit-exact both ways. The testing and
/// debugging workhorse.
template <typename Scalar>
class IdentityCodec final : public Codec<Scalar> {
public:
    Tensor3<Scalar> encode(const Tensor3<Scalar>& image) const override {
        check_image(image);
        return image;
    }
    Tensor3<Scalar> decode(const Tensor3<Scalar>& latent) const override {
        if (latent.channels() != 3) {
            throw ShapeError("identity codec: latent must have 3 channels");
        }
        return latent;
    }
    int latent_channels() const override { return 3; }
    int factor() const override { return 1; }
    std::vector<ArrayEntry> export_params(const std::string&) const override { return {}; }

private:
    static void check_image(const Tensor3<Scalar>& img) {
        if (img.channels() != 3 || img.pixels() < 1) {
            throw ShapeError("identity codec: expected a 3xHxW image");
        }
    }
};

/// Untrained stand-in with realistic latent shapes: a single strided
/// (patchifying) convolution down, a transposed convolution back up, seeded
/// random weights. Decoded values are clipped to [0, 1]. Not a visual-quality
/// claim; it exists so the pipeline runs at real latent sizes.
template <typename Scalar>
class ToyCodec final : public Codec<Scalar> {
public:
    explicit ToyCodec(const CodecConfig& cfg) : factor_(cfg.factor), latent_ch_(cfg.latent_channels) {
        if (factor_ < 1 || latent_ch_ < 1) {
            throw ConfigError("toy codec: factor and latent_channels must be positive");
        }
        Rng rng(cfg.seed);
        enc_ = Conv2d<Scalar>(3, latent_ch_, factor_, factor_, 0, rng, kInitStd);
        const int ff = factor_ * factor_;
        dec_weight_.resize(3 * ff, latent_ch_);
        detail::fill_normal(dec_weight_, rng, kInitStd);
        dec_bias_.resize(3);
        detail::fill_normal(dec_bias_, rng, kInitStd);
    }

    Tensor3<Scalar> encode(const Tensor3<Scalar>& image) const override {
        if (image.channels() != 3) {
            throw ShapeError("toy codec: expected a 3-channel image");
        }
        if (image.height() % factor_ != 0 || image.width() % factor_ != 0) {
            throw ShapeError("toy codec: image " + std::to_string(image.height()) + "x" +
                             std::to_string(image.width()) + " not divisible by factor " +
                             std::to_string(factor_));
        }
        return enc_.apply(image);
    }

    Tensor3<Scalar> decode(const Tensor3<Scalar>& latent) const override {
        if (latent.channels() != latent_ch_) {
            throw ShapeError("toy codec: latent has " + std::to_string(latent.channels()) +
                             " channels, codec expects " + std::to_string(latent_ch_));
        }
        // Transposed conv with kernel == stride: every output pixel belongs
        // to exactly one patch, so a GEMM plus scatter covers it.
        typename Tensor3<Scalar>::Matrix patches = dec_weight_ * latent.mat();
        Tensor3<Scalar> out(3, latent.height() * factor_, latent.width() * factor_);
        for (int co = 0; co < 3; ++co) {
            auto dst = out.plane(co);
            for (int dy = 0; dy < factor_; ++dy) {
                for (int dx = 0; dx < factor_; ++dx) {
                    const Eigen::Index prow = (static_cast<Eigen::Index>(co) * factor_ + dy) * factor_ + dx;
                    for (Eigen::Index y = 0; y < latent.height(); ++y) {
                        for (Eigen::Index x = 0; x < latent.width(); ++x) {
                            dst(y * factor_ + dy, x * factor_ + dx) =
                                patches(prow, y * latent.width() + x) + dec_bias_[co];
                        }
                    }
                }
            }
        }
        out.mat() = out.mat().cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
        return out;
    }

    int latent_channels() const override { return latent_ch_; }
    int factor() const override { return factor_; }

    std::vector<ArrayEntry> export_params(const std::string& prefix) const override {
        std::vector<ArrayEntry> out;
        enc_.export_params(prefix + ".enc", out);
        out.push_back({prefix + ".dec.weight",
                       {static_cast<std::uint64_t>(dec_weight_.rows()),
                        static_cast<std::uint64_t>(dec_weight_.cols())},
                       detail::to_vector(dec_weight_.data(),
                                         static_cast<std::size_t>(dec_weight_.size()))});
        out.push_back({prefix + ".dec.bias",
                       {3},
                       detail::to_vector(dec_bias_.data(),
                                         static_cast<std::size_t>(dec_bias_.size()))});
        return out;
    }

    void import_params(const std::string& prefix, const std::vector<ArrayEntry>& entries) {
        enc_.import_params(prefix + ".enc", entries);
        detail::load_into<Scalar>(entries, prefix + ".dec.weight", dec_weight_);
        detail::load_into<Scalar>(entries, prefix + ".dec.bias", dec_bias_);
    }

private:
    static constexpr double kInitStd = 0.02;

    int factor_;
    int latent_ch_;
    Conv2d<Scalar> enc_;
    typename Tensor3<Scalar>::Matrix dec_weight_; // (3*f*f) x latent_ch
    Eigen::Vector<Scalar, Eigen::Dynamic> dec_bias_;
};

template <typename Scalar>
std::unique_ptr<Codec<Scalar>> make_codec(const CodecConfig& cfg) {
    if (cfg.kind == CodecKind::Identity) {
        return std::make_unique<IdentityCodec<Scalar>>();
    }
    return std::make_unique<ToyCodec<Scalar>>(cfg);
}

} // namespace strdp
