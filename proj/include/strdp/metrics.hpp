// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

#include "strdp/errors.hpp"
#include "strdp/nn.hpp"
#include "strdp/tensor.hpp"

namespace strdp {

namespace detail {
template <typename Scalar>
void check_equal_images(const Tensor3<Scalar>& x, const Tensor3<Scalar>& y, const char* op) {
    if (!x.same_shape(y)) {
        throw ShapeError(std::string(op) + ": images must have identical shapes");
    }
    if (x.size() == 0) {
        throw ShapeError(std::string(op) + ": empty image");
    }
}
} // namespace detail

/// Fixed random convolutional stack standing in for a pretrained perceptual
/// network: three tap layers at decreasing resolution, middle tap used for
/// content comparisons. He-scaled seeded weights, never trained, so losses
/// are meaningful ordinally but not comparable with any published numbers.
template <typename Scalar>
class FeatureExtractor {
public:
    static constexpr int kTapCount = 3;
    static constexpr int kContentTap = 1;

    explicit FeatureExtractor(std::uint64_t seed = 0) {
        Rng rng(seed);
        conv1_ = Conv2d<Scalar>(3, 8, 3, 1, 1, rng, he_std(3));
        conv2_ = Conv2d<Scalar>(8, 16, 3, 2, 1, rng, he_std(8));
        conv3_ = Conv2d<Scalar>(16, 32, 3, 2, 1, rng, he_std(16));
    }

    std::array<Tensor3<Scalar>, kTapCount> taps(const Tensor3<Scalar>& image) const {
        if (image.channels() != 3) {
            throw ShapeError("feature extractor: expected a 3-channel image");
        }
        std::array<Tensor3<Scalar>, kTapCount> out;
        out[0] = silu(conv1_.apply(image));
        out[1] = silu(conv2_.apply(out[0]));
        out[2] = silu(conv3_.apply(out[1]));
        return out;
    }

private:
    static double he_std(int in_ch) { return std::sqrt(2.0 / (in_ch * 9.0)); }

    Conv2d<Scalar> conv1_, conv2_, conv3_;
};

/// Mean over tap layers of the squared Frobenius distance between
/// normalized Gram matrices G = F F^T / (H*W).
template <typename Scalar>
Scalar gram_style_loss(const Tensor3<Scalar>& x, const Tensor3<Scalar>& y,
                       const FeatureExtractor<Scalar>& fe) {
    detail::check_equal_images(x, y, "gram_style_loss");
    const auto tx = fe.taps(x);
    const auto ty = fe.taps(y);
    double loss = 0.0;
    for (int i = 0; i < FeatureExtractor<Scalar>::kTapCount; ++i) {
        const Eigen::MatrixXd fx = tx[static_cast<std::size_t>(i)].mat().template cast<double>();
        const Eigen::MatrixXd fy = ty[static_cast<std::size_t>(i)].mat().template cast<double>();
        const Eigen::MatrixXd gx = fx * fx.transpose() / static_cast<double>(fx.cols());
        const Eigen::MatrixXd gy = fy * fy.transpose() / static_cast<double>(fy.cols());
        loss += (gx - gy).squaredNorm();
    }
    return static_cast<Scalar>(loss / FeatureExtractor<Scalar>::kTapCount);
}

/// Mean squared error between the content-tap features.
template <typename Scalar>
Scalar content_loss(const Tensor3<Scalar>& x, const Tensor3<Scalar>& y,
                    const FeatureExtractor<Scalar>& fe) {
    detail::check_equal_images(x, y, "content_loss");
    const auto tx = fe.taps(x);
    const auto ty = fe.taps(y);
    const auto& fx = tx[FeatureExtractor<Scalar>::kContentTap];
    const auto& fy = ty[FeatureExtractor<Scalar>::kContentTap];
    const double mse = (fx.mat().template cast<double>() - fy.mat().template cast<double>())
                           .array()
                           .square()
                           .mean();
    return static_cast<Scalar>(mse);
}

/// Peak signal-to-noise ratio in dB, capped at 100 (the MSE = 0 case).
template <typename Scalar>
Scalar psnr(const Tensor3<Scalar>& x, const Tensor3<Scalar>& y, double max_val = 1.0) {
    detail::check_equal_images(x, y, "psnr");
    const double mse =
        (x.mat().template cast<double>() - y.mat().template cast<double>()).array().square().mean();
    if (mse <= 0.0) {
        return Scalar(100);
    }
    return static_cast<Scalar>(std::min(100.0, 10.0 * std::log10(max_val * max_val / mse)));
}

/// Windowed SSIM on the channel-mean grayscale image: 8x8 windows, stride 8,
/// population moments, stabilizers C1 = (0.01 L)^2 and C2 = (0.03 L)^2 with
/// L = 1. Images smaller than a window fall back to one full-image window.
template <typename Scalar>
Scalar ssim(const Tensor3<Scalar>& x, const Tensor3<Scalar>& y) {
    detail::check_equal_images(x, y, "ssim");
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;

    Eigen::MatrixXd gx = Eigen::MatrixXd::Zero(x.height(), x.width());
    Eigen::MatrixXd gy = gx;
    for (Eigen::Index c = 0; c < x.channels(); ++c) {
        gx += x.plane(c).template cast<double>();
        gy += y.plane(c).template cast<double>();
    }
    gx /= static_cast<double>(x.channels());
    gy /= static_cast<double>(x.channels());

    const Eigen::Index win_h = std::min<Eigen::Index>(8, x.height());
    const Eigen::Index win_w = std::min<Eigen::Index>(8, x.width());
    double sum = 0.0;
    int windows = 0;
    for (Eigen::Index y0 = 0; y0 + win_h <= x.height(); y0 += 8) {
        for (Eigen::Index x0 = 0; x0 + win_w <= x.width(); x0 += 8) {
            const auto wx = gx.block(y0, x0, win_h, win_w);
            const auto wy = gy.block(y0, x0, win_h, win_w);
            const double mx = wx.mean();
            const double my = wy.mean();
            const double vx = (wx.array() - mx).square().mean();
            const double vy = (wy.array() - my).square().mean();
            const double cov = ((wx.array() - mx) * (wy.array() - my)).mean();
            sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++windows;
        }
    }
    return static_cast<Scalar>(sum / windows);
}

} // namespace strdp
