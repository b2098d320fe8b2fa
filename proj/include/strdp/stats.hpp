// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "strdp/errors.hpp"
#include "strdp/tensor.hpp"

namespace strdp {

/// Floor applied to a channel's standard deviation before dividing by it,
/// so zero-variance channels degrade to the reference mean instead of NaN.
inline constexpr double kStdFloor = 1e-5;

/// Eigenvalue clamp used when whitening a channel covariance.
inline constexpr double kEigClamp = 1e-5;

/// Per-channel mean and population (divide-by-N) standard deviation of a
/// feature map, the instance-normalization convention.
template <typename Scalar>
struct ChannelStats {
    Eigen::Vector<Scalar, Eigen::Dynamic> mean;
    Eigen::Vector<Scalar, Eigen::Dynamic> std;

    Eigen::Index channels() const { return mean.size(); }
};

/// Channel-wise mean/std of x. Accumulates in double regardless of the
/// storage scalar.
template <typename Scalar>
ChannelStats<Scalar> channel_stats(const Tensor3<Scalar>& x) {
    if (!x.all_finite()) {
        throw InvalidInputError("channel_stats: feature map has non-finite entries");
    }
    ChannelStats<Scalar> s;
    s.mean.resize(x.channels());
    s.std.resize(x.channels());
    for (Eigen::Index c = 0; c < x.channels(); ++c) {
        const auto row = x.mat().row(c).template cast<double>();
        const double m = row.mean();
        const double var = (row.array() - m).square().mean();
        s.mean[c] = static_cast<Scalar>(m);
        s.std[c] = static_cast<Scalar>(std::sqrt(var));
    }
    return s;
}

/// AdaIN against precomputed reference statistics: per channel,
///   out = std_ref * (x - mean_x) / max(std_x, kStdFloor) + mean_ref.
/// Output spatial shape equals x's.
template <typename Scalar>
Tensor3<Scalar> adain(const Tensor3<Scalar>& x, const ChannelStats<Scalar>& ref) {
    if (ref.channels() != x.channels()) {
        throw ShapeError("adain: reference stats cover " + std::to_string(ref.channels()) +
                         " channels, feature map has " + std::to_string(x.channels()));
    }
    const ChannelStats<Scalar> own = channel_stats(x);
    Tensor3<Scalar> out(x.channels(), x.height(), x.width());
    for (Eigen::Index c = 0; c < x.channels(); ++c) {
        const Scalar scale = ref.std[c] / std::max(own.std[c], static_cast<Scalar>(kStdFloor));
        out.mat().row(c) =
            ((x.mat().row(c).array() - own.mean[c]) * scale + ref.mean[c]).matrix();
    }
    return out;
}

/// AdaIN(x, y): replace x's per-channel mean/std with y's. Spatial sizes of
/// x and y may differ; channel counts must match.
template <typename Scalar>
Tensor3<Scalar> adain(const Tensor3<Scalar>& x, const Tensor3<Scalar>& y) {
    if (x.channels() != y.channels()) {
        throw ShapeError("adain: channel mismatch (" + std::to_string(x.channels()) + " vs " +
                         std::to_string(y.channels()) + ")");
    }
    return adain(x, channel_stats<Scalar>(y));
}

/// Whitening-coloring transform: x is whitened to identity channel
/// covariance, recolored with y's covariance, and shifted to y's channel
/// means. Whitening eigenvalues are clamped at kEigClamp before the inverse
/// square root; coloring eigenvalues are floored at zero so the square root
/// stays real. Computed in double.
template <typename Scalar>
Tensor3<Scalar> wct(const Tensor3<Scalar>& x, const Tensor3<Scalar>& y) {
    if (x.channels() != y.channels()) {
        throw ShapeError("wct: channel mismatch (" + std::to_string(x.channels()) + " vs " +
                         std::to_string(y.channels()) + ")");
    }
    if (!x.all_finite() || !y.all_finite()) {
        throw InvalidInputError("wct: feature map has non-finite entries");
    }
    using Mat = Eigen::MatrixXd;
    using Vec = Eigen::VectorXd;

    Mat xc = x.mat().template cast<double>();
    Mat yc = y.mat().template cast<double>();
    const Vec mu_x = xc.rowwise().mean();
    const Vec mu_y = yc.rowwise().mean();
    xc.colwise() -= mu_x;
    yc.colwise() -= mu_y;

    const Mat cov_x = xc * xc.transpose() / static_cast<double>(x.pixels());
    const Mat cov_y = yc * yc.transpose() / static_cast<double>(y.pixels());

    Eigen::SelfAdjointEigenSolver<Mat> es_x(cov_x);
    Eigen::SelfAdjointEigenSolver<Mat> es_y(cov_y);
    const Vec inv_sqrt_x = es_x.eigenvalues().cwiseMax(kEigClamp).cwiseSqrt().cwiseInverse();
    const Vec sqrt_y = es_y.eigenvalues().cwiseMax(0.0).cwiseSqrt();

    const Mat whiten =
        es_x.eigenvectors() * inv_sqrt_x.asDiagonal() * es_x.eigenvectors().transpose();
    const Mat color =
        es_y.eigenvectors() * sqrt_y.asDiagonal() * es_y.eigenvectors().transpose();

    Mat res = color * (whiten * xc);
    res.colwise() += mu_y;

    Tensor3<Scalar> out(x.channels(), x.height(), x.width());
    out.mat() = res.cast<Scalar>();
    return out;
}

} // namespace strdp
