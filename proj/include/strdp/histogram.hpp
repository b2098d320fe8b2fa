// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "strdp/errors.hpp"
#include "strdp/tensor.hpp"

namespace strdp {

/// Per-channel histogram matching by exact sorted-rank interpolation: each
/// src pixel is replaced by the ref value at the same empirical quantile.
/// Ties keep their stable sort order, so the mapping is monotone. Sizes of
/// src and ref may differ; output is clipped to [0, 1].
template <typename Scalar>
Tensor3<Scalar> histogram_match(const Tensor3<Scalar>& src, const Tensor3<Scalar>& ref) {
    if (src.size() == 0 || ref.size() == 0) {
        throw ShapeError("histogram_match: empty image");
    }
    if (src.channels() != ref.channels()) {
        throw ShapeError("histogram_match: channel count mismatch");
    }
    const Eigen::Index ns = src.pixels();
    const Eigen::Index nr = ref.pixels();
    Tensor3<Scalar> out(src.channels(), src.height(), src.width());

    std::vector<Eigen::Index> order(static_cast<std::size_t>(ns));
    std::vector<Scalar> ref_sorted(static_cast<std::size_t>(nr));
    for (Eigen::Index c = 0; c < src.channels(); ++c) {
        const Scalar* s = src.data() + c * ns;
        const Scalar* r = ref.data() + c * nr;
        Scalar* o = out.data() + c * ns;

        std::iota(order.begin(), order.end(), Eigen::Index(0));
        std::stable_sort(order.begin(), order.end(),
                         [s](Eigen::Index a, Eigen::Index b) { return s[a] < s[b]; });
        std::copy(r, r + nr, ref_sorted.begin());
        std::sort(ref_sorted.begin(), ref_sorted.end());

        for (Eigen::Index rank = 0; rank < ns; ++rank) {
            // Position in the ref quantile function; integer product first
            // so self-matching lands exactly on rank.
            const double pos = ns > 1
                                   ? static_cast<double>(rank) * static_cast<double>(nr - 1) /
                                         static_cast<double>(ns - 1)
                                   : static_cast<double>(nr - 1) / 2.0;
            const auto lo = static_cast<Eigen::Index>(pos);
            const Eigen::Index hi = std::min(lo + 1, nr - 1);
            const double frac = pos - static_cast<double>(lo);
            const double v = (1.0 - frac) * static_cast<double>(ref_sorted[static_cast<std::size_t>(lo)]) +
                             frac * static_cast<double>(ref_sorted[static_cast<std::size_t>(hi)]);
            o[order[static_cast<std::size_t>(rank)]] =
                static_cast<Scalar>(std::clamp(v, 0.0, 1.0));
        }
    }
    return out;
}

} // namespace strdp
