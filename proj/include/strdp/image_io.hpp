// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "strdp/tensor.hpp"

namespace strdp {

/// Reads an 8-bit PNG into a 3 x H x W tensor with values in [0, 1].
/// Grayscale and palette images are promoted to RGB; an alpha channel is
/// stripped. 16-bit PNGs are rejected with FormatError.
Tensor3<double> read_image(const std::string& path);

/// Writes a 3 x H x W tensor as an 8-bit RGB PNG. Values are clipped to
/// [0, 1] and rounded to the nearest of 256 levels; encoder settings are
/// fixed so identical tensors produce identical files.
void write_image(const std::string& path, const Tensor3<double>& image);

} // namespace strdp
