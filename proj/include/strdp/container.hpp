// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "strdp/errors.hpp"

namespace strdp {

/// One named array inside an STRD1 container. The payload scalar type
/// selects the on-disk dtype (f32 or f64).
struct ArrayEntry {
    std::string name;
    std::vector<std::uint64_t> shape;
    std::variant<std::vector<float>, std::vector<double>> values;

    std::uint64_t element_count() const {
        std::uint64_t n = 1;
        for (auto d : shape) {
            n *= d;
        }
        return n;
    }
    bool is_f64() const { return values.index() == 1; }
};

/// Writes entries to an STRD1 container file (little-endian, see
/// docs/formats.md for the byte layout). The file is fsynced before return.
/// Duplicate entry names are rejected before anything is written.
void save_container(const std::string& path, const std::vector<ArrayEntry>& entries);

/// Reads an STRD1 container. Malformed input (bad magic, truncation,
/// inconsistent lengths) raises FormatError naming the failing byte offset.
std::vector<ArrayEntry> load_container(const std::string& path);

} // namespace strdp
