// SPDX-License-Identifier: Apache-2.0

#include "strdp/container.hpp"

#include <bit>
#include <memory>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <limits>
#include <set>

#include <unistd.h>

// STRD1 container, see docs/formats.md. All integers and IEEE-754 floats are
// stored little-endian regardless of host order.

namespace strdp {

namespace {

constexpr char kMagic[5] = {'S', 'T', 'R', 'D', '1'};
constexpr std::uint32_t kMaxNameLen = 4096;
constexpr std::uint32_t kMaxRank = 16;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

class Writer {
public:
    Writer(std::FILE* f, const std::string& path) : f_(f), path_(path) {}

    void bytes(const void* data, std::size_t n) {
        if (std::fwrite(data, 1, n, f_) != n) {
            throw IoError("write failed for " + path_ + ": " + std::strerror(errno));
        }
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { uint_le(v, 4); }
    void u64(std::uint64_t v) { uint_le(v, 8); }

    template <typename Float>
    void floats(const std::vector<Float>& vals) {
        using Bits = std::conditional_t<sizeof(Float) == 4, std::uint32_t, std::uint64_t>;
        std::vector<unsigned char> buf(vals.size() * sizeof(Float));
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const auto b = std::bit_cast<Bits>(vals[i]);
            for (std::size_t k = 0; k < sizeof(Float); ++k) {
                buf[i * sizeof(Float) + k] = static_cast<unsigned char>(b >> (8 * k));
            }
        }
        bytes(buf.data(), buf.size());
    }

private:
    void uint_le(std::uint64_t v, int width) {
        unsigned char buf[8];
        for (int k = 0; k < width; ++k) {
            buf[k] = static_cast<unsigned char>(v >> (8 * k));
        }
        bytes(buf, static_cast<std::size_t>(width));
    }

    std::FILE* f_;
    const std::string& path_;
};

class Reader {
public:
    Reader(std::FILE* f, const std::string& path) : f_(f), path_(path) {}

    std::size_t offset() const { return offset_; }

    void bytes(void* data, std::size_t n) {
        if (std::fread(data, 1, n, f_) != n) {
            throw FormatError("container " + path_ + ": truncated at offset " +
                              std::to_string(offset_));
        }
        offset_ += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint_le(4)); }
    std::uint64_t u64() { return uint_le(8); }

    template <typename Float>
    std::vector<Float> floats(std::uint64_t count) {
        using Bits = std::conditional_t<sizeof(Float) == 4, std::uint32_t, std::uint64_t>;
        std::vector<unsigned char> buf(count * sizeof(Float));
        bytes(buf.data(), buf.size());
        std::vector<Float> out(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            Bits b = 0;
            for (std::size_t k = 0; k < sizeof(Float); ++k) {
                b |= static_cast<Bits>(buf[i * sizeof(Float) + k]) << (8 * k);
            }
            out[i] = std::bit_cast<Float>(b);
        }
        return out;
    }

private:
    std::uint64_t uint_le(int width) {
        unsigned char buf[8];
        bytes(buf, static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int k = 0; k < width; ++k) {
            v |= static_cast<std::uint64_t>(buf[k]) << (8 * k);
        }
        return v;
    }

    std::FILE* f_;
    const std::string& path_;
    std::size_t offset_ = 0;
};

std::uint64_t remaining_bytes(std::FILE* f) {
    const long cur = std::ftell(f);
    std::fseek(f, 0, SEEK_END);
    const long end = std::ftell(f);
    std::fseek(f, cur, SEEK_SET);
    return static_cast<std::uint64_t>(end - cur);
}

} // namespace

void save_container(const std::string& path, const std::vector<ArrayEntry>& entries) {
    std::set<std::string> names;
    for (const auto& e : entries) {
        if (!names.insert(e.name).second) {
            throw FormatError("container: duplicate entry name '" + e.name + "'");
        }
        const std::uint64_t declared = e.element_count();
        const std::uint64_t held =
            e.is_f64() ? std::get<std::vector<double>>(e.values).size()
                       : std::get<std::vector<float>>(e.values).size();
        if (declared != held) {
            throw FormatError("container: entry '" + e.name + "' declares " +
                              std::to_string(declared) + " elements but holds " +
                              std::to_string(held));
        }
    }

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) {
        throw IoError("cannot open " + path + " for writing: " + std::strerror(errno));
    }
    Writer w(f.get(), path);
    w.bytes(kMagic, sizeof(kMagic));
    w.u64(entries.size());
    for (const auto& e : entries) {
        w.u32(static_cast<std::uint32_t>(e.name.size()));
        w.bytes(e.name.data(), e.name.size());
        w.u8(e.is_f64() ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) {
            w.u64(d);
        }
        if (e.is_f64()) {
            w.floats(std::get<std::vector<double>>(e.values));
        } else {
            w.floats(std::get<std::vector<float>>(e.values));
        }
    }
    if (std::fflush(f.get()) != 0 || ::fsync(fileno(f.get())) != 0) {
        throw IoError("flush failed for " + path + ": " + std::strerror(errno));
    }
}

std::vector<ArrayEntry> load_container(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) {
        throw IoError("cannot open " + path + ": " + std::strerror(errno));
    }
    Reader r(f.get(), path);

    char magic[sizeof(kMagic)];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("container " + path + ": bad magic at offset 0");
    }
    const std::uint64_t count = r.u64();

    std::vector<ArrayEntry> entries;
    std::set<std::string> names;
    for (std::uint64_t i = 0; i < count; ++i) {
        ArrayEntry e;
        const std::uint32_t name_len = r.u32();
        if (name_len == 0 || name_len > kMaxNameLen) {
            throw FormatError("container " + path + ": implausible name length at offset " +
                              std::to_string(r.offset() - 4));
        }
        e.name.resize(name_len);
        r.bytes(e.name.data(), name_len);
        if (!names.insert(e.name).second) {
            throw FormatError("container " + path + ": duplicate entry name '" + e.name + "'");
        }
        const std::uint8_t dtype = r.u8();
        if (dtype > 1) {
            throw FormatError("container " + path + ": unknown dtype at offset " +
                              std::to_string(r.offset() - 1));
        }
        const std::uint32_t rank = r.u32();
        if (rank > kMaxRank) {
            throw FormatError("container " + path + ": implausible rank at offset " +
                              std::to_string(r.offset() - 4));
        }
        e.shape.resize(rank);
        std::uint64_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            e.shape[k] = r.u64();
            if (e.shape[k] != 0 && n > std::numeric_limits<std::uint64_t>::max() / e.shape[k]) {
                throw FormatError("container " + path + ": shape overflow at offset " +
                                  std::to_string(r.offset() - 8));
            }
            n *= e.shape[k];
        }
        const std::uint64_t elem_size = dtype == 1 ? 8 : 4;
        if (n > remaining_bytes(f.get()) / elem_size) {
            throw FormatError("container " + path + ": payload for '" + e.name +
                              "' exceeds the file size at offset " + std::to_string(r.offset()));
        }
        if (dtype == 1) {
            e.values = r.floats<double>(n);
        } else {
            e.values = r.floats<float>(n);
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace strdp
