#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "fvg/mask.hpp"
#include "fvg/moments.hpp"

namespace fvg {

/// Binary precompute cache, little-endian. Section 1 holds the moment
/// coefficient table ("FVGC" magic, format version, L, max_order, grid
/// dims, then f64 re/im pairs in storage order, then a CRC32 of all section
/// bytes). Section 2, when present, appends the mask bank (per mask:
/// center, profile parameters, 1-D polynomial, fit residual, Upsilon
/// payload) with its own trailing CRC32.
namespace cache {

inline constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

struct Writer {
    std::vector<std::uint8_t> bytes;

    template <typename T> void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const std::size_t off = bytes.size();
        bytes.resize(off + sizeof(T));
        std::memcpy(bytes.data() + off, &v, sizeof(T));
    }
    void put_complex(const Complex& c) {
        put<double>(c.real());
        put<double>(c.imag());
    }
};

struct Reader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;

    template <typename T> T get() {
        if (pos + sizeof(T) > size) throw std::runtime_error("cache: truncated file");
        T v;
        std::memcpy(&v, data + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    Complex get_complex() {
        const double re = get<double>();
        const double im = get<double>();
        return {re, im};
    }
};

inline std::uint32_t checksum(const std::uint8_t* data, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(n)));
}

} // namespace detail

inline void write(const std::string& path, const MomentCoefficientTable& table,
                  const MaskBank* bank = nullptr) {
    detail::Writer w;
    w.bytes.insert(w.bytes.end(), {'F', 'V', 'G', 'C'});
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(table.bandwidth()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(table.max_order()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(table.grid_height()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(table.grid_width()));
    for (const Complex& c : table.raw()) w.put_complex(c);
    w.put<std::uint32_t>(detail::checksum(w.bytes.data(), w.bytes.size()));

    if (bank) {
        const std::size_t section_start = w.bytes.size();
        w.put<std::uint32_t>(static_cast<std::uint32_t>(bank->size()));
        for (std::size_t k = 0; k < bank->size(); ++k) {
            const MaskSpec& s = bank->specs()[k];
            const PolynomialMask& p = bank->polynomials()[k];
            w.put<double>(s.center.x());
            w.put<double>(s.center.y());
            w.put<double>(s.center.z());
            w.put<double>(s.z0);
            w.put<double>(s.r);
            w.put<double>(s.sigma);
            w.put<std::uint32_t>(static_cast<std::uint32_t>(s.profile_exponent));
            w.put<std::uint32_t>(static_cast<std::uint32_t>(p.degree));
            for (double a : p.coeffs) w.put<double>(a);
            w.put<double>(p.fit_residual);
        }
        for (const Complex& c : bank->upsilon_raw()) w.put_complex(c);
        w.put<std::uint32_t>(detail::checksum(w.bytes.data() + section_start,
                                              w.bytes.size() - section_start));
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cache: cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
    if (!out) throw std::runtime_error("cache: write failed for " + path);
}

struct Loaded {
    std::shared_ptr<MomentCoefficientTable> table;
    std::optional<MaskBank> bank;
};

inline Loaded load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cache: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    detail::Reader r{bytes.data(), bytes.size()};
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.get<std::uint8_t>());
    if (std::string(magic, 4) != "FVGC") throw std::runtime_error("cache: bad magic in " + path);
    const auto version = r.get<std::uint32_t>();
    if (version != kFormatVersion)
        throw std::runtime_error("cache: unsupported format version " + std::to_string(version));
    const int L = static_cast<int>(r.get<std::uint32_t>());
    const int max_order = static_cast<int>(r.get<std::uint32_t>());
    const int height = static_cast<int>(r.get<std::uint32_t>());
    const int width = static_cast<int>(r.get<std::uint32_t>());

    Loaded out;
    out.table = std::make_shared<MomentCoefficientTable>(L, max_order, height, width);
    for (Complex& c : out.table->raw_mutable()) c = r.get_complex();
    const std::size_t section1_end = r.pos;
    const auto crc1 = r.get<std::uint32_t>();
    if (crc1 != detail::checksum(bytes.data(), section1_end))
        throw std::runtime_error("cache: CRC mismatch in coefficient section of " + path);

    if (r.pos < r.size) {
        const std::size_t section_start = r.pos;
        const auto n_masks = r.get<std::uint32_t>();
        std::vector<MaskSpec> specs;
        std::vector<PolynomialMask> polys;
        for (std::uint32_t k = 0; k < n_masks; ++k) {
            MaskSpec s;
            s.center.x() = r.get<double>();
            s.center.y() = r.get<double>();
            s.center.z() = r.get<double>();
            s.z0 = r.get<double>();
            s.r = r.get<double>();
            s.sigma = r.get<double>();
            s.profile_exponent = static_cast<int>(r.get<std::uint32_t>());
            PolynomialMask p;
            p.degree = static_cast<int>(r.get<std::uint32_t>());
            p.coeffs.resize(p.degree + 1);
            for (double& a : p.coeffs) a = r.get<double>();
            p.fit_residual = r.get<double>();
            specs.push_back(s);
            polys.push_back(std::move(p));
        }
        std::vector<Complex> upsilon(n_masks * MaskBank::kOrders * out.table->lm_count());
        for (Complex& c : upsilon) c = r.get_complex();
        const std::size_t section2_end = r.pos;
        const auto crc2 = r.get<std::uint32_t>();
        if (crc2 != detail::checksum(bytes.data() + section_start, section2_end - section_start))
            throw std::runtime_error("cache: CRC mismatch in mask-bank section of " + path);
        out.bank = MaskBank::from_precomputed(std::move(specs), std::move(polys), out.table,
                                              std::move(upsilon));
    }
    return out;
}

} // namespace cache
} // namespace fvg
