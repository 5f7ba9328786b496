#include "ttiga/tt_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace ttiga {

namespace {

constexpr std::array<char, 4> kMagic{'T', 'T', 'C', '1'};
constexpr std::uint64_t kMaxDim = 64;

template <class U>
U to_le(U v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::array<unsigned char, sizeof(U)> b{};
        std::memcpy(b.data(), &v, sizeof(U));
        std::reverse(b.begin(), b.end());
        std::memcpy(&v, b.data(), sizeof(U));
    }
    return v;
}

template <class U>
void put(std::ostream& os, U v) {
    v = to_le(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <class U>
U get(std::istream& is) {
    U v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(U))) {
        throw TtIoError("truncated TT container");
    }
    return to_le(v);
}

void put_doubles(std::ostream& os, const double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
        put(os, std::bit_cast<std::uint64_t>(p[i]));
    }
}

void get_doubles(std::istream& is, double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
        p[i] = std::bit_cast<double>(get<std::uint64_t>(is));
    }
}

void put_header(std::ostream& os, std::uint32_t kind, const std::vector<int>& rows, const std::vector<int>& cols,
                const std::vector<int>& ranks) {
    os.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(os, kind);
    put<std::uint64_t>(os, rows.size());
    for (int v : rows) put<std::uint64_t>(os, static_cast<std::uint64_t>(v));
    for (int v : cols) put<std::uint64_t>(os, static_cast<std::uint64_t>(v));
    for (int v : ranks) put<std::uint64_t>(os, static_cast<std::uint64_t>(v));
}

int get_size(std::istream& is) {
    const auto v = get<std::uint64_t>(is);
    if (v == 0 || v > (1u << 30)) {
        throw TtIoError(fmt::format("invalid size {} in TT container", v));
    }
    return static_cast<int>(v);
}

} // namespace

void write_tt(std::ostream& os, const TtTensor& t) {
    put_header(os, 0, t.modes(), std::vector<int>(static_cast<std::size_t>(t.dim()), 1), t.ranks());
    for (const auto& c : t.cores()) put_doubles(os, c.data(), c.size());
    if (!os) throw TtIoError("failed writing TT container");
}

void write_tt(std::ostream& os, const TtMatrix& t) {
    put_header(os, 1, t.row_modes(), t.col_modes(), t.ranks());
    for (const auto& c : t.cores()) put_doubles(os, c.data(), c.size());
    if (!os) throw TtIoError("failed writing TT container");
}

TtObject read_tt(std::istream& is) {
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
        throw TtIoError("not a TT container (bad magic)");
    }
    const auto kind = get<std::uint32_t>(is);
    if (kind > 1) throw TtIoError(fmt::format("unknown TT container kind {}", kind));
    const auto d = get<std::uint64_t>(is);
    if (d == 0 || d > kMaxDim) throw TtIoError(fmt::format("invalid TT order {}", d));
    std::vector<int> rows(d), cols(d), ranks(d + 1);
    for (auto& v : rows) v = get_size(is);
    for (auto& v : cols) v = get_size(is);
    for (auto& v : ranks) v = get_size(is);
    if (ranks.front() != 1 || ranks.back() != 1) throw TtIoError("TT boundary ranks must be 1");
    if (kind == 0) {
        std::vector<Core3> cores;
        for (std::size_t k = 0; k < d; ++k) {
            if (cols[k] != 1) throw TtIoError("tensor container with column modes != 1");
            Core3 c(ranks[k], rows[k], ranks[k + 1]);
            get_doubles(is, c.data(), c.size());
            cores.push_back(std::move(c));
        }
        return TtTensor(std::move(cores));
    }
    std::vector<Core4> cores;
    for (std::size_t k = 0; k < d; ++k) {
        Core4 c(ranks[k], rows[k], cols[k], ranks[k + 1]);
        get_doubles(is, c.data(), c.size());
        cores.push_back(std::move(c));
    }
    return TtMatrix(std::move(cores));
}

void save_tt(const std::filesystem::path& path, const TtObject& t) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw TtIoError(fmt::format("cannot open {} for writing", tmp.string()));
        std::visit([&](const auto& v) { write_tt(os, v); }, t);
    }
    std::filesystem::rename(tmp, path);
}

TtObject load_tt(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TtIoError(fmt::format("cannot open {}", path.string()));
    return read_tt(is);
}

} // namespace ttiga
