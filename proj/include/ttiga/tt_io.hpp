#pragma once

// Binary container for TT tensors and operators. Layout (all little-endian):
//   magic "TTC1" | u32 kind (0 tensor, 1 matrix) | u64 d
//   | d x u64 row modes | d x u64 col modes (1 for tensors) | (d+1) x u64 ranks
//   | f64 payload of each core in ascending order, column-major within a core

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <variant>

#include "ttiga/tt.hpp"

namespace ttiga {

class TtIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using TtObject = std::variant<TtTensor, TtMatrix>;

void write_tt(std::ostream& os, const TtTensor& t);
void write_tt(std::ostream& os, const TtMatrix& t);
TtObject read_tt(std::istream& is);

void save_tt(const std::filesystem::path& path, const TtObject& t);
TtObject load_tt(const std::filesystem::path& path);

} // namespace ttiga
