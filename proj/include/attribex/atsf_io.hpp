#pragma once

#include <filesystem>

#include "attribex/common.hpp"

namespace attribex {

// Dense float32 matrix file: "ATSF" magic, u32 LE version (=1), u64 LE rows,
// u64 LE cols, then rows*cols float32 LE row-major.
inline constexpr std::uint32_t kAtsfVersion = 1;

void write_atsf(const std::filesystem::path& path, const Matrix& m);
Matrix read_atsf(const std::filesystem::path& path);

// Round every entry to the nearest float32 so an in-memory matrix equals what
// read_atsf returns after write_atsf.
void round_to_float(Matrix& m);

}  // namespace attribex
