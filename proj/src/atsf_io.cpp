#include "attribex/atsf_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include <fmt/format.h>

namespace attribex {

namespace {

static_assert(std::endian::native == std::endian::little,
              "ATSF I/O assumes a little-endian host");

constexpr std::array<char, 4> kMagic = {'A', 'T', 'S', 'F'};

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool get(std::ifstream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

}  // namespace

void write_atsf(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kMissingFile, fmt::format("cannot write {}", path.string()));
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kAtsfVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  std::vector<float> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = static_cast<float>(m(i, j));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorKind::kMissingFile, fmt::format("write failed: {}", path.string()));
}

Matrix read_atsf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingFile, fmt::format("missing file: {}", path.string()));
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error(ErrorKind::kBadMagic, fmt::format("bad magic in {}", path.string()));
  }
  std::uint32_t version = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  if (!get(in, version)) throw Error(ErrorKind::kBadVersion, fmt::format("truncated header in {}", path.string()));
  if (version != kAtsfVersion) {
    throw Error(ErrorKind::kBadVersion,
                fmt::format("unsupported ATSF version {} in {}", version, path.string()));
  }
  if (!get(in, rows) || !get(in, cols)) {
    throw Error(ErrorKind::kParse, fmt::format("truncated header in {}", path.string()));
  }

  const auto header_end = in.tellg();
  in.seekg(0, std::ios::end);
  const auto payload = static_cast<std::uint64_t>(in.tellg() - header_end);
  in.seekg(header_end);
  if (cols != 0 && payload != rows * cols * sizeof(float)) {
    throw Error(ErrorKind::kRowMismatch,
                fmt::format("{} declares {}x{} floats but holds {} bytes of data", path.string(),
                            rows, cols, payload));
  }

  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::vector<float> row(cols);
  for (std::uint64_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(cols * sizeof(float)));
    for (std::uint64_t j = 0; j < cols; ++j) {
      if (!std::isfinite(row[j])) {
        throw Error(ErrorKind::kNonFinite,
                    fmt::format("non-finite value at row {} col {} in {}", i, j, path.string()));
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return m;
}

void round_to_float(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i]);
}

}  // namespace attribex
