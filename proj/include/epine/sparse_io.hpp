#pragma once

#include <cstdint>
#include <filesystem>

#include "epine/modes.hpp"
#include "epine/sparse_matrix.hpp"

namespace epine {

/// Metadata stored in front of a persisted matrix.
struct MatrixFileHeader {
  MatmulMode matmul_mode = MatmulMode::multiplicative;
  MaskMode mask_mode = MaskMode::rectified;
  std::int32_t order = 0;
  std::uint64_t fingerprint = 0;
};

struct StoredMatrix {
  SparseMatrix matrix;
  MatrixFileHeader header;
};

// Binary layout (little-endian):
//   "EPSM" u32 version, i64 rows, i64 cols, i64 nnz, u8 matmul_mode,
//   u8 mask_mode, u16 reserved, i32 order, u64 fingerprint,
//   i64 row_ptr[rows + 1], i32 col_idx[nnz], f64 values[nnz],
//   u64 FNV-1a checksum of every preceding byte.
void write_matrix_binary(const std::filesystem::path& path,
                         const SparseMatrix& matrix,
                         const MatrixFileHeader& header);

/// Throws ChecksumError on a corrupt or truncated file.
StoredMatrix read_matrix_binary(const std::filesystem::path& path);

/// One "i j value" line per stored entry, row-major.
void write_triplets_text(const std::filesystem::path& path,
                         const SparseMatrix& matrix);

}  // namespace epine
