#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "epine/error.hpp"
#include "epine/sparse_io.hpp"
#include "epine/sparse_matrix.hpp"
#include "support/fixtures.hpp"

using namespace epine;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("epine_test_" + name);
}

}  // namespace

TEST_CASE("constructor rejects malformed CSR arrays") {
  CHECK_THROWS_AS(SparseMatrix(2, 2, {0, 2, 2}, {1, 0}, {1.0, 1.0}),
                  ValidationError);  // unsorted columns
  CHECK_THROWS_AS(SparseMatrix(2, 2, {0, 1, 1}, {0}, {0.0}),
                  ValidationError);  // stored zero
  CHECK_THROWS_AS(SparseMatrix(2, 2, {0, 1, 1}, {2}, {1.0}),
                  ValidationError);  // column out of range
  CHECK_THROWS_AS(SparseMatrix(2, 2, {0, 1}, {0}, {1.0}), ValidationError);
  CHECK_NOTHROW(SparseMatrix(2, 2, {0, 1, 2}, {1, 0}, {1.0, 2.0}));
}

TEST_CASE("from_triplets sums duplicates and drops zeros") {
  const SparseMatrix m = SparseMatrix::from_triplets(
      2, 3, {{0, 2, 1.5}, {0, 2, 0.5}, {1, 0, 0.0}, {1, 1, 3.0}});
  CHECK(m.nnz() == 2);
  CHECK(m.at(0, 2) == 2.0);
  CHECK(m.at(1, 0) == 0.0);
  CHECK(m.at(1, 1) == 3.0);
  CHECK_FALSE(m.contains(1, 0));
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{0, 0, -1.0}}),
                  ValidationError);
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}),
                  ValidationError);
}

TEST_CASE("identity, max, row sums, symmetry") {
  const SparseMatrix id = SparseMatrix::identity(3);
  CHECK(id.nnz() == 3);
  CHECK(id.is_symmetric());
  CHECK(id.max_value() == 1.0);
  const SparseMatrix m = SparseMatrix::from_triplets(2, 2, {{0, 1, 2.0}, {1, 0, 4.0}});
  CHECK_FALSE(m.is_symmetric());
  CHECK(m.row_sums() == std::vector<double>{2.0, 4.0});
  CHECK(m.max_value() == 4.0);
  CHECK(SparseMatrix(3, 3).max_value() == 0.0);
}

TEST_CASE("add merges patterns") {
  const SparseMatrix a = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, 2.0}});
  const SparseMatrix b = SparseMatrix::from_triplets(2, 2, {{0, 0, 3.0}, {0, 1, 1.0}});
  const SparseMatrix c = add(a, b, 0.5);
  CHECK(c.at(0, 0) == 2.5);
  CHECK(c.at(0, 1) == 0.5);
  CHECK(c.at(1, 1) == 2.0);
  CHECK(c.nnz() == 3);
  CHECK_THROWS_AS(add(a, SparseMatrix(3, 3)), ValidationError);
}

TEST_CASE("transpose is an involution on random matrices") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const SparseMatrix m = testing::random_sparse(13, 9, 0.3, rng);
    const SparseMatrix t = m.transposed();
    CHECK(t.rows() == 9);
    for (const Triplet& e : m.to_triplets()) CHECK(t.at(e.col, e.row) == e.value);
    CHECK(t.transposed() == m);
  }
}

TEST_CASE("binary format round-trips and detects corruption") {
  std::mt19937_64 rng(11);
  const SparseMatrix m = testing::random_sparse(20, 20, 0.2, rng);
  const auto path = temp_path("matrix.epsm");
  MatrixFileHeader header{MatmulMode::additive, MaskMode::vanilla, 3, 0xabcdefULL};
  write_matrix_binary(path, m, header);

  const StoredMatrix back = read_matrix_binary(path);
  CHECK(back.matrix == m);
  CHECK(back.header.matmul_mode == MatmulMode::additive);
  CHECK(back.header.mask_mode == MaskMode::vanilla);
  CHECK(back.header.order == 3);
  CHECK(back.header.fingerprint == 0xabcdefULL);

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(80);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(read_matrix_binary(path), ChecksumError);

  std::filesystem::resize_file(path, 30);
  CHECK_THROWS_AS(read_matrix_binary(path), ChecksumError);
  std::filesystem::remove(path);
}

TEST_CASE("triplet dump lists every stored entry") {
  const SparseMatrix m = SparseMatrix::from_triplets(2, 2, {{0, 1, 0.25}, {1, 0, 3.0}});
  const auto path = temp_path("triplets.txt");
  write_triplets_text(path, m);
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == "0 1 0.25\n1 0 3\n");
  std::filesystem::remove(path);
}
