#include "epine/proximity.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <string>

#include "epine/error.hpp"

namespace epine {
namespace {

constexpr Index kRowBlock = 128;

struct MultiplyTerm {
  static bool active(double, double) noexcept { return true; }
  static double value(double x, double y) noexcept { return x * y; }
};

// Indicator gate evaluated literally, so an underflowing x * y drops the
// term exactly as the dense definition would.
struct AdditiveTerm {
  static bool active(double x, double y) noexcept { return x * y != 0.0; }
  static double value(double x, double y) noexcept { return x + y; }
};

struct BlockResult {
  std::vector<Offset> row_nnz;
  std::vector<Index> cols;
  std::vector<double> values;
};

// Gustavson row-by-row product. Row i of the result accumulates over the
// stored columns t of x's row i in increasing order, so each entry is summed
// in a fixed order independent of the thread count.
template <typename Term>
SparseMatrix row_product(const SparseMatrix& x, const SparseMatrix& y,
                         const SparseMatrix* forbidden, bool forbid_diagonal,
                         const ProductOptions& options) {
  const Index rows = x.rows();
  const Index cols = y.cols();
  const Index num_blocks = (rows + kRowBlock - 1) / kRowBlock;
  std::vector<BlockResult> blocks(static_cast<std::size_t>(num_blocks));
  const int workers = options.workers > 0 ? options.workers : omp_get_max_threads();
  const double tol = options.drop_tolerance;

#pragma omp parallel num_threads(workers)
  {
    std::vector<double> acc(static_cast<std::size_t>(cols), 0.0);
    std::vector<Index> seen(static_cast<std::size_t>(cols), -1);
    std::vector<Index> blocked(static_cast<std::size_t>(cols), -1);
    std::vector<Index> touched;

#pragma omp for schedule(dynamic, 1)
    for (Index b = 0; b < num_blocks; ++b) {
      BlockResult& out = blocks[b];
      const Index begin = b * kRowBlock;
      const Index end = std::min(rows, begin + kRowBlock);
      out.row_nnz.reserve(static_cast<std::size_t>(end - begin));
      for (Index i = begin; i < end; ++i) {
        if (forbidden != nullptr) {
          for (Index j : forbidden->row(i).cols) blocked[j] = i;
        }
        if (forbid_diagonal && i < cols) blocked[i] = i;

        touched.clear();
        const RowView xr = x.row(i);
        for (std::size_t p = 0; p < xr.size(); ++p) {
          const double xv = xr.values[p];
          const RowView yr = y.row(xr.cols[p]);
          for (std::size_t q = 0; q < yr.size(); ++q) {
            const Index j = yr.cols[q];
            if (blocked[j] == i) continue;
            const double yv = yr.values[q];
            if (!Term::active(xv, yv)) continue;
            if (seen[j] != i) {
              seen[j] = i;
              acc[j] = 0.0;
              touched.push_back(j);
            }
            acc[j] += Term::value(xv, yv);
          }
        }
        std::sort(touched.begin(), touched.end());
        Offset kept = 0;
        for (Index j : touched) {
          if (acc[j] > tol) {
            out.cols.push_back(j);
            out.values.push_back(acc[j]);
            ++kept;
          }
        }
        out.row_nnz.push_back(kept);
      }
    }
  }

  std::size_t total = 0;
  for (const BlockResult& blk : blocks) total += blk.cols.size();
  std::vector<Offset> ptr(static_cast<std::size_t>(rows) + 1, 0);
  std::vector<Index> idx;
  std::vector<double> val;
  idx.reserve(total);
  val.reserve(total);
  Index row = 0;
  for (const BlockResult& blk : blocks) {
    for (Offset n : blk.row_nnz) {
      ptr[row + 1] = ptr[row] + n;
      ++row;
    }
    idx.insert(idx.end(), blk.cols.begin(), blk.cols.end());
    val.insert(val.end(), blk.values.begin(), blk.values.end());
  }
  return SparseMatrix(rows, cols, std::move(ptr), std::move(idx),
                      std::move(val));
}

void check_product_shapes(const SparseMatrix& x, const SparseMatrix& y,
                          const char* op) {
  if (x.cols() != y.rows()) {
    throw ValidationError(std::string(op) + ": shape mismatch (" +
                          std::to_string(x.rows()) + "x" +
                          std::to_string(x.cols()) + " times " +
                          std::to_string(y.rows()) + "x" +
                          std::to_string(y.cols()) + ")");
  }
}

}  // namespace

SparseMatrix multiply(const SparseMatrix& x, const SparseMatrix& y,
                      const ProductOptions& options) {
  check_product_shapes(x, y, "multiply");
  return row_product<MultiplyTerm>(x, y, nullptr, false, options);
}

SparseMatrix additive_product(const SparseMatrix& x, const SparseMatrix& y,
                              const ProductOptions& options) {
  check_product_shapes(x, y, "additive_product");
  return row_product<AdditiveTerm>(x, y, nullptr, false, options);
}

SparseMatrix product(const SparseMatrix& x, const SparseMatrix& y,
                     MatmulMode mode, const ProductOptions& options) {
  return mode == MatmulMode::additive ? additive_product(x, y, options)
                                      : multiply(x, y, options);
}

MaskMatrix build_mask(const SparseMatrix& last, const SparseMatrix& current) {
  if (last.rows() != current.rows() || last.cols() != current.cols()) {
    throw ValidationError("build_mask: shape mismatch");
  }
  const SparseMatrix uni = add(last, current);
  return MaskMatrix(uni.with_values(std::vector<double>(uni.nnz(), 1.0)));
}

SparseMatrix masked_multiply(const SparseMatrix& current,
                             const SparseMatrix& adj, const MaskMatrix& mask,
                             MatmulMode mode, const ProductOptions& options) {
  check_product_shapes(current, adj, "masked_multiply");
  if (mask.rows() != current.rows() || mask.cols() != adj.cols()) {
    throw ValidationError("masked_multiply: mask shape mismatch");
  }
  if (mode == MatmulMode::additive) {
    return row_product<AdditiveTerm>(current, adj, &mask.forbidden(), true,
                                     options);
  }
  return row_product<MultiplyTerm>(current, adj, &mask.forbidden(), true,
                                   options);
}

SparseMatrix vanilla_power(const Graph& graph, int k,
                           const ProductOptions& options) {
  if (k < 0) throw ValidationError("vanilla_power: negative order");
  const SparseMatrix& a = graph.adjacency();
  if (k == 0) return SparseMatrix::identity(a.rows());
  SparseMatrix result = a;
  for (int l = 2; l <= k; ++l) result = multiply(result, a, options);
  return result;
}

ProximityStack rectified_stack(const Graph& graph, int k, MatmulMode mode,
                               const ProductOptions& options) {
  const SparseMatrix& a = graph.adjacency();
  ProximityStack stack;
  stack.requested_order = std::max(k, 1);
  stack.matmul_mode = mode;
  stack.mask_mode = MaskMode::rectified;
  stack.matrices.push_back(a);

  SparseMatrix last = SparseMatrix::identity(a.rows());
  for (int l = 2; l <= k; ++l) {
    const SparseMatrix& current = stack.matrices.back();
    const MaskMatrix mask = build_mask(last, current);
    SparseMatrix next = masked_multiply(current, a, mask, mode, options);
    if (next.empty()) {
      stack.early_stopped = true;
      break;
    }
    last = current;
    stack.matrices.push_back(std::move(next));
  }
  stack.reached_order = static_cast<int>(stack.matrices.size());
  return stack;
}

ProximityStack vanilla_stack(const Graph& graph, int k, MatmulMode mode,
                             const ProductOptions& options) {
  const SparseMatrix& a = graph.adjacency();
  ProximityStack stack;
  stack.requested_order = std::max(k, 1);
  stack.matmul_mode = mode;
  stack.mask_mode = MaskMode::vanilla;
  stack.matrices.push_back(a);
  for (int l = 2; l <= k; ++l) {
    SparseMatrix next = product(stack.matrices.back(), a, mode, options);
    if (next.empty()) {
      stack.early_stopped = true;
      break;
    }
    stack.matrices.push_back(std::move(next));
  }
  stack.reached_order = static_cast<int>(stack.matrices.size());
  return stack;
}

ProximityStack proximity_stack(const Graph& graph, int k, MatmulMode matmul,
                               MaskMode mask, const ProductOptions& options) {
  return mask == MaskMode::rectified ? rectified_stack(graph, k, matmul, options)
                                     : vanilla_stack(graph, k, matmul, options);
}

}  // namespace epine
