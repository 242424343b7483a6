#include "epine/sparse_io.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "epine/error.hpp"
#include "epine/hash.hpp"

namespace epine {
namespace {

constexpr char kMagic[4] = {'E', 'P', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& buf, const T& value) {
  buf.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void put_span(std::string& buf, std::span<const T> values) {
  buf.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
}

class Reader {
 public:
  Reader(const std::string& buf, std::size_t limit, std::string name)
      : buf_(buf), limit_(limit), name_(std::move(name)) {}

  template <typename T>
  T get() {
    T value;
    take(&value, sizeof(T));
    return value;
  }

  template <typename T>
  std::vector<T> get_vector(std::size_t count) {
    if (count > (limit_ - pos_) / sizeof(T)) fail();
    std::vector<T> out(count);
    take(out.data(), count * sizeof(T));
    return out;
  }

 private:
  void take(void* dst, std::size_t n) {
    if (n > limit_ - pos_) fail();
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }
  [[noreturn]] void fail() const {
    throw ChecksumError(name_ + ": truncated matrix file");
  }

  const std::string& buf_;
  std::size_t limit_;
  std::size_t pos_ = 0;
  std::string name_;
};

}  // namespace

void write_matrix_binary(const std::filesystem::path& path,
                         const SparseMatrix& matrix,
                         const MatrixFileHeader& header) {
  std::string buf;
  buf.reserve(64 + matrix.row_ptr().size_bytes() +
              matrix.col_indices().size_bytes() + matrix.values().size_bytes());
  buf.append(kMagic, sizeof kMagic);
  put(buf, kVersion);
  put(buf, static_cast<std::int64_t>(matrix.rows()));
  put(buf, static_cast<std::int64_t>(matrix.cols()));
  put(buf, static_cast<std::int64_t>(matrix.nnz()));
  put(buf, static_cast<std::uint8_t>(header.matmul_mode));
  put(buf, static_cast<std::uint8_t>(header.mask_mode));
  put(buf, std::uint16_t{0});
  put(buf, header.order);
  put(buf, header.fingerprint);
  put_span(buf, matrix.row_ptr());
  put_span(buf, matrix.col_indices());
  put_span(buf, matrix.values());
  const std::uint64_t checksum = Fnv1a().update(buf.data(), buf.size()).digest();
  put(buf, checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing " + path.string());
}

StoredMatrix read_matrix_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (buf.size() < sizeof kMagic + sizeof(std::uint64_t) ||
      std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw ChecksumError(name + ": not a sparse matrix file");
  }
  const std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, sizeof stored);
  if (Fnv1a().update(buf.data(), body).digest() != stored) {
    throw ChecksumError(name + ": checksum mismatch");
  }

  Reader r(buf, body, name);
  r.get_vector<char>(sizeof kMagic);
  if (r.get<std::uint32_t>() != kVersion) {
    throw ChecksumError(name + ": unsupported format version");
  }
  const auto rows = r.get<std::int64_t>();
  const auto cols = r.get<std::int64_t>();
  const auto nnz = r.get<std::int64_t>();
  if (rows < 0 || cols < 0 || nnz < 0) {
    throw ChecksumError(name + ": invalid header");
  }
  StoredMatrix out;
  out.header.matmul_mode = static_cast<MatmulMode>(r.get<std::uint8_t>());
  out.header.mask_mode = static_cast<MaskMode>(r.get<std::uint8_t>());
  r.get<std::uint16_t>();
  out.header.order = r.get<std::int32_t>();
  out.header.fingerprint = r.get<std::uint64_t>();
  auto ptr = r.get_vector<Offset>(static_cast<std::size_t>(rows) + 1);
  auto idx = r.get_vector<Index>(static_cast<std::size_t>(nnz));
  auto val = r.get_vector<double>(static_cast<std::size_t>(nnz));
  out.matrix = SparseMatrix(static_cast<Index>(rows), static_cast<Index>(cols),
                            std::move(ptr), std::move(idx), std::move(val));
  return out;
}

void write_triplets_text(const std::filesystem::path& path,
                         const SparseMatrix& matrix) {
  auto out = fmt::output_file(path.string());
  for (Index i = 0; i < matrix.rows(); ++i) {
    const RowView r = matrix.row(i);
    for (std::size_t p = 0; p < r.size(); ++p) {
      out.print("{} {} {}\n", i, r.cols[p], r.values[p]);
    }
  }
}

}  // namespace epine
