#include "cotrain/matrix.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cotrain {

namespace {

constexpr char kBinMagic[4] = {'C', 'T', 'V', '1'};

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void write_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

void write_f32_le(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

Matrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t data_row = 0;
  std::string line;
  bool first_line = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first_line && !line.empty() && line[0] == '#') {
      first_line = false;
      continue;
    }
    first_line = false;
    if (line.empty()) continue;

    std::size_t col = 0;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      const std::string field =
          line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      const char* begin = field.c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin || *end != '\0') {
        throw std::runtime_error(path + ": unparsable value \"" + field + "\" at row " +
                                 std::to_string(data_row) + ", col " + std::to_string(col));
      }
      values.push_back(v);
      ++col;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (data_row == 0) {
      cols = col;
    } else if (col != cols) {
      throw std::runtime_error(path + ": row " + std::to_string(data_row) + " has " +
                               std::to_string(col) + " columns, expected " +
                               std::to_string(cols));
    }
    ++data_row;
  }
  if (data_row == 0 || cols == 0) throw std::runtime_error(path + ": no data rows");
  return Matrix(data_row, cols, std::move(values));
}

Matrix load_bin_f32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  unsigned char header[20];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (in.gcount() != sizeof(header) || std::memcmp(header, kBinMagic, 4) != 0) {
    throw std::runtime_error(path + ": not a CTV1 matrix file");
  }
  const std::uint64_t rows = read_u64_le(header + 4);
  const std::uint64_t cols = read_u64_le(header + 12);
  if (rows == 0 || cols == 0) throw std::runtime_error(path + ": zero dimension in header");

  const std::uint64_t count = rows * cols;
  std::vector<unsigned char> payload(count * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != payload.size()) {
    throw std::runtime_error(path + ": payload shorter than header dims " +
                             std::to_string(rows) + "x" + std::to_string(cols));
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw std::runtime_error(path + ": trailing bytes after payload");
  }

  std::vector<double> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    values[i] = static_cast<double>(read_f32_le(payload.data() + i * 4));
  }
  return Matrix(rows, cols, std::move(values));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw std::invalid_argument("matrix value count " + std::to_string(values_.size()) +
                                " does not match " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
}

void validate_view_matrix(const Matrix& matrix, const std::string& context) {
  if (matrix.rows() == 0 || matrix.cols() == 0) {
    throw std::runtime_error(context + ": empty matrix");
  }
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      if (!std::isfinite(matrix(r, c))) {
        throw std::runtime_error(context + ": non-finite value at row " + std::to_string(r) +
                                 ", col " + std::to_string(c));
      }
    }
  }
}

Matrix load_view_matrix(const std::string& path, MatrixFormat format) {
  Matrix m = format == MatrixFormat::csv ? load_csv(path) : load_bin_f32(path);
  validate_view_matrix(m, path);
  return m;
}

void save_view_matrix(const Matrix& matrix, const std::string& path, MatrixFormat format) {
  if (format == MatrixFormat::csv) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[40];
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
      for (std::size_t c = 0; c < matrix.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", matrix(r, c));
        if (c) out << ',';
        out << buf;
      }
      out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path);
    return;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kBinMagic, 4);
  write_u64_le(out, matrix.rows());
  write_u64_le(out, matrix.cols());
  for (double v : matrix.values()) write_f32_le(out, static_cast<float>(v));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace cotrain
