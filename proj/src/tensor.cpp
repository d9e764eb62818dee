#include "segrefine/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "segrefine/error.hpp"

namespace segrefine {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'F', '1'};
constexpr std::size_t kFixedHeader = 8;

std::uint64_t checked_numel(const Tensor::Shape& shape) {
  std::uint64_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
      throw Error(ErrorCode::ShapeOverflow, "element count exceeds u64");
    }
    n *= d;
  }
  return n;
}

void validate_shape(const Tensor::Shape& shape, std::size_t stored) {
  if (shape.empty()) throw Error(ErrorCode::ShapeMismatch, "tensor shape must be non-empty");
  for (auto d : shape) {
    if (d == 0) throw Error(ErrorCode::ShapeMismatch, "tensor dimensions must be >= 1");
  }
  if (checked_numel(shape) != stored) {
    throw Error(ErrorCode::ShapeMismatch, "element count does not match shape");
  }
}

std::size_t element_size(DType dtype) {
  switch (dtype) {
    case DType::f32: return 4;
    case DType::i64: return 8;
    case DType::u8: return 1;
  }
  return 0;
}

// Little-endian (de)serialisation of trivially copyable scalars.
template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

}  // namespace

const char* to_string(DType dtype) {
  switch (dtype) {
    case DType::f32: return "f32";
    case DType::i64: return "i64";
    case DType::u8: return "u8";
  }
  return "?";
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_, std::get<0>(data_).size());
}
Tensor::Tensor(Shape shape, std::vector<std::int64_t> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_, std::get<1>(data_).size());
}
Tensor::Tensor(Shape shape, std::vector<std::uint8_t> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_, std::get<2>(data_).size());
}

Tensor Tensor::zeros(DType dtype, Shape shape) {
  const auto n = static_cast<std::size_t>(checked_numel(shape));
  switch (dtype) {
    case DType::f32: return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
    case DType::i64: return Tensor(std::move(shape), std::vector<std::int64_t>(n, 0));
    case DType::u8: return Tensor(std::move(shape), std::vector<std::uint8_t>(n, 0));
  }
  throw Error(ErrorCode::UnknownDtype, "unknown dtype");
}

DType Tensor::dtype() const { return static_cast<DType>(data_.index()); }

std::uint64_t Tensor::numel() const {
  std::uint64_t n = 1;
  for (auto d : shape_) n *= d;
  return shape_.empty() ? 0 : n;
}

namespace {
template <typename T, std::size_t I, typename V>
auto typed_view(V& data, DType expected, DType actual) {
  if (expected != actual) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string("expected dtype ") + to_string(expected) + ", got " + to_string(actual));
  }
  auto& vec = std::get<I>(data);
  return std::span<T>(vec.data(), vec.size());
}
}  // namespace

std::span<const float> Tensor::f32() const { return typed_view<const float, 0>(data_, DType::f32, dtype()); }
std::span<const std::int64_t> Tensor::i64() const {
  return typed_view<const std::int64_t, 1>(data_, DType::i64, dtype());
}
std::span<const std::uint8_t> Tensor::u8() const {
  return typed_view<const std::uint8_t, 2>(data_, DType::u8, dtype());
}
std::span<float> Tensor::f32_mut() { return typed_view<float, 0>(data_, DType::f32, dtype()); }
std::span<std::int64_t> Tensor::i64_mut() { return typed_view<std::int64_t, 1>(data_, DType::i64, dtype()); }
std::span<std::uint8_t> Tensor::u8_mut() { return typed_view<std::uint8_t, 2>(data_, DType::u8, dtype()); }

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << to_string(dtype()) << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << "]";
  return os.str();
}

bool Tensor::operator==(const Tensor& other) const {
  if (shape_ != other.shape_ || data_.index() != other.data_.index()) return false;
  // Bitwise comparison so NaN payloads and signed zeros round-trip exactly.
  return std::visit(
      [&](const auto& lhs) {
        const auto& rhs = std::get<std::decay_t<decltype(lhs)>>(other.data_);
        return lhs.size() == rhs.size() &&
               std::memcmp(lhs.data(), rhs.data(), lhs.size() * sizeof(lhs[0])) == 0;
      },
      data_);
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.ndim() == 0 || t.ndim() > 255) throw Error(ErrorCode::ShapeMismatch, "ndim must be in [1, 255]");
  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeader + 8 * t.ndim() + t.numel() * element_size(t.dtype()));
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(static_cast<std::uint8_t>(t.dtype()));
  out.push_back(static_cast<std::uint8_t>(t.ndim()));
  out.push_back(0);
  out.push_back(0);
  for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
  switch (t.dtype()) {
    case DType::f32:
      for (float v : t.f32()) put_le(out, v);
      break;
    case DType::i64:
      for (auto v : t.i64()) put_le(out, v);
      break;
    case DType::u8: {
      auto v = t.u8();
      out.insert(out.end(), v.begin(), v.end());
      break;
    }
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, "missing magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorCode::BadMagic, "expected STF1");
  if (bytes.size() < kFixedHeader) throw Error(ErrorCode::TruncatedFile, "header truncated");
  const auto code = bytes[4];
  if (code > 2) throw Error(ErrorCode::UnknownDtype, "dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t ndim = bytes[5];
  if (ndim == 0) throw Error(ErrorCode::ShapeMismatch, "ndim must be >= 1");
  if (bytes.size() < kFixedHeader + 8 * ndim) throw Error(ErrorCode::TruncatedFile, "shape truncated");

  Tensor::Shape shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i) shape[i] = get_le<std::uint64_t>(bytes.data() + kFixedHeader + 8 * i);
  const std::uint64_t n = checked_numel(shape);
  const std::size_t esize = element_size(dtype);
  if (n > std::numeric_limits<std::uint64_t>::max() / esize) {
    throw Error(ErrorCode::ShapeOverflow, "payload size exceeds u64");
  }
  const std::size_t offset = kFixedHeader + 8 * ndim;
  if (bytes.size() - offset < n * esize) throw Error(ErrorCode::TruncatedFile, "payload truncated");

  const std::uint8_t* p = bytes.data() + offset;
  const auto count = static_cast<std::size_t>(n);
  switch (dtype) {
    case DType::f32: {
      std::vector<float> data(count);
      for (std::size_t i = 0; i < count; ++i) data[i] = get_le<float>(p + 4 * i);
      return Tensor(std::move(shape), std::move(data));
    }
    case DType::i64: {
      std::vector<std::int64_t> data(count);
      for (std::size_t i = 0; i < count; ++i) data[i] = get_le<std::int64_t>(p + 8 * i);
      return Tensor(std::move(shape), std::move(data));
    }
    case DType::u8:
      return Tensor(std::move(shape), std::vector<std::uint8_t>(p, p + count));
  }
  throw Error(ErrorCode::UnknownDtype, "unreachable");
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace segrefine
