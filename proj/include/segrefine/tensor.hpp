#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace segrefine {

enum class DType : std::uint8_t { f32 = 0, i64 = 1, u8 = 2 };

const char* to_string(DType dtype);

// Dense row-major n-d array. Immutable once built except through the typed
// mutable accessors used while filling it.
class Tensor {
 public:
  using Shape = std::vector<std::uint64_t>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<float> data);
  Tensor(Shape shape, std::vector<std::int64_t> data);
  Tensor(Shape shape, std::vector<std::uint8_t> data);

  static Tensor zeros(DType dtype, Shape shape);

  DType dtype() const;
  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::uint64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::uint64_t numel() const;

  std::span<const float> f32() const;
  std::span<const std::int64_t> i64() const;
  std::span<const std::uint8_t> u8() const;
  std::span<float> f32_mut();
  std::span<std::int64_t> i64_mut();
  std::span<std::uint8_t> u8_mut();

  std::string shape_string() const;

  bool operator==(const Tensor& other) const;

 private:
  Shape shape_;
  std::variant<std::vector<float>, std::vector<std::int64_t>, std::vector<std::uint8_t>> data_;
};

// STF1 container: "STF1" | dtype u8 | ndim u8 | 2 zero bytes | ndim x u64 LE | payload LE.
Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t);

// In-memory variants used by the file functions and by tests.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_tensor(const Tensor& t);

}  // namespace segrefine
