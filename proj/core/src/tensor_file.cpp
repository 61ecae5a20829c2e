#include "neuracodec/tensor_file.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace neuracodec {

namespace {

constexpr std::uint8_t kMagic[4] = {'N', 'C', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::uint32_t{b[at]} | std::uint32_t{b[at + 1]} << 8 | std::uint32_t{b[at + 2]} << 16 |
         std::uint32_t{b[at + 3]} << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(std::span<const std::uint32_t> dims, std::span<const float> data) {
  if (dims.empty()) throw FormatError("tensor rank must be at least 1");
  if (dims.size() > 255) throw FormatError("tensor rank exceeds 255");
  std::uint64_t count = 1;
  for (auto d : dims) count *= d;
  if (count != data.size()) throw ShapeError("tensor dims do not match payload length");
  if (!all_finite(data)) throw DataError("tensor contains non-finite values");

  std::vector<std::uint8_t> out;
  out.reserve(5 + 4 * dims.size() + 4 * data.size());
  for (auto b : kMagic) out.push_back(b);
  out.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  for (float v : data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5) throw DecodeError(bytes.size(), "truncated tensor header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) throw DecodeError(0, "bad magic, expected NCT1");
  const std::size_t rank = bytes[4];
  if (rank == 0) throw DecodeError(4, "tensor rank must be at least 1");
  std::size_t at = 5;
  if (bytes.size() < at + 4 * rank) throw DecodeError(bytes.size(), "truncated tensor dimensions");
  Tensor t;
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, at += 4) {
    t.dims.push_back(get_u32(bytes, at));
    count *= t.dims.back();
  }
  const std::uint64_t expected = at + 4 * count;
  if (bytes.size() < expected) throw DecodeError(bytes.size(), "truncated tensor payload, expected " + std::to_string(expected) + " bytes");
  if (bytes.size() > expected) throw DecodeError(expected, "trailing bytes after tensor payload");
  t.data.resize(count);
  for (auto& v : t.data) {
    v = std::bit_cast<float>(get_u32(bytes, at));
    at += 4;
  }
  return t;
}

void save_tensor(const std::filesystem::path& path, std::span<const std::uint32_t> dims, std::span<const float> data) {
  const auto bytes = encode_tensor(dims, data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write tensor file " + path.string());
}

void save_tensor(const std::filesystem::path& path, const Matrix& m) {
  const std::uint32_t dims[] = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  save_tensor(path, dims, m.values());
}

void save_tensor(const std::filesystem::path& path, const ImageTensor& img) {
  const std::uint32_t dims[] = {static_cast<std::uint32_t>(img.channels()), static_cast<std::uint32_t>(img.height()),
                                static_cast<std::uint32_t>(img.width())};
  save_tensor(path, dims, img.values());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read tensor file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(e.offset(), path.string() + ": " + std::string(e.what()).substr(0, std::string(e.what()).rfind(" (at")));
  }
}

Matrix to_matrix(const Tensor& t) {
  if (t.dims.size() != 2) throw ShapeError("expected a rank-2 tensor");
  return Matrix(t.dims[0], t.dims[1], t.data);
}

ImageTensor to_image(const Tensor& t) {
  if (t.dims.size() != 3) throw ShapeError("expected a rank-3 tensor");
  return ImageTensor(t.dims[0], t.dims[1], t.dims[2], t.data);
}

}  // namespace neuracodec
