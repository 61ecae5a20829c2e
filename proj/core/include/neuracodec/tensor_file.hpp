#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "neuracodec/tensor.hpp"

namespace neuracodec {

// NCT1 container: "NCT1", u8 rank, rank x u32 LE dims, float32 LE payload.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::vector<std::uint8_t> encode_tensor(std::span<const std::uint32_t> dims, std::span<const float> data);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const std::filesystem::path& path, std::span<const std::uint32_t> dims, std::span<const float> data);
void save_tensor(const std::filesystem::path& path, const Matrix& m);
void save_tensor(const std::filesystem::path& path, const ImageTensor& img);
Tensor load_tensor(const std::filesystem::path& path);

Matrix to_matrix(const Tensor& t);
ImageTensor to_image(const Tensor& t);

}  // namespace neuracodec
