#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "bbkd/denoiser.hpp"
#include "bbkd/tensor.hpp"

namespace bbkd {

// IMGF: "IMGF", u32 width, u32 height, u32 channels, then channels*height*width
// little-endian float32 values in row-major [C,H,W] order.
std::string encode_imgf(const Tensor& image);
Tensor decode_imgf(std::string_view bytes);
void write_imgf(const Tensor& image, const std::filesystem::path& path);
Tensor read_imgf(const std::filesystem::path& path);

// BBKD1 checkpoint: "BBKD1", u32 version, u32 tensor count; per tensor u32
// name length, UTF-8 name, u32 rank, u64 dims[rank], float64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const DenoiserParams& params);
/// Fully validates the buffer before returning; never yields partial params.
DenoiserParams decode_checkpoint(std::string_view bytes);
void save_checkpoint(const DenoiserParams& params, const std::filesystem::path& path);
DenoiserParams load_checkpoint(const std::filesystem::path& path);

/// 16-bit binary PGM with [-1, 1] mapped linearly onto [0, 65535].
void export_pgm(const Tensor& image, const std::filesystem::path& path);
Tensor import_pgm(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace bbkd
