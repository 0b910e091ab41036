#pragma once

#include <string>

#include "mutualdepth/tensor.hpp"

namespace md {

// PNG codecs. RGB images travel as [3,H,W] doubles in [0,1] (8-bit on disk);
// gray grids travel as [H,W] doubles holding the raw integer sample values
// (callers apply unit conventions such as meters = value/256). All functions
// throw std::runtime_error naming the file on I/O or format problems.

void write_png_rgb8(const std::string& path, const Tensor& image);
Tensor read_png_rgb8(const std::string& path);

void write_png_gray16(const std::string& path, const Tensor& grid);
Tensor read_png_gray16(const std::string& path);

void write_png_gray8(const std::string& path, const Tensor& grid);
Tensor read_png_gray8(const std::string& path);

}  // namespace md
