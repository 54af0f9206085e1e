#pragma once

#include <string>

#include "swinfsr/tensor.hpp"

namespace swinfsr {

// Strict 8-bit RGB PNG I/O.  Values map to [0,1] via /255 on read and
// round-to-nearest quantization on write.  Anything that is not an
// 8-bit three-channel PNG is rejected with a DataError.
Tensor<float> png_read(const std::string& path);
void png_write(const Tensor<float>& img, const std::string& path);

}  // namespace swinfsr
