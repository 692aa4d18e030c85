#pragma once

#include <filesystem>

#include "iilab/tensor.hpp"

namespace iilab {

// On-disk tensor format, byte-exact across platforms:
//   bytes 0..7   magic "IITNSR01"
//   u32 LE       rank (1..3)
//   rank x u32   dims, each >= 1
//   f32 LE       row-major payload, dims product elements
// Values are stored as f32; in memory everything is f64.
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace iilab
