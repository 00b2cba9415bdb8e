// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autoprog/tensor.hpp"

namespace autoprog {

// Normalized fp32 images, channels-last (count, side, side, 3), with one
// label per image.
struct Split {
  int side = 0;
  int classes = 0;
  std::vector<float> pixels;
  std::vector<int> labels;

  int count() const { return static_cast<int>(labels.size()); }
  std::size_t image_floats() const {
    return static_cast<std::size_t>(side) * side * 3;
  }
  // Batch tensor (indices.size(), side, side, 3) gathered by index.
  Tensor gather(const std::vector<int>& indices) const;
  std::vector<int> gather_labels(const std::vector<int>& indices) const;
};

struct Dataset {
  Split train;
  Split eval;
};

// Source is either "synthetic(classes,count,side,seed)" or a directory
// holding train.bin and eval.bin in the APDS container format (see
// save_split). Synthetic data: per-class smooth random templates with random
// cyclic shifts, brightness jitter and pixel noise; `count` train images
// balanced over the classes, plus count/5 eval images.
Dataset ingest_dataset(const std::string& source);

// APDS v1 container: magic "APDS", u8 version, u8 channels, u16 side,
// u32 record count, u8 class count, then per record one label byte followed
// by side*side*3 image bytes. Little-endian, pixels row-major channels-last.
void save_split(const std::string& path, const Split& split);
Split load_split(const std::string& path);

// Pixel normalization applied when reading 8-bit images: (v/255 - mean)/std.
constexpr float kPixelMean = 0.5f;
constexpr float kPixelStd = 0.25f;

}  // namespace autoprog
