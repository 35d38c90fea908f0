#pragma once

// CIFAR-10 binary batches: per record one label byte followed by 3072 pixel
// bytes in channel-major R,G,B order, each channel a 32x32 row-major plane.
// The loader flattens records to dataset rows, either raw color (D=3072) or
// grayscale (D=1024). Pixel values stay in [0,255].

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "momentlab/dataset.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

inline constexpr Index kCifarSide = 32;
inline constexpr Index kCifarPixels = kCifarSide * kCifarSide;
inline constexpr Index kCifarImageBytes = 3 * kCifarPixels;
inline constexpr Index kCifarRecordBytes = kCifarImageBytes + 1;
inline constexpr int kCifarClasses = 10;

// ITU-R 601 luma weights; the format itself does not fix a grayscale rule,
// so runs record these in their metadata
inline constexpr double kLumaWeights[3] = {0.299, 0.587, 0.114};

struct CifarRecord {
  uint8_t label;
  std::array<uint8_t, kCifarImageBytes> pixels;
};

std::vector<CifarRecord> read_cifar_records(const std::string& path);
void write_cifar_records(const std::string& path, const std::vector<CifarRecord>& records);

LabeledDataset cifar_dataset(const std::vector<CifarRecord>& records, bool grayscale);
LabeledDataset load_cifar_binary(const std::vector<std::string>& paths, bool grayscale);

// cat, deer, dog, frog, horse -> 0; plane, car, bird, ship, truck -> 1
inline constexpr std::array<int, kCifarClasses> kCifar10cMapping = {1, 1, 1, 0, 0,
                                                                    0, 0, 0, 1, 1};

// Relabels through a table indexed by the incoming label; labels outside
// [0, mapping.size()) are an error.
LabeledDataset coarse_grain_labels(const LabeledDataset& data, const std::vector<int>& mapping);

}  // namespace momentlab
