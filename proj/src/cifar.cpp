#include "momentlab/cifar.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace momentlab {

std::vector<CifarRecord> read_cifar_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cifar: cannot open '" + path + "'");
  const auto bytes = std::filesystem::file_size(path);
  if (bytes == 0 || bytes % static_cast<uintmax_t>(kCifarRecordBytes) != 0)
    throw std::runtime_error("cifar: '" + path + "' is not a whole number of 3073-byte records");

  std::vector<CifarRecord> records(bytes / static_cast<uintmax_t>(kCifarRecordBytes));
  for (auto& r : records) {
    in.read(reinterpret_cast<char*>(&r.label), 1);
    in.read(reinterpret_cast<char*>(r.pixels.data()), kCifarImageBytes);
    if (!in) throw std::runtime_error("cifar: short read from '" + path + "'");
    if (r.label >= kCifarClasses)
      throw std::runtime_error("cifar: '" + path + "' has label byte " +
                               std::to_string(int(r.label)) + " outside 0..9");
  }
  return records;
}

void write_cifar_records(const std::string& path, const std::vector<CifarRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cifar: cannot open '" + path + "' for writing");
  for (const auto& r : records) {
    out.write(reinterpret_cast<const char*>(&r.label), 1);
    out.write(reinterpret_cast<const char*>(r.pixels.data()), kCifarImageBytes);
  }
  if (!out) throw std::runtime_error("cifar: write to '" + path + "' failed");
}

LabeledDataset cifar_dataset(const std::vector<CifarRecord>& records, bool grayscale) {
  if (records.empty()) throw std::invalid_argument("cifar_dataset: no records");
  const Index n = static_cast<Index>(records.size());
  const Index d = grayscale ? kCifarPixels : kCifarImageBytes;

  LabeledDataset out;
  out.inputs.resize(n, d);
  out.labels.resize(n);
  for (Index r = 0; r < n; ++r) {
    const auto& rec = records[static_cast<std::size_t>(r)];
    out.labels[r] = rec.label;
    if (grayscale) {
      for (Index i = 0; i < kCifarPixels; ++i)
        out.inputs(r, i) = kLumaWeights[0] * rec.pixels[static_cast<std::size_t>(i)] +
                           kLumaWeights[1] * rec.pixels[static_cast<std::size_t>(kCifarPixels + i)] +
                           kLumaWeights[2] * rec.pixels[static_cast<std::size_t>(2 * kCifarPixels + i)];
    } else {
      for (Index i = 0; i < kCifarImageBytes; ++i)
        out.inputs(r, i) = rec.pixels[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

LabeledDataset load_cifar_binary(const std::vector<std::string>& paths, bool grayscale) {
  if (paths.empty()) throw std::invalid_argument("load_cifar_binary: no input files");
  std::vector<CifarRecord> all;
  for (const auto& p : paths) {
    auto records = read_cifar_records(p);
    all.insert(all.end(), records.begin(), records.end());
  }
  return cifar_dataset(all, grayscale);
}

LabeledDataset coarse_grain_labels(const LabeledDataset& data, const std::vector<int>& mapping) {
  check_dataset(data, "coarse_grain_labels");
  if (mapping.empty()) throw std::invalid_argument("coarse_grain_labels: empty mapping");
  LabeledDataset out = data;
  for (Index r = 0; r < data.size(); ++r) {
    const int l = data.labels[r];
    if (l < 0 || l >= static_cast<int>(mapping.size()))
      throw std::invalid_argument("coarse_grain_labels: label " + std::to_string(l) +
                                  " outside the mapping table");
    out.labels[r] = mapping[static_cast<std::size_t>(l)];
  }
  return out;
}

}  // namespace momentlab
