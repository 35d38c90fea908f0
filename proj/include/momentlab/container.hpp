#pragma once

// One binary envelope for everything the tools persist (datasets, clone
// models): a fixed magic, a JSON header describing named arrays, then the
// raw little-endian payloads at 8-aligned absolute offsets. The header keeps
// provenance (kind, seeds, generator parameters) so downstream runs can echo
// it into their manifests.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "momentlab/dataset.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

inline constexpr char kContainerMagic[4] = {'M', 'L', 'C', 'F'};
inline constexpr uint32_t kContainerVersion = 1;

class ContainerWriter {
 public:
  explicit ContainerWriter(std::string kind);

  nlohmann::json& meta() { return meta_; }

  void add_f64(const std::string& name, const double* data, std::vector<Index> shape);
  void add_f32(const std::string& name, const float* data, std::vector<Index> shape);
  void add_i32(const std::string& name, const int32_t* data, std::vector<Index> shape);
  // Eigen matrices are stored row-major
  void add_matrix(const std::string& name, const MatXd& m);
  void add_vector(const std::string& name, const VecXd& v);
  void add_labels(const std::string& name, const Eigen::VectorXi& v);

  void write(const std::string& path) const;

 private:
  struct Blob {
    std::string name, dtype;
    std::vector<Index> shape;
    std::vector<char> bytes;
  };
  void add_raw(const std::string& name, const std::string& dtype, const char* data,
               std::size_t elem_size, std::vector<Index> shape);
  std::string kind_;
  nlohmann::json meta_;
  std::vector<Blob> blobs_;
};

class Container {
 public:
  static Container read(const std::string& path);

  const std::string& kind() const { return kind_; }
  const nlohmann::json& meta() const { return meta_; }
  bool has(const std::string& name) const;

  MatXd f64_matrix(const std::string& name) const;
  VecXd f64_vector(const std::string& name) const;
  std::vector<double> f64_array(const std::string& name) const;  // any shape, flat row-major
  std::vector<float> f32_array(const std::string& name) const;
  Eigen::VectorXi i32_vector(const std::string& name) const;
  std::vector<Index> shape(const std::string& name) const;

 private:
  struct Entry {
    std::string dtype;
    std::vector<Index> shape;
    std::vector<char> bytes;
  };
  const Entry& entry(const std::string& name, const char* want_dtype) const;
  std::string kind_;
  nlohmann::json meta_;
  std::vector<std::pair<std::string, Entry>> entries_;
};

// Dataset round trip through the container envelope.
void save_dataset(const std::string& path, const LabeledDataset& data,
                  const nlohmann::json& metadata);
struct LoadedDataset {
  LabeledDataset data;
  nlohmann::json metadata;
};
LoadedDataset load_dataset(const std::string& path);

}  // namespace momentlab
