#include "momentlab/container.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace momentlab {

namespace {

// serialized numbers are little endian; this codebase only targets LE hosts,
// which the loader re-checks cheaply
void check_host_endianness() {
  const uint32_t probe = 1;
  char b;
  std::memcpy(&b, &probe, 1);
  if (b != 1) throw std::runtime_error("container i/o requires a little-endian host");
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f64") return 8;
  if (dtype == "f32") return 4;
  if (dtype == "i32") return 4;
  if (dtype == "u8") return 1;
  throw std::runtime_error("container: unknown dtype '" + dtype + "'");
}

std::size_t element_count(const std::vector<Index>& shape) {
  std::size_t n = 1;
  for (Index s : shape) {
    if (s < 0) throw std::runtime_error("container: negative shape entry");
    n *= static_cast<std::size_t>(s);
  }
  return n;
}

constexpr std::size_t align8(std::size_t n) { return (n + 7) & ~std::size_t(7); }

}  // namespace

ContainerWriter::ContainerWriter(std::string kind) : kind_(std::move(kind)) {
  check_host_endianness();
}

void ContainerWriter::add_raw(const std::string& name, const std::string& dtype, const char* data,
                              std::size_t elem_size, std::vector<Index> shape) {
  for (const auto& b : blobs_)
    if (b.name == name) throw std::invalid_argument("container: duplicate array '" + name + "'");
  Blob b;
  b.name = name;
  b.dtype = dtype;
  const std::size_t bytes = element_count(shape) * elem_size;
  b.shape = std::move(shape);
  b.bytes.assign(data, data + bytes);
  blobs_.push_back(std::move(b));
}

void ContainerWriter::add_f64(const std::string& name, const double* data,
                              std::vector<Index> shape) {
  add_raw(name, "f64", reinterpret_cast<const char*>(data), 8, std::move(shape));
}

void ContainerWriter::add_f32(const std::string& name, const float* data,
                              std::vector<Index> shape) {
  add_raw(name, "f32", reinterpret_cast<const char*>(data), 4, std::move(shape));
}

void ContainerWriter::add_i32(const std::string& name, const int32_t* data,
                              std::vector<Index> shape) {
  add_raw(name, "i32", reinterpret_cast<const char*>(data), 4, std::move(shape));
}

void ContainerWriter::add_matrix(const std::string& name, const MatXd& m) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMat rm = m;
  add_f64(name, rm.data(), {m.rows(), m.cols()});
}

void ContainerWriter::add_vector(const std::string& name, const VecXd& v) {
  add_f64(name, v.data(), {v.size()});
}

void ContainerWriter::add_labels(const std::string& name, const Eigen::VectorXi& v) {
  static_assert(sizeof(int) == 4, "labels are serialized as i32");
  add_i32(name, v.data(), {v.size()});
}

void ContainerWriter::write(const std::string& path) const {
  nlohmann::json header;
  header["kind"] = kind_;
  header["version"] = kContainerVersion;
  header["meta"] = meta_;

  // first pass fixes offsets: header bytes are stable because the json dump
  // is deterministic once the offsets are known, so compute sizes with
  // placeholder offsets of equal width
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& b : blobs_) {
    nlohmann::json a;
    a["name"] = b.name;
    a["dtype"] = b.dtype;
    a["shape"] = b.shape;
    a["bytes"] = b.bytes.size();
    a["offset"] = 0;
    arrays.push_back(std::move(a));
  }
  header["arrays"] = arrays;

  // iterate until offsets (whose decimal width feeds back into the header
  // length) are consistent; two rounds settle in practice, bounded anyway
  std::size_t header_len = header.dump().size();
  for (int round = 0; round < 8; ++round) {
    std::size_t cursor = align8(16 + header_len);
    for (std::size_t i = 0; i < blobs_.size(); ++i) {
      header["arrays"][i]["offset"] = cursor;
      cursor = align8(cursor + blobs_[i].bytes.size());
    }
    const std::size_t new_len = header.dump().size();
    if (new_len == header_len) break;
    header_len = new_len;
  }
  const std::string hs = header.dump();
  if (hs.size() != header_len) throw std::runtime_error("container: header size failed to settle");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("container: cannot open '" + path + "' for writing");
  out.write(kContainerMagic, 4);
  uint32_t version = kContainerVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  uint64_t hl = hs.size();
  out.write(reinterpret_cast<const char*>(&hl), 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  std::size_t cursor = 16 + hs.size();
  const char zeros[8] = {0};
  for (std::size_t i = 0; i < blobs_.size(); ++i) {
    const std::size_t want = header["arrays"][i]["offset"].get<std::size_t>();
    if (want < cursor) throw std::runtime_error("container: offset bookkeeping corrupt");
    out.write(zeros, static_cast<std::streamsize>(want - cursor));
    out.write(blobs_[i].bytes.data(), static_cast<std::streamsize>(blobs_[i].bytes.size()));
    cursor = want + blobs_[i].bytes.size();
  }
  if (!out) throw std::runtime_error("container: write to '" + path + "' failed");
}

Container Container::read(const std::string& path) {
  check_host_endianness();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("container: cannot open '" + path + "'");

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kContainerMagic, 4) != 0)
    throw std::runtime_error("container: '" + path + "' is not a container file");
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kContainerVersion)
    throw std::runtime_error("container: unsupported version " + std::to_string(version));
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 8);
  if (!in || header_len > (1ull << 30)) throw std::runtime_error("container: bad header length");

  std::string hs(header_len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("container: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("container: header is not valid json: ") + e.what());
  }

  Container c;
  c.kind_ = header.at("kind").get<std::string>();
  c.meta_ = header.value("meta", nlohmann::json::object());
  for (const auto& a : header.at("arrays")) {
    Entry e;
    e.dtype = a.at("dtype").get<std::string>();
    for (const auto& s : a.at("shape")) e.shape.push_back(s.get<Index>());
    const auto bytes = a.at("bytes").get<std::size_t>();
    const auto offset = a.at("offset").get<std::size_t>();
    if (bytes != element_count(e.shape) * dtype_size(e.dtype))
      throw std::runtime_error("container: array byte count disagrees with shape");
    e.bytes.resize(bytes);
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(e.bytes.data(), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("container: truncated array payload");
    c.entries_.emplace_back(a.at("name").get<std::string>(), std::move(e));
  }
  return c;
}

bool Container::has(const std::string& name) const {
  for (const auto& [n, e] : entries_)
    if (n == name) return true;
  return false;
}

const Container::Entry& Container::entry(const std::string& name, const char* want_dtype) const {
  for (const auto& [n, e] : entries_)
    if (n == name) {
      if (e.dtype != want_dtype)
        throw std::runtime_error("container: array '" + name + "' has dtype " + e.dtype +
                                 ", expected " + want_dtype);
      return e;
    }
  throw std::runtime_error("container: no array named '" + name + "'");
}

std::vector<Index> Container::shape(const std::string& name) const {
  for (const auto& [n, e] : entries_)
    if (n == name) return e.shape;
  throw std::runtime_error("container: no array named '" + name + "'");
}

MatXd Container::f64_matrix(const std::string& name) const {
  const Entry& e = entry(name, "f64");
  if (e.shape.size() != 2) throw std::runtime_error("container: '" + name + "' is not a matrix");
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> m(reinterpret_cast<const double*>(e.bytes.data()), e.shape[0],
                             e.shape[1]);
  return m;
}

VecXd Container::f64_vector(const std::string& name) const {
  const Entry& e = entry(name, "f64");
  if (e.shape.size() != 1) throw std::runtime_error("container: '" + name + "' is not a vector");
  return Eigen::Map<const VecXd>(reinterpret_cast<const double*>(e.bytes.data()), e.shape[0]);
}

std::vector<double> Container::f64_array(const std::string& name) const {
  const Entry& e = entry(name, "f64");
  const double* p = reinterpret_cast<const double*>(e.bytes.data());
  return std::vector<double>(p, p + e.bytes.size() / 8);
}

std::vector<float> Container::f32_array(const std::string& name) const {
  const Entry& e = entry(name, "f32");
  const float* p = reinterpret_cast<const float*>(e.bytes.data());
  return std::vector<float>(p, p + e.bytes.size() / 4);
}

Eigen::VectorXi Container::i32_vector(const std::string& name) const {
  const Entry& e = entry(name, "i32");
  if (e.shape.size() != 1) throw std::runtime_error("container: '" + name + "' is not a vector");
  return Eigen::Map<const Eigen::VectorXi>(reinterpret_cast<const int32_t*>(e.bytes.data()),
                                           e.shape[0]);
}

void save_dataset(const std::string& path, const LabeledDataset& data,
                  const nlohmann::json& metadata) {
  check_dataset(data, "save_dataset");
  ContainerWriter w("dataset");
  w.meta() = metadata;
  w.meta()["n"] = data.size();
  w.meta()["dim"] = data.dim();
  w.add_matrix("inputs", data.inputs);
  w.add_labels("labels", data.labels);
  w.write(path);
}

LoadedDataset load_dataset(const std::string& path) {
  const Container c = Container::read(path);
  if (c.kind() != "dataset")
    throw std::runtime_error("load_dataset: '" + path + "' holds a " + c.kind() +
                             ", not a dataset");
  LoadedDataset out;
  out.data.inputs = c.f64_matrix("inputs");
  out.data.labels = c.i32_vector("labels");
  out.metadata = c.meta();
  check_dataset(out.data, "load_dataset");
  return out;
}

}  // namespace momentlab
