#include "jointqa/serialize.hpp"

#include <cstring>
#include <stdexcept>

#include "json.hpp"

namespace jointqa::serialize {

namespace {

constexpr char kMagic[4] = {'J', 'Q', 'T', 'N'};
constexpr std::uint32_t kVersion = 1;

void append_raw(std::string& out, const void* data, std::size_t size) {
  out.append(static_cast<const char*>(data), size);
}

template <typename T>
void append_pod(std::string& out, T value) {
  append_raw(out, &value, sizeof(T));
}

template <typename T>
T read_pod(const std::string& bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw std::runtime_error("tensor file truncated");
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 14695981039346656037ull;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ull;
  }
  return hash;
}

std::uint64_t fnv1a64(const std::string& bytes) { return fnv1a64(bytes.data(), bytes.size()); }

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

std::string file_hash_hex(const std::filesystem::path& path) {
  return hex64(fnv1a64(read_file(path)));
}

std::string encode_tensors(const encoder::ParameterSet& params) {
  std::string out;
  append_raw(out, kMagic, sizeof(kMagic));
  append_pod<std::uint32_t>(out, kVersion);
  append_pod<std::uint64_t>(out, params.tensors().size());
  for (const encoder::Tensor& t : params.tensors()) {
    append_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    append_raw(out, t.name.data(), t.name.size());
    append_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
    append_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
    append_pod<std::uint8_t>(out, t.trainable ? 1 : 0);
    append_pod<std::uint8_t>(out, t.no_decay ? 1 : 0);
    // Row-major copy keeps the byte layout independent of Eigen's storage.
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
        append_pod<double>(out, static_cast<double>(t.value(r, c)));
      }
    }
  }
  return out;
}

std::vector<encoder::Tensor> decode_tensor_list(const std::string& bytes) {
  std::size_t pos = 0;
  char magic[4];
  if (bytes.size() < sizeof(magic)) throw std::runtime_error("tensor file truncated");
  std::memcpy(magic, bytes.data(), sizeof(magic));
  pos = sizeof(magic);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a tensor file (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(bytes, pos);
  if (version != kVersion) {
    throw std::runtime_error("unsupported tensor file version " + std::to_string(version));
  }
  const auto count = read_pod<std::uint64_t>(bytes, pos);
  std::vector<encoder::Tensor> tensors;
  tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(bytes, pos);
    if (pos + name_len > bytes.size()) throw std::runtime_error("tensor file truncated");
    encoder::Tensor t;
    t.name.assign(bytes.data() + pos, name_len);
    pos += name_len;
    const auto rows = static_cast<Eigen::Index>(read_pod<std::uint64_t>(bytes, pos));
    const auto cols = static_cast<Eigen::Index>(read_pod<std::uint64_t>(bytes, pos));
    t.trainable = read_pod<std::uint8_t>(bytes, pos) != 0;
    t.no_decay = read_pod<std::uint8_t>(bytes, pos) != 0;
    t.value.resize(rows, cols);
    t.grad = Mat::Zero(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        t.value(r, c) = read_pod<double>(bytes, pos);
      }
    }
    tensors.push_back(std::move(t));
  }
  if (pos != bytes.size()) throw std::runtime_error("tensor file has trailing bytes");
  return tensors;
}

void decode_tensors(const std::string& bytes, encoder::ParameterSet& params) {
  for (encoder::Tensor& stored : decode_tensor_list(bytes)) {
    if (!params.contains(stored.name)) {
      throw std::runtime_error("tensor '" + stored.name +
                               "' not present in the target parameter set");
    }
    encoder::Tensor& t = params.at(stored.name);
    if (t.value.rows() != stored.value.rows() || t.value.cols() != stored.value.cols()) {
      throw std::runtime_error("tensor '" + stored.name + "' shape mismatch: file has " +
                               std::to_string(stored.value.rows()) + "x" +
                               std::to_string(stored.value.cols()) + ", model has " +
                               std::to_string(t.value.rows()) + "x" +
                               std::to_string(t.value.cols()));
    }
    t.trainable = stored.trainable;
    t.no_decay = stored.no_decay;
    t.value = std::move(stored.value);
  }
}

void save_tensors(const std::filesystem::path& path, const encoder::ParameterSet& params) {
  atomic_write_file(path, encode_tensors(params));
}

void load_tensors(const std::filesystem::path& path, encoder::ParameterSet& params) {
  decode_tensors(read_file(path), params);
}

void save_vocabulary(const std::filesystem::path& path, const corpus::Vocabulary& vocab) {
  nlohmann::json j;
  j["terms"] = vocab.terms();
  atomic_write_file(path, j.dump(2) + "\n");
}

corpus::Vocabulary load_vocabulary(const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  if (!j.contains("terms") || !j["terms"].is_array()) {
    throw std::runtime_error("vocabulary file missing 'terms' array: " + path.string());
  }
  return corpus::Vocabulary::from_terms(j["terms"].get<std::vector<std::string>>());
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open log: " + path.string());
}

void JsonlWriter::write_line(const std::string& json_object) {
  out_ << json_object << '\n';
  out_.flush();
}

}  // namespace jointqa::serialize
