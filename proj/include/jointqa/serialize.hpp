#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "jointqa/corpus.hpp"
#include "jointqa/encoder.hpp"

namespace jointqa::serialize {

/// FNV-1a 64-bit over a byte buffer.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t value);

/// Writes to `<path>.tmp` then renames, so readers never observe a torn file.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);
std::string file_hash_hex(const std::filesystem::path& path);

/// Binary tensor container: all tensors of a parameter set with names,
/// shapes, flags, and row-major float64 payloads.
std::string encode_tensors(const encoder::ParameterSet& params);
void decode_tensors(const std::string& bytes, encoder::ParameterSet& params);

/// Decodes into free-standing tensors without a target parameter set.
std::vector<encoder::Tensor> decode_tensor_list(const std::string& bytes);

void save_tensors(const std::filesystem::path& path, const encoder::ParameterSet& params);

/// Loads into an existing parameter set; every stored tensor must already
/// exist with the same shape (creation order stays fixed by the model).
void load_tensors(const std::filesystem::path& path, encoder::ParameterSet& params);

void save_vocabulary(const std::filesystem::path& path, const corpus::Vocabulary& vocab);
corpus::Vocabulary load_vocabulary(const std::filesystem::path& path);

/// Append-only JSONL sink for structured step logs.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path);
  void write_line(const std::string& json_object);

 private:
  std::ofstream out_;
};

}  // namespace jointqa::serialize
