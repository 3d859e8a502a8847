#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmenc::io {

namespace fs = std::filesystem;

// Flat little-endian float32 arrays.
void write_f32(const fs::path& path, std::span<const float> values);
std::string encode_f32(std::span<const float> values);
// Reads exactly `expected` floats. A short file raises TruncatedError; a long
// one raises ShapeDisagreementError.
std::vector<float> read_f32(const fs::path& path, std::size_t expected);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);

// Hex SHA-1 over "blob <size>\0<content>", the way git names a blob.
std::string git_blob_hash(std::string_view content);
std::string file_blob_hash(const fs::path& path);

// Flat `key=value` text. '#' starts a comment line; blank lines are ignored.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const fs::path& path);
std::string format_key_values(const KeyValues& kv);

// Output directory that is built at a temporary sibling path and renamed into
// place by commit(). If commit() never runs the staging directory is removed.
class StagedDirectory {
 public:
  explicit StagedDirectory(fs::path target);
  ~StagedDirectory();
  StagedDirectory(const StagedDirectory&) = delete;
  StagedDirectory& operator=(const StagedDirectory&) = delete;

  const fs::path& path() const { return staging_; }
  const fs::path& target() const { return target_; }
  void commit();

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

std::string utc_timestamp();

}  // namespace mmenc::io
