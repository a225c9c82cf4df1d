#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ndem/features.hpp"
#include "ndem/grid.hpp"
#include "ndem/terrain.hpp"

namespace ndem {

/// One training / evaluation sample. Heights in `x` are relative to the
/// reported sensor height minus the mount height; `y_h` is absolute.
struct DatasetRecord {
  FeatureTensor x;
  GridF y_h;
  GridU8 y_e;
  GridU8 observed;
  /// Reported sensor pose: x, y, z, roll, pitch, yaw.
  std::array<double, 6> pose{};
  float observation_rate = 0.0f;

  friend bool operator==(const DatasetRecord& a, const DatasetRecord& b);
};

struct ShardHeader {
  static constexpr std::array<char, 4> kMagic{'N', 'D', 'E', 'M'};
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kBytes = 28;

  std::uint32_t version = kVersion;
  float resolution = 0.04f;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t record_count = 0;
  std::uint32_t channels = kFeatureChannels;

  std::size_t record_bytes() const;
  friend bool operator==(const ShardHeader&, const ShardHeader&) = default;
};

std::vector<std::uint8_t> encode_header(const ShardHeader& header);
ShardHeader decode_header(std::span<const std::uint8_t> bytes);
/// Appends the packed record. Throws DataError on shape mismatch.
void encode_record(const DatasetRecord& record, const ShardHeader& header,
                   std::vector<std::uint8_t>& out);
DatasetRecord decode_record(std::span<const std::uint8_t> bytes, const ShardHeader& header);

/// Streams records to a shard; the record count in the header is patched on
/// finish() (also called by the destructor).
class ShardWriter {
 public:
  ShardWriter(const std::string& path, float resolution, std::uint32_t height,
              std::uint32_t width);
  ShardWriter(const ShardWriter&) = delete;
  ShardWriter& operator=(const ShardWriter&) = delete;
  ~ShardWriter();

  void append(const DatasetRecord& record);
  void finish();
  std::uint32_t count() const noexcept { return header_.record_count; }

 private:
  std::string path_;
  std::ofstream out_;
  ShardHeader header_;
  std::vector<std::uint8_t> buffer_;
  bool finished_ = false;
};

/// Random-access shard reader; validates magic, version and file length.
class ShardReader {
 public:
  explicit ShardReader(const std::string& path);

  const ShardHeader& header() const noexcept { return header_; }
  std::uint32_t size() const noexcept { return header_.record_count; }
  DatasetRecord read(std::uint32_t index);

 private:
  std::string path_;
  std::ifstream in_;
  ShardHeader header_;
};

/// Writes all records at once. Shapes come from the first record; an empty
/// list writes a header-only file with the given shape.
void write_shard(const std::vector<DatasetRecord>& records, const std::string& path,
                 float resolution, std::uint32_t height = 0, std::uint32_t width = 0);
std::vector<DatasetRecord> read_shard(const std::string& path);

/// Keep a frame iff its observation rate reaches the threshold (inclusive).
inline bool filter_frame(double observation_rate, double threshold = 0.25) {
  return observation_rate >= threshold;
}

/// Height field file: "NDHF", version, resolution, origin, size, f64 heights.
void write_height_field(const HeightField& field, const std::string& path);
HeightField read_height_field(const std::string& path);

}  // namespace ndem
