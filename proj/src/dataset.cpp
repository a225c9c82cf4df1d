#include "ndem/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "ndem/errors.hpp"

namespace ndem {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

/// Bounds-checked little-endian cursor.
class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  void magic(const std::array<char, 4>& expected, const char* what) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, expected.data(), 4) != 0) {
      throw FormatError(std::string("bad magic: not a ") + what);
    }
    pos_ += 4;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("unexpected end of data");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_shape(const DatasetRecord& r, const ShardHeader& h) {
  const int H = static_cast<int>(h.height);
  const int W = static_cast<int>(h.width);
  const bool ok = r.x.height == H && r.x.width == W &&
                  r.x.data.size() == std::size_t(h.channels) * H * W && r.y_h.height() == H &&
                  r.y_h.width() == W && r.y_e.height() == H && r.y_e.width() == W &&
                  r.observed.height() == H && r.observed.width() == W;
  if (!ok) throw DataError("record shape does not match shard shape");
}

}  // namespace

bool operator==(const DatasetRecord& a, const DatasetRecord& b) {
  return a.x.height == b.x.height && a.x.width == b.x.width && a.x.data == b.x.data &&
         a.y_h == b.y_h && a.y_e == b.y_e && a.observed == b.observed && a.pose == b.pose &&
         a.observation_rate == b.observation_rate;
}

std::size_t ShardHeader::record_bytes() const {
  const std::size_t cells = std::size_t(height) * width;
  return cells * 4 * channels + cells * 4 + cells + cells + 6 * 8 + 4;
}

std::vector<std::uint8_t> encode_header(const ShardHeader& h) {
  std::vector<std::uint8_t> out(ShardHeader::kMagic.begin(), ShardHeader::kMagic.end());
  put_u32(out, h.version);
  put_f32(out, h.resolution);
  put_u32(out, h.height);
  put_u32(out, h.width);
  put_u32(out, h.record_count);
  put_u32(out, h.channels);
  return out;
}

ShardHeader decode_header(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes);
  c.magic(ShardHeader::kMagic, "dataset shard");
  ShardHeader h;
  h.version = c.u32();
  if (h.version != ShardHeader::kVersion) {
    throw FormatError("unsupported shard version " + std::to_string(h.version));
  }
  h.resolution = c.f32();
  h.height = c.u32();
  h.width = c.u32();
  h.record_count = c.u32();
  h.channels = c.u32();
  if (h.channels != kFeatureChannels) {
    throw FormatError("unsupported channel count " + std::to_string(h.channels));
  }
  return h;
}

void encode_record(const DatasetRecord& r, const ShardHeader& h, std::vector<std::uint8_t>& out) {
  check_shape(r, h);
  if (!(r.observation_rate >= 0.0f && r.observation_rate <= 1.0f)) {
    throw DataError("observation rate outside [0, 1]");
  }
  out.reserve(out.size() + h.record_bytes());
  for (float v : r.x.data) put_f32(out, v);
  for (float v : r.y_h.values()) put_f32(out, v);
  for (std::uint8_t v : r.y_e.values()) out.push_back(v);
  for (std::uint8_t v : r.observed.values()) out.push_back(v);
  for (double v : r.pose) put_f64(out, v);
  put_f32(out, r.observation_rate);
}

DatasetRecord decode_record(std::span<const std::uint8_t> bytes, const ShardHeader& h) {
  if (bytes.size() < h.record_bytes()) throw FormatError("truncated record");
  Cursor c(bytes);
  const int H = static_cast<int>(h.height);
  const int W = static_cast<int>(h.width);
  DatasetRecord r;
  r.x = FeatureTensor(H, W);
  for (float& v : r.x.data) v = c.f32();
  r.y_h = GridF(W, H);
  for (float& v : r.y_h.values()) v = c.f32();
  r.y_e = GridU8(W, H);
  for (auto& v : r.y_e.values()) v = c.u8();
  r.observed = GridU8(W, H);
  for (auto& v : r.observed.values()) v = c.u8();
  for (double& v : r.pose) v = c.f64();
  r.observation_rate = c.f32();
  return r;
}

ShardWriter::ShardWriter(const std::string& path, float resolution, std::uint32_t height,
                         std::uint32_t width)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error("cannot open shard '" + path + "' for writing");
  header_.resolution = resolution;
  header_.height = height;
  header_.width = width;
  const auto bytes = encode_header(header_);
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out_) throw Error("failed writing shard header to '" + path + "'");
}

ShardWriter::~ShardWriter() {
  try {
    finish();
  } catch (...) {
  }
}

void ShardWriter::append(const DatasetRecord& record) {
  if (finished_) throw Error("shard '" + path_ + "' is already finished");
  buffer_.clear();
  encode_record(record, header_, buffer_);
  out_.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
  if (!out_) throw Error("failed writing record to '" + path_ + "'");
  ++header_.record_count;
}

void ShardWriter::finish() {
  if (finished_) return;
  finished_ = true;
  const auto bytes = encode_header(header_);
  out_.seekp(0);
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out_.close();
  if (!out_) throw Error("failed finalizing shard '" + path_ + "'");
}

ShardReader::ShardReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error("cannot open shard '" + path + "'");
  std::vector<std::uint8_t> bytes(ShardHeader::kBytes);
  in_.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in_.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError("shard '" + path + "' is shorter than its header");
  }
  header_ = decode_header(bytes);
  const auto expected = ShardHeader::kBytes + std::uintmax_t(header_.record_count) * header_.record_bytes();
  if (std::filesystem::file_size(path) != expected) {
    throw FormatError("shard '" + path + "' length does not match its header");
  }
}

DatasetRecord ShardReader::read(std::uint32_t index) {
  if (index >= header_.record_count) throw DomainError("record index out of range");
  const std::size_t n = header_.record_bytes();
  std::vector<std::uint8_t> bytes(n);
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(ShardHeader::kBytes + std::size_t(index) * n));
  in_.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (in_.gcount() != static_cast<std::streamsize>(n)) throw FormatError("truncated record");
  return decode_record(bytes, header_);
}

void write_shard(const std::vector<DatasetRecord>& records, const std::string& path,
                 float resolution, std::uint32_t height, std::uint32_t width) {
  if (!records.empty()) {
    height = static_cast<std::uint32_t>(records.front().x.height);
    width = static_cast<std::uint32_t>(records.front().x.width);
  }
  ShardWriter writer(path, resolution, height, width);
  for (const auto& r : records) writer.append(r);
  writer.finish();
}

std::vector<DatasetRecord> read_shard(const std::string& path) {
  ShardReader reader(path);
  std::vector<DatasetRecord> out;
  out.reserve(reader.size());
  for (std::uint32_t i = 0; i < reader.size(); ++i) out.push_back(reader.read(i));
  return out;
}

namespace {
constexpr std::array<char, 4> kFieldMagic{'N', 'D', 'H', 'F'};
constexpr std::uint32_t kFieldVersion = 1;
}  // namespace

void write_height_field(const HeightField& field, const std::string& path) {
  field.validate();
  std::vector<std::uint8_t> out(kFieldMagic.begin(), kFieldMagic.end());
  put_u32(out, kFieldVersion);
  put_f64(out, field.resolution);
  put_f64(out, field.origin.x());
  put_f64(out, field.origin.y());
  put_u32(out, static_cast<std::uint32_t>(field.width_cells()));
  put_u32(out, static_cast<std::uint32_t>(field.height_cells()));
  for (double v : field.heights.values()) put_f64(out, v);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("failed writing height field '" + path + "'");
}

HeightField read_height_field(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open height field '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Cursor c(bytes);
  c.magic(kFieldMagic, "height field");
  if (c.u32() != kFieldVersion) throw FormatError("unsupported height field version");
  const double res = c.f64();
  const double ox = c.f64();
  const double oy = c.f64();
  const auto w = c.u32();
  const auto h = c.u32();
  if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) throw FormatError("bad height field size");
  if (bytes.size() != 40 + std::size_t(w) * h * 8) throw FormatError("height field length mismatch");
  HeightField field(static_cast<int>(w), static_cast<int>(h), res, Vec2(ox, oy));
  for (double& v : field.heights.values()) v = c.f64();
  field.validate();
  return field;
}

}  // namespace ndem
