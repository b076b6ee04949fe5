#include "bbkd/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bbkd/error.hpp"

namespace bbkd {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string_view bytes, const char* format) : bytes_(bytes), format_(format) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void finish() const {
    require(pos_ == bytes_.size(), ErrorKind::Format,
            std::string(format_) + ": " + std::to_string(remaining()) + " trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    require(bytes_.size() - pos_ >= n, ErrorKind::Format,
            std::string(format_) + ": truncated file");
  }

  std::string_view bytes_;
  const char* format_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_imgf(const Tensor& image) {
  require(image.rank() == 3, ErrorKind::ShapeMismatch,
          "IMGF images must be [C,H,W], got " + shape_string(image.shape()));
  std::string out = "IMGF";
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(image.dim(2)));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(image.dim(1)));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(image.dim(0)));
  out.reserve(out.size() + 4 * image.size());
  for (double v : image.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Tensor decode_imgf(std::string_view bytes) {
  Reader in(bytes, "IMGF");
  require(bytes.size() >= 4 && bytes.substr(0, 4) == "IMGF", ErrorKind::Format,
          "not an IMGF image");
  in.take(4);
  const auto w = in.get<std::uint32_t>();
  const auto h = in.get<std::uint32_t>();
  const auto c = in.get<std::uint32_t>();
  const std::uint64_t n = std::uint64_t{w} * h * c;
  require(n * 4 == in.remaining(), ErrorKind::Format,
          "IMGF: payload size does not match " + std::to_string(c) + "x" + std::to_string(h) +
              "x" + std::to_string(w));
  std::vector<double> data(n);
  for (auto& v : data) v = std::bit_cast<float>(in.get<std::uint32_t>());
  in.finish();
  return Tensor({c, h, w}, std::move(data));
}

void write_imgf(const Tensor& image, const std::filesystem::path& path) {
  write_file(path, encode_imgf(image));
}

Tensor read_imgf(const std::filesystem::path& path) { return decode_imgf(read_file(path)); }

std::string encode_checkpoint(const DenoiserParams& params) {
  std::string out = "BBKD1";
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

DenoiserParams decode_checkpoint(std::string_view bytes) {
  require(bytes.size() >= 5 && bytes.substr(0, 5) == "BBKD1", ErrorKind::Format,
          "not a BBKD1 checkpoint");
  Reader in(bytes, "BBKD1");
  in.take(5);
  const auto version = in.get<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorKind::Format,
          "BBKD1: unsupported version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  DenoiserParams params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint32_t>();
    std::string name(in.take(name_len));
    const auto rank = in.get<std::uint32_t>();
    require(rank <= 8, ErrorKind::Format, "BBKD1: implausible rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(in.get<std::uint64_t>());
    const std::size_t n = shape_size(shape);
    require(n <= in.remaining() / 8, ErrorKind::Format, "BBKD1: truncated file");
    std::vector<double> data(n);
    for (auto& v : data) v = std::bit_cast<double>(in.get<std::uint64_t>());
    require(params.emplace(name, Tensor(std::move(shape), std::move(data))).second,
            ErrorKind::Format, "BBKD1: duplicate tensor '" + name + "'");
  }
  in.finish();
  return params;
}

void save_checkpoint(const DenoiserParams& params, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(params));
}

DenoiserParams load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

void export_pgm(const Tensor& image, const std::filesystem::path& path) {
  std::size_t h = 0, w = 0;
  if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else {
    require(image.rank() == 3 && image.dim(0) == 1, ErrorKind::ShapeMismatch,
            "PGM export needs a single-channel image, got " + shape_string(image.shape()));
    h = image.dim(1);
    w = image.dim(2);
  }
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  for (double v : image.data()) {
    require(v >= -1.0 && v <= 1.0, ErrorKind::InvalidArgument,
            "PGM export: value outside [-1, 1]");
    const auto q = static_cast<std::uint16_t>(std::lround((v + 1.0) * 0.5 * 65535.0));
    out.push_back(static_cast<char>(q >> 8));  // PGM samples are big-endian
    out.push_back(static_cast<char>(q & 0xff));
  }
  write_file(path, out);
}

Tensor import_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::istringstream header(bytes);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  header >> magic >> w >> h >> maxval;
  require(header && magic == "P5" && maxval == 65535, ErrorKind::Format,
          "not a 16-bit binary PGM: " + path.string());
  const auto offset = static_cast<std::size_t>(header.tellg()) + 1;
  require(bytes.size() == offset + 2 * w * h, ErrorKind::Format, "PGM: bad payload size");
  Tensor img({1, h, w});
  for (std::size_t i = 0; i < w * h; ++i) {
    const auto hi = static_cast<unsigned char>(bytes[offset + 2 * i]);
    const auto lo = static_cast<unsigned char>(bytes[offset + 2 * i + 1]);
    img[i] = (static_cast<double>((hi << 8) | lo) / 65535.0) * 2.0 - 1.0;
  }
  return img;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  require(!in.bad(), ErrorKind::Io, "read failed: " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  require(!ec, ErrorKind::Io, "cannot create directory " + path.parent_path().string());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorKind::Io, "cannot move " + tmp.string() + " to " + path.string());
}

}  // namespace bbkd
