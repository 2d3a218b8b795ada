#include "noir/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "noir/error.hpp"

namespace noir::io {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  require(static_cast<std::size_t>(in.gcount()) == n, std::string("truncated file while reading ") + what);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  read_exact(in, reinterpret_cast<char*>(b.data()), 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const char* what) {
  const std::uint64_t lo = get_u32(in, what);
  const std::uint64_t hi = get_u32(in, what);
  return lo | (hi << 32);
}

float get_f32(std::istream& in, const char* what) { return std::bit_cast<float>(get_u32(in, what)); }
double get_f64(std::istream& in, const char* what) { return std::bit_cast<double>(get_u64(in, what)); }

std::string get_string(std::istream& in, const char* what) {
  const auto n = get_u32(in, what);
  require(n <= (1u << 24), std::string("implausible string length in ") + what);
  std::string s(n, '\0');
  read_exact(in, s.data(), n, what);
  return s;
}

void expect_magic(std::istream& in, const char (&magic)[5]) {
  std::array<char, 4> m{};
  in.read(m.data(), 4);
  require(in.gcount() == 4 && std::memcmp(m.data(), magic, 4) == 0, std::string("bad magic; expected ") + magic);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open for reading: " + path.string());
  return in;
}

}  // namespace

void write_epoch(std::ostream& out, const signal::Epoch& e) {
  out.write("EPC1", 4);
  put_u32(out, static_cast<std::uint32_t>(e.channels()));
  put_u32(out, static_cast<std::uint32_t>(e.samples()));
  put_f64(out, e.fs());
  for (const auto& id : e.channel_ids()) put_string(out, id);
  for (Eigen::Index c = 0; c < e.channels(); ++c) {
    for (Eigen::Index t = 0; t < e.samples(); ++t) put_f32(out, static_cast<float>(e.data()(c, t)));
  }
  if (e.label()) put_string(out, *e.label());
  require(static_cast<bool>(out), "write failed");
}

signal::Epoch read_epoch(std::istream& in) {
  expect_magic(in, "EPC1");
  const auto c = get_u32(in, "channel count");
  const auto t = get_u32(in, "sample count");
  const double fs = get_f64(in, "sampling rate");
  std::vector<std::string> ids;
  for (std::uint32_t i = 0; i < c; ++i) ids.push_back(get_string(in, "channel label"));
  signal::Matrix data(c, t);
  for (std::uint32_t i = 0; i < c; ++i) {
    for (std::uint32_t j = 0; j < t; ++j) data(i, j) = get_f32(in, "samples");
  }
  std::optional<std::string> label;
  if (in.peek() != std::char_traits<char>::eof()) label = get_string(in, "label");
  return signal::Epoch(std::move(data), fs, std::move(ids), std::move(label));
}

void save_epoch(const std::filesystem::path& path, const signal::Epoch& e) {
  auto out = open_out(path);
  write_epoch(out, e);
}

signal::Epoch load_epoch(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_epoch(in);
}

void write_feature_matrix(std::ostream& out, const memory::FeatureMatrix& m) {
  require(static_cast<std::size_t>(m.size()) == m.labels.size(), "one label per feature row");
  out.write("FMX1", 4);
  put_u32(out, static_cast<std::uint32_t>(m.size()));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  for (const auto& l : m.labels) put_string(out, l);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    for (Eigen::Index j = 0; j < m.dim(); ++j) put_f32(out, static_cast<float>(m.data(i, j)));
  }
  require(static_cast<bool>(out), "write failed");
}

memory::FeatureMatrix read_feature_matrix(std::istream& in) {
  expect_magic(in, "FMX1");
  const auto n = get_u32(in, "row count");
  const auto d = get_u32(in, "dimension");
  memory::FeatureMatrix m;
  for (std::uint32_t i = 0; i < n; ++i) {
    m.labels.push_back(get_string(in, "label"));
    memory::split_label(m.labels.back());
  }
  m.data.resize(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) m.data(i, j) = get_f32(in, "features");
  }
  require(m.data.allFinite(), "feature matrix entries must be finite");
  return m;
}

void save_feature_matrix(const std::filesystem::path& path, const memory::FeatureMatrix& m) {
  auto out = open_out(path);
  write_feature_matrix(out, m);
}

memory::FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_feature_matrix(in);
}

void write_feature_map(std::ostream& out, const param::FeatureMap& m) {
  require(m.data.size() == static_cast<std::size_t>(m.channels) * m.height * m.width, "feature map data size mismatch");
  out.write("FMAP", 4);
  put_u32(out, static_cast<std::uint32_t>(m.channels));
  put_u32(out, static_cast<std::uint32_t>(m.height));
  put_u32(out, static_cast<std::uint32_t>(m.width));
  put_u32(out, static_cast<std::uint32_t>(m.image_width));
  put_u32(out, static_cast<std::uint32_t>(m.image_height));
  for (float v : m.data) put_f32(out, v);
  require(static_cast<bool>(out), "write failed");
}

param::FeatureMap read_feature_map(std::istream& in) {
  expect_magic(in, "FMAP");
  const auto c = static_cast<int>(get_u32(in, "channels"));
  const auto h = static_cast<int>(get_u32(in, "grid height"));
  const auto w = static_cast<int>(get_u32(in, "grid width"));
  const auto iw = static_cast<int>(get_u32(in, "image width"));
  const auto ih = static_cast<int>(get_u32(in, "image height"));
  param::FeatureMap m(c, h, w, iw, ih);
  for (auto& v : m.data) v = get_f32(in, "features");
  m.validate();
  return m;
}

void save_feature_map(const std::filesystem::path& path, const param::FeatureMap& m) {
  auto out = open_out(path);
  write_feature_map(out, m);
}

param::FeatureMap load_feature_map(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_feature_map(in);
}

param::FeatureMap mask_to_map(const param::Mask& mask) {
  param::FeatureMap m(1, mask.height, mask.width, mask.width, mask.height);
  for (std::size_t i = 0; i < mask.on.size(); ++i) m.data[i] = mask.on[i] ? 1.0f : 0.0f;
  return m;
}

param::Mask map_to_mask(const param::FeatureMap& map) {
  require(map.channels == 1, "mask files carry a single channel");
  param::Mask m{map.width, map.height, std::vector<std::uint8_t>(map.data.size())};
  for (std::size_t i = 0; i < map.data.size(); ++i) m.on[i] = map.data[i] > 0.5f ? 1 : 0;
  return m;
}

}  // namespace noir::io
