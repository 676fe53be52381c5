#include "diagfuse/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "diagfuse/errors.hpp"

namespace diagfuse {
namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xff);
    return r;
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

// Next whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

void write_tns(const std::filesystem::path& path, const Tensor& t) {
  auto out = open_out(path);
  out << "TNS1\n" << t.rank() << '\n';
  for (std::size_t i = 0; i < t.rank(); ++i) out << (i ? " " : "") << t.dim(i);
  out << '\n';
  std::vector<std::uint64_t> raw(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) raw[i] = to_little(std::bit_cast<std::uint64_t>(t[i]));
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  if (!out) throw DataError("write failed: " + path.string());
}

Tensor read_tns(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string magic, line;
  std::getline(in, magic);
  if (magic != "TNS1") throw DataError(path.string() + ": not a TNS1 file");
  std::size_t ndim = 0;
  if (!std::getline(in, line) || !(std::istringstream(line) >> ndim) || ndim == 0) {
    throw DataError(path.string() + ": bad rank line");
  }
  std::getline(in, line);
  std::istringstream dims_in(line);
  Shape dims(ndim);
  for (auto& d : dims) {
    if (!(dims_in >> d) || d == 0) throw DataError(path.string() + ": bad dims line");
  }
  std::vector<std::uint64_t> raw(shape_size(dims));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  if (in.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t))) {
    throw DataError(path.string() + ": truncated payload");
  }
  std::vector<double> values(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) values[i] = std::bit_cast<double>(to_little(raw[i]));
  return Tensor(std::move(dims), std::move(values));
}

void write_pgm(const std::filesystem::path& path, const Mask& m) {
  auto out = open_out(path);
  out << "P5\n" << m.width() << ' ' << m.height() << "\n255\n";
  std::vector<char> px(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) px[i] = m[i] ? static_cast<char>(255) : 0;
  out.write(px.data(), static_cast<std::streamsize>(px.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

void write_pgm(const std::filesystem::path& path, std::span<const double> values,
               std::size_t h, std::size_t w) {
  if (values.size() != h * w) throw ShapeError("write_pgm: size mismatch");
  auto out = open_out(path);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<char> px(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    px[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  out.write(px.data(), static_cast<std::streamsize>(px.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Gray8 read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (pgm_token(in) != "P5") throw DataError(path.string() + ": not a binary PGM");
  Gray8 g;
  int maxval = 0;
  try {
    g.w = std::stoul(pgm_token(in));
    g.h = std::stoul(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": bad PGM header");
  }
  if (maxval != 255 || g.w == 0 || g.h == 0) throw DataError(path.string() + ": unsupported PGM");
  g.px.resize(g.w * g.h);
  in.read(reinterpret_cast<char*>(g.px.data()), static_cast<std::streamsize>(g.px.size()));
  if (in.gcount() != static_cast<std::streamsize>(g.px.size())) {
    throw DataError(path.string() + ": truncated PGM");
  }
  return g;
}

Mask read_pgm_mask(const std::filesystem::path& path) {
  const Gray8 g = read_pgm(path);
  Mask m(g.h, g.w);
  for (std::size_t i = 0; i < g.px.size(); ++i) m[i] = g.px[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace diagfuse
