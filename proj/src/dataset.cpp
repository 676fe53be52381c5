#include "diagfuse/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "diagfuse/errors.hpp"
#include "diagfuse/io.hpp"
#include "diagfuse/parallel.hpp"
#include "diagfuse/rng.hpp"

namespace diagfuse {
namespace fs = std::filesystem;
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string tok; std::getline(ss, tok, ',');) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string sample_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05zu", index);
  return buf;
}

double parse_double(const std::string& s, const fs::path& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where.string() + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<Sample> generate_samples(std::size_t count, std::uint64_t seed, std::size_t first_index,
                                     const GenConfig& config,
                                     const std::vector<RaterProfile>& profiles) {
  if (profiles.empty()) throw DataError("generate_samples: need at least one rater profile");
  std::vector<Sample> out(count);
  parallel_for(count, [&](std::size_t k) {
    Sample s = synth_sample(Rng::mix(seed, first_index + k), config);
    s.id = sample_name(first_index + k);
    s.annotations = simulate_raters(s, profiles);
    out[k] = std::move(s);
  });
  return out;
}

Dataset generate_dataset(std::size_t train, std::size_t test, std::uint64_t seed,
                         const GenConfig& config, const std::vector<RaterProfile>& profiles) {
  return {generate_samples(train, seed, 0, config, profiles),
          generate_samples(test, seed, train, config, profiles)};
}

void write_split(const fs::path& dir, const std::vector<Sample>& samples) {
  fs::create_directories(dir);
  std::ofstream man(dir / "manifest.csv");
  if (!man) throw DataError("cannot write " + (dir / "manifest.csv").string());
  const std::size_t n = samples.empty() ? 0 : samples[0].rater_count();
  man << "sample_id,label,true_cdr,image,truth_disc,truth_cup";
  for (std::size_t k = 0; k < n; ++k) man << ",rater" << k << "_disc,rater" << k << "_cup";
  man << ",seed\n";
  man.precision(17);
  for (const auto& s : samples) {
    if (s.rater_count() != n) throw DataError("write_split: samples differ in rater count");
    write_tns(dir / (s.id + "_image.tns"), s.image);
    write_pgm(dir / (s.id + "_disc.pgm"), s.true_disc);
    write_pgm(dir / (s.id + "_cup.pgm"), s.true_cup);
    man << s.id << ',' << s.label << ',' << s.true_cdr << ',' << s.id << "_image.tns," << s.id
        << "_disc.pgm," << s.id << "_cup.pgm";
    for (std::size_t k = 0; k < n; ++k) {
      const std::string stem = s.id + "_r" + std::to_string(k);
      write_pgm(dir / (stem + "_disc.pgm"), s.annotations[k].disc);
      write_pgm(dir / (stem + "_cup.pgm"), s.annotations[k].cup);
      man << ',' << stem << "_disc.pgm," << stem << "_cup.pgm";
    }
    man << ',' << s.seed << '\n';
  }
}

std::vector<Sample> read_split(const fs::path& dir) {
  const fs::path path = dir / "manifest.csv";
  std::ifstream in(path);
  if (!in) throw DataError("missing manifest: " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  if (header.size() < 9 || header[0] != "sample_id" || header.back() != "seed" ||
      (header.size() - 7) % 2 != 0) {
    throw DataError(path.string() + ": unexpected header");
  }
  const std::size_t n = (header.size() - 7) / 2;
  std::vector<Sample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw DataError(path.string() + ": wrong field count in row " + f[0]);
    Sample s;
    s.id = f[0];
    s.label = static_cast<int>(parse_double(f[1], path));
    s.true_cdr = parse_double(f[2], path);
    s.image = read_tns(dir / f[3]);
    s.true_disc = read_pgm_mask(dir / f[4]);
    s.true_cup = read_pgm_mask(dir / f[5]);
    for (std::size_t k = 0; k < n; ++k) {
      s.annotations.push_back({read_pgm_mask(dir / f[6 + 2 * k]), read_pgm_mask(dir / f[7 + 2 * k])});
    }
    try {
      s.seed = std::stoull(f.back());
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad seed for " + s.id);
    }
    if (s.image.rank() != 3 || s.image.dim(1) != s.height() || s.image.dim(2) != s.width()) {
      throw DataError(path.string() + ": image and mask sizes differ for " + s.id);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  write_split(dir / "train", data.train);
  write_split(dir / "test", data.test);
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("missing dataset directory: " + dir.string());
  return {read_split(dir / "train"), read_split(dir / "test")};
}

std::vector<RaterProfile> read_profiles(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing profiles file: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("boundary_noise_px", 0) != 0) throw DataError(path.string() + ": unexpected header");
  std::vector<RaterProfile> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw DataError(path.string() + ": expected 3 fields per row");
    RaterProfile p;
    p.boundary_noise_px = parse_double(f[0], path);
    p.cup_bias_px = parse_double(f[1], path);
    p.seed_offset = static_cast<std::int64_t>(parse_double(f[2], path));
    if (p.boundary_noise_px < 0.0) throw DataError(path.string() + ": boundary_noise_px must be >= 0");
    out.push_back(p);
  }
  if (out.empty()) throw DataError(path.string() + ": no profiles");
  return out;
}

void write_fused(const fs::path& dir, const std::string& sample_id, const Tensor& fused) {
  if (fused.rank() != 3 || fused.dim(0) != 2) {
    throw ShapeError("write_fused: expected 2 x h x w, got " + shape_string(fused.dims()));
  }
  fs::create_directories(dir);
  const std::size_t h = fused.dim(1), w = fused.dim(2);
  write_pgm(dir / (sample_id + "_disc.pgm"), fused.values().subspan(0, h * w), h, w);
  write_pgm(dir / (sample_id + "_cup.pgm"), fused.values().subspan(h * w, h * w), h, w);
  write_tns(dir / (sample_id + ".tns"), fused);
}

std::map<std::string, Tensor> read_fused_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("missing fused directory: " + dir.string());
  std::map<std::string, Tensor> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".tns") continue;
    out[entry.path().stem().string()] = read_tns(entry.path());
  }
  return out;
}

}  // namespace diagfuse
