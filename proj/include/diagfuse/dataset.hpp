#pragma once

// On-disk datasets and fused ground-truth directories.
//
// A dataset directory holds train/ and test/ splits, each with manifest.csv:
//   sample_id,label,true_cdr,image,truth_disc,truth_cup,rater<k>_disc,rater<k>_cup...,seed
// Images are TNS1 files (c x h x w), masks binary PGM (foreground 255).
//
// A fused directory holds <sample_id>_disc.pgm, <sample_id>_cup.pgm (8-bit
// quantized) and <sample_id>.tns (2 x h x w, full precision) per sample.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "diagfuse/datagen.hpp"

namespace diagfuse {

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// n samples with ids <prefix>NNNNN; sample k is seeded from (seed, first_index + k).
std::vector<Sample> generate_samples(std::size_t count, std::uint64_t seed, std::size_t first_index,
                                     const GenConfig& config,
                                     const std::vector<RaterProfile>& profiles);
Dataset generate_dataset(std::size_t train, std::size_t test, std::uint64_t seed,
                         const GenConfig& config, const std::vector<RaterProfile>& profiles);

void write_split(const std::filesystem::path& dir, const std::vector<Sample>& samples);
std::vector<Sample> read_split(const std::filesystem::path& dir);
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

// CSV with header boundary_noise_px,cup_bias_px,seed_offset.
std::vector<RaterProfile> read_profiles(const std::filesystem::path& path);

void write_fused(const std::filesystem::path& dir, const std::string& sample_id,
                 const Tensor& fused);
// Every <id>.tns in the directory, keyed by id.
std::map<std::string, Tensor> read_fused_dir(const std::filesystem::path& dir);

}  // namespace diagfuse
