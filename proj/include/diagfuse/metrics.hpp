#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace diagfuse {

// Both inputs thresholded at `thresh` (value >= thresh is foreground).
// Both empty gives 1.0.
double dice(std::span<const double> a, std::span<const double> b, double thresh = 0.5);
double iou(std::span<const double> a, std::span<const double> b, double thresh = 0.5);

// Mann-Whitney rank statistic; tied pairs count 0.5. Throws DataError
// unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

// Fraction of non-DC spectral power at radial frequency > cutoff (in cycles
// per image, frequencies folded to [0, n/2]). cutoff < 0 selects min(h,w)/8.
double hf_energy_ratio(std::span<const double> map, std::size_t h, std::size_t w,
                       double cutoff = -1.0);

struct MetricRow {
  std::string sample_id;
  double value = 0.0;
};

struct MetricReport {
  std::string metric;
  double threshold = 0.5;
  std::vector<MetricRow> rows;

  void add(std::string sample_id, double value) { rows.push_back({std::move(sample_id), value}); }
  double mean() const;
  double stddev() const;  // population
};

// sample_id,metric,value rows, then "mean" and "std" footer rows per report.
void write_report_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports);

}  // namespace diagfuse
