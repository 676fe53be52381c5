#include "diagfuse/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "diagfuse/errors.hpp"

namespace diagfuse {
namespace {

struct Overlap {
  std::size_t a = 0, b = 0, both = 0;
};

Overlap overlap(std::span<const double> a, std::span<const double> b, double thresh) {
  if (a.size() != b.size()) {
    throw ShapeError("metric inputs differ in size: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  Overlap o;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool fa = a[i] >= thresh, fb = b[i] >= thresh;
    o.a += fa;
    o.b += fb;
    o.both += fa && fb;
  }
  return o;
}

}  // namespace

double dice(std::span<const double> a, std::span<const double> b, double thresh) {
  const Overlap o = overlap(a, b, thresh);
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double iou(std::span<const double> a, std::span<const double> b, double thresh) {
  const Overlap o = overlap(a, b, thresh);
  const std::size_t uni = o.a + o.b - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return scores[i] < scores[j]; });
  // Average ranks over tie groups, then U = R_pos - n_pos (n_pos + 1) / 2.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0 && labels[order[k]] != 1) throw DataError("auc: labels must be 0 or 1");
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double hf_energy_ratio(std::span<const double> map, std::size_t h, std::size_t w,
                       double cutoff) {
  if (h < 4 || w < 4) throw ShapeError("hf_energy_ratio: map must be at least 4x4");
  if (map.size() != h * w) throw ShapeError("hf_energy_ratio: map size does not match h x w");
  if (cutoff < 0.0) cutoff = static_cast<double>(std::min(h, w)) / 8.0;

  const std::size_t wc = w / 2 + 1;
  std::vector<double> in(map.begin(), map.end());
  fftw_complex* out = fftw_alloc_complex(h * wc);
  fftw_plan plan = fftw_plan_dft_r2c_2d(static_cast<int>(h), static_cast<int>(w), in.data(), out,
                                        FFTW_ESTIMATE);
  fftw_execute(plan);

  double total = 0.0, high = 0.0;
  for (std::size_t u = 0; u < h; ++u) {
    const double fu = static_cast<double>(std::min(u, h - u));
    for (std::size_t v = 0; v < wc; ++v) {
      if (u == 0 && v == 0) continue;
      // Columns 1..ceil(w/2)-1 stand for themselves and their mirror.
      const double mult = (v == 0 || (w % 2 == 0 && v == w / 2)) ? 1.0 : 2.0;
      const double re = out[u * wc + v][0], im = out[u * wc + v][1];
      const double power = mult * (re * re + im * im);
      total += power;
      if (std::hypot(fu, static_cast<double>(v)) > cutoff) high += power;
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(out);
  // Relative floor so a constant map's rounding residue does not count as energy.
  double scale = 0.0;
  for (double x : map) scale += x * x;
  if (total <= 1e-24 * std::max(scale * static_cast<double>(h * w), 1e-300)) return 0.0;
  return high / total;
}

double MetricReport::mean() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.value;
  return s / static_cast<double>(rows.size());
}

double MetricReport::stddev() const {
  if (rows.empty()) return 0.0;
  const double m = mean();
  double s = 0.0;
  for (const auto& r : rows) s += (r.value - m) * (r.value - m);
  return std::sqrt(s / static_cast<double>(rows.size()));
}

void write_report_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "sample_id,metric,value\n";
  for (const auto& r : reports) {
    for (const auto& row : r.rows) out << row.sample_id << ',' << r.metric << ',' << row.value << '\n';
  }
  for (const auto& r : reports) {
    out << "mean," << r.metric << ',' << r.mean() << '\n';
    out << "std," << r.metric << ',' << r.stddev() << '\n';
  }
}

}  // namespace diagfuse
