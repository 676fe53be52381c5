#pragma once

// Experiment recipes shared by the CLI and the acceptance harness.

#include <string>
#include <vector>

#include "diagfuse/datagen.hpp"
#include "diagfuse/models.hpp"

namespace diagfuse {

struct MotivationCell {
  std::string model;         // training mask source: degraded@x, truth or none
  double test_quality = 1.0; // IoU of the test masks (1 = annotation masks)
  double auc = 0.0;
};

// Trains one DiagNet per training mask quality in `ious` (1.0 means the
// annotation masks themselves) plus a no-mask model, and scores each on the
// test split with masks of every quality in `ious`. Returns the
// (|ious| + 1) x |ious| grid, models in the order of `ious` then "none".
// The no-mask model always receives empty masks.
std::vector<MotivationCell> motivation_grid(const std::vector<Sample>& train,
                                            const std::vector<Sample>& test,
                                            const std::vector<double>& ious,
                                            const TrainHyper& hyper, std::uint64_t net_seed);

MaskSource quality_source(double iou);

// Glaucoma scores of a frozen DiagNet on each sample under the given masks.
std::vector<double> diag_scores(const DiagNet& net, const std::vector<Sample>& samples,
                                const std::vector<Tensor>& masks);
std::vector<int> labels_of(const std::vector<Sample>& samples);

// vcdr_score of a predicted 2 x h x w mask pair, 0 when the predicted disc
// is empty (no evidence of cupping).
double prediction_vcdr(const Tensor& masks, double thresh = 0.5);

}  // namespace diagfuse
