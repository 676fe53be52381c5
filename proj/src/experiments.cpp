#include "diagfuse/experiments.hpp"

#include "diagfuse/errors.hpp"
#include "diagfuse/metrics.hpp"
#include "diagfuse/parallel.hpp"

namespace diagfuse {

MaskSource quality_source(double iou) {
  MaskSource s;
  if (iou >= 1.0) {
    s.kind = MaskSource::Kind::kTruth;
  } else {
    s.kind = MaskSource::Kind::kDegraded;
    s.iou = iou;
  }
  return s;
}

std::vector<double> diag_scores(const DiagNet& net, const std::vector<Sample>& samples,
                                const std::vector<Tensor>& masks) {
  if (masks.size() != samples.size()) throw DataError("diag_scores: one mask per sample required");
  std::vector<double> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { out[i] = diag_forward(net, samples[i].image, masks[i]); });
  return out;
}

std::vector<int> labels_of(const std::vector<Sample>& samples) {
  std::vector<int> out;
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

double prediction_vcdr(const Tensor& masks, double thresh) {
  const std::size_t h = masks.dims().at(1), w = masks.dims().at(2);
  const Mask disc = Mask::threshold(masks.values().subspan(0, h * w), h, w, thresh);
  if (disc.empty()) return 0.0;
  return vcdr_score(masks, thresh);
}

std::vector<MotivationCell> motivation_grid(const std::vector<Sample>& train,
                                            const std::vector<Sample>& test,
                                            const std::vector<double>& ious,
                                            const TrainHyper& hyper, std::uint64_t net_seed) {
  if (ious.empty()) throw DataError("motivation: no mask qualities given");
  const std::vector<int> labels = labels_of(test);
  std::vector<std::vector<Tensor>> test_masks;
  for (double q : ious) {
    std::vector<Tensor> m(test.size());
    parallel_for(test.size(), [&](std::size_t i) { m[i] = mask_input(test[i], quality_source(q)); });
    test_masks.push_back(std::move(m));
  }

  std::vector<MaskSource> models;
  for (double q : ious) models.push_back(quality_source(q));
  models.push_back(MaskSource::parse("none"));

  std::vector<MotivationCell> grid;
  for (const MaskSource& src : models) {
    DiagNet net = build_diag_net({}, net_seed);
    train_diag(net, train, hyper, src);
    net.freeze();
    const bool no_mask = src.kind == MaskSource::Kind::kNone;
    std::vector<Tensor> empty;
    if (no_mask) empty.assign(test.size(), Tensor({2, test[0].height(), test[0].width()}, 0.0));
    for (std::size_t q = 0; q < ious.size(); ++q) {
      const auto scores = diag_scores(net, test, no_mask ? empty : test_masks[q]);
      grid.push_back({src.str(), ious[q], auc(scores, labels)});
    }
  }
  return grid;
}

}  // namespace diagfuse
