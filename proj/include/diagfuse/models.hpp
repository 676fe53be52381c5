#pragma once

// Small networks used by the pipeline:
//  - DiagNet: mask-attentive glaucoma classifier over image (+) fused mask.
//  - SegNet: two-level encoder/decoder with skip connections predicting
//    per-pixel disc and cup probabilities from the image.
// plus the rule-based vertical cup-to-disc ratio.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "diagfuse/autodiff.hpp"
#include "diagfuse/datagen.hpp"
#include "diagfuse/mask.hpp"
#include "diagfuse/optim.hpp"

namespace diagfuse {

// (rows spanned by cup) / (rows spanned by disc), inclusive extents; 0 for an
// empty cup. Throws DataError for an empty disc.
double vcdr_score(const Mask& disc, const Mask& cup);
// Thresholds a 2 x h x w (disc, cup) tensor, then vcdr_score.
double vcdr_score(const Tensor& masks, double thresh = 0.5);

struct DiagArch {
  std::size_t input_channels = 5;  // image channels + disc + cup
  std::vector<std::size_t> widths{8, 16, 32, 32};
  std::uint64_t seed = 0;
};

class DiagNet {
 public:
  DiagNet() = default;
  DiagNet(DiagArch arch, std::vector<NamedTensor> params);

  const DiagArch& arch() const { return arch_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  // Throws if frozen.
  std::vector<NamedTensor>& mutable_params();
  std::size_t parameter_count() const;

  void freeze() { frozen_ = true; }
  void unfreeze() { frozen_ = false; }
  bool frozen() const { return frozen_; }

 private:
  DiagArch arch_;
  std::vector<NamedTensor> params_;
  bool frozen_ = false;
};

DiagNet build_diag_net(DiagArch arch, std::uint64_t seed);

// Records the classifier on `tape` and returns the {1} logit. When
// `trainable` is non-null the weights become differentiable leaves, appended
// in params() order; otherwise they are constants.
ad::Var diag_logit(ad::Tape& tape, const DiagNet& net, ad::Var image, ad::Var fused_mask,
                   std::vector<ad::Var>* trainable = nullptr);
// Glaucoma probability for image (c x h x w) and fused mask (2 x h x w, values in [0,1]).
double diag_forward(const DiagNet& net, const Tensor& image, const Tensor& fused_mask);

// Which masks accompany the image when training or probing a DiagNet.
struct MaskSource {
  enum class Kind { kTruth, kMajorityVote, kNone, kDegraded };
  Kind kind = Kind::kMajorityVote;
  double iou = 1.0;  // kDegraded only

  // "truth", "mv", "none", "degraded@0.3"
  static MaskSource parse(const std::string& text);
  std::string str() const;
};

// 2 x h x w mask input for a sample under a mask source. Degraded masks are
// seeded from the sample seed, so they are fixed per sample.
Tensor mask_input(const Sample& sample, const MaskSource& source);

struct TrainHyper {
  double lr = 1e-4;
  std::size_t batch = 16;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;  // shuffling
};

struct TrainResult {
  // loss_curve[0] is the mean loss before any update; entry e is the mean
  // per-sample loss seen during epoch e.
  std::vector<double> loss_curve;
};

// Trains in place; throws NumericError naming the epoch on divergence.
TrainResult train_diag(DiagNet& net, const std::vector<Sample>& data, const TrainHyper& hyper,
                       const MaskSource& source);
// Same, with explicit per-sample mask inputs.
TrainResult train_diag(DiagNet& net, const std::vector<Sample>& data,
                       const std::vector<Tensor>& masks, const TrainHyper& hyper);

struct SegArch {
  std::size_t input_channels = 3;
  std::size_t width = 8;
  std::uint64_t seed = 0;
};

class SegNet {
 public:
  SegNet() = default;
  SegNet(SegArch arch, std::vector<NamedTensor> params)
      : arch_(arch), params_(std::move(params)) {}

  const SegArch& arch() const { return arch_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  std::vector<NamedTensor>& mutable_params() { return params_; }

 private:
  SegArch arch_;
  std::vector<NamedTensor> params_;
};

SegNet build_seg_net(SegArch arch, std::uint64_t seed);
// 2 x h x w per-pixel logits; h and w must be multiples of 4.
ad::Var seg_logits(ad::Tape& tape, const SegNet& net, ad::Var image,
                   std::vector<ad::Var>* trainable = nullptr);
// 2 x h x w probabilities in (0,1).
Tensor seg_predict(const SegNet& net, const Tensor& image);

// Per-pixel binary cross-entropy against soft ground truths keyed by sample id.
// Throws DataError naming the first sample without a ground truth.
SegNet train_seg(const std::vector<Sample>& data, const std::map<std::string, Tensor>& gt,
                 const TrainHyper& hyper, const SegArch& arch = {},
                 TrainResult* curve = nullptr);

// Checkpoints: one TNS1 file per weight plus arch.txt with key=value lines.
void save_checkpoint(const std::filesystem::path& dir, const DiagNet& net);
void save_checkpoint(const std::filesystem::path& dir, const SegNet& net);
DiagNet load_diag_net(const std::filesystem::path& dir);
SegNet load_seg_net(const std::filesystem::path& dir);

}  // namespace diagfuse
