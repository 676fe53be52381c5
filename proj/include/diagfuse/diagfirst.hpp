#pragma once

// Expertness maps optimized against a frozen diagnosis network.
//
// Per sample, the raw map m (n x h x w) is produced from a payload by one of
// four parameterizations, normalized by a softmax over raters, used to fuse
// the annotations, and scored by the frozen DiagNet's cross-entropy against
// the sample's label. Gradient descent on the payload lowers that loss.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diagfuse/autodiff.hpp"
#include "diagfuse/datagen.hpp"
#include "diagfuse/models.hpp"
#include "diagfuse/optim.hpp"
#include "diagfuse/rng.hpp"

namespace diagfuse {

enum class ParamKind { kDirect, kTransRob, kFourier, kExpG };

ParamKind parse_param_kind(const std::string& text);
std::string param_kind_name(ParamKind kind);

// Payload tensors by kind:
//   direct, transrob: "raw" n x h x w
//   fourier:          "re", "im" n x h x (w/2+1) half spectra
//   expg:             "l1.w" 2x32, "l1.b", "l2.w" 32x32, "l2.b", "l3.w" 32xn, "l3.b"
struct FusionParams {
  ParamKind kind = ParamKind::kDirect;
  std::size_t n = 0, h = 0, w = 0;
  std::vector<NamedTensor> payload;
};

inline constexpr std::size_t kExpGHidden = 32;
inline constexpr double kFourierInitDc = 1.0;

FusionParams init_params(ParamKind kind, std::size_t h, std::size_t w, std::size_t n,
                         std::uint64_t seed);

// Records the raw n x h x w map. When `leaves` is non-null the payload becomes
// differentiable leaves in payload order. `jitter` is only used by transrob:
// null gives the untransformed map, otherwise a fresh random rotation, scale
// and translation is drawn from it.
ad::Var realize_map(ad::Tape& tape, const FusionParams& params, std::vector<ad::Var>* leaves,
                    Rng* jitter = nullptr);
Tensor realize_map(const FusionParams& params);

// Upper bound on the Lipschitz constant of the ExpG coordinate MLP in the
// Euclidean norm: the product of the layers' Frobenius norms.
double expg_lipschitz_bound(const FusionParams& params);

// Radial falloff 1/(1+f) applied to Fourier coefficients, h x (w/2+1).
Tensor fourier_falloff(std::size_t h, std::size_t w);

// Sampling grid of a rotation (degrees) about the image centre, isotropic
// scale, and translation (pixels).
ad::SampleGrid similarity_grid(std::size_t h, std::size_t w, double degrees, double scale,
                               double ty, double tx);

struct DiagFirstHyper {
  std::size_t steps = 200;
  double lr = -1.0;  // < 0 selects the per-kind default
  std::uint64_t seed = 0;
};

double default_lr(ParamKind kind);

struct OptTrace {
  std::vector<double> losses;  // loss at each visited parameter state, losses[0] = initial
  std::size_t best_step = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;  // min over visited states
  bool diverged = false;
  std::string message;
};

struct DiagFirstResult {
  Tensor fused;    // 2 x h x w under the best parameters
  Tensor raw_map;  // n x h x w under the best parameters (untransformed)
  FusionParams params;
  OptTrace trace;
};

// Diagnosis loss of a sample under params (no transform).
double diagfirst_loss(const Sample& sample, const DiagNet& net, const FusionParams& params);

// Requires a frozen net. Runs `steps` descent updates and keeps the best
// visited state, so trace.final_loss <= trace.initial_loss.
DiagFirstResult optimize_diagfirst(const Sample& sample, const DiagNet& net, FusionParams params,
                                   const DiagFirstHyper& hyper);


// Optimizes every sample (seeded per sample from hyper.seed) in parallel and
// returns the results in input order.
std::vector<DiagFirstResult> diagfirst_all(const std::vector<Sample>& samples, const DiagNet& net,
                                           ParamKind kind, const DiagFirstHyper& hyper);

}  // namespace diagfuse
