#include "diagfuse/diagfirst.hpp"

#include <cmath>
#include <numbers>

#include "diagfuse/errors.hpp"
#include "diagfuse/fusion.hpp"
#include "diagfuse/parallel.hpp"

namespace diagfuse {
namespace {

ad::Var payload_var(ad::Tape& tape, const NamedTensor& p, std::vector<ad::Var>* leaves) {
  if (leaves == nullptr) return tape.constant(p.value);
  ad::Var v = tape.leaf(p.value);
  leaves->push_back(v);
  return v;
}

// (h*w) x 2 pixel coordinates in [-1, 1], row-major over pixels.
Tensor coordinate_grid(std::size_t h, std::size_t w) {
  Tensor c({h * w, 2});
  auto norm = [](std::size_t i, std::size_t n) {
    return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0 : 0.0;
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      c[(y * w + x) * 2] = norm(y, h);
      c[(y * w + x) * 2 + 1] = norm(x, w);
    }
  }
  return c;
}

double frobenius(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

ad::Var diagnosis_loss(ad::Tape& tape, const Sample& sample, const DiagNet& net,
                       const Tensor& annotations, ad::Var raw) {
  ad::Var fused = fuse_on_tape(tape, annotations, ad::softmax(raw, 0));
  ad::Var logit = diag_logit(tape, net, tape.constant(sample.image), fused);
  return ad::bce(ad::sigmoid(logit), tape.constant(Tensor::scalar(sample.label)));
}

}  // namespace

ParamKind parse_param_kind(const std::string& text) {
  if (text == "direct") return ParamKind::kDirect;
  if (text == "transrob") return ParamKind::kTransRob;
  if (text == "fourier") return ParamKind::kFourier;
  if (text == "expg") return ParamKind::kExpG;
  throw DataError("parameterization must be direct|transrob|fourier|expg, got '" + text + "'");
}

std::string param_kind_name(ParamKind kind) {
  switch (kind) {
    case ParamKind::kDirect: return "direct";
    case ParamKind::kTransRob: return "transrob";
    case ParamKind::kFourier: return "fourier";
    case ParamKind::kExpG: return "expg";
  }
  return "?";
}

double default_lr(ParamKind kind) { return kind == ParamKind::kExpG ? 0.01 : 0.1; }

FusionParams init_params(ParamKind kind, std::size_t h, std::size_t w, std::size_t n,
                         std::uint64_t seed) {
  if (n == 0) throw DataError("init_params: need at least one rater");
  if (h == 0 || w == 0) throw ShapeError("init_params: empty map");
  FusionParams p{kind, n, h, w, {}};
  switch (kind) {
    case ParamKind::kDirect:
    case ParamKind::kTransRob:
      p.payload.push_back({"raw", Tensor({n, h, w}, 0.0)});
      break;
    case ParamKind::kFourier: {
      const std::size_t wc = w / 2 + 1;
      Tensor re({n, h, wc}, 0.0);
      for (std::size_t i = 0; i < n; ++i) re[i * h * wc] = kFourierInitDc;
      p.payload.push_back({"re", std::move(re)});
      p.payload.push_back({"im", Tensor({n, h, wc}, 0.0)});
      break;
    }
    case ParamKind::kExpG: {
      Rng rng(seed, 0xe496);
      auto dense = [&](const std::string& name, std::size_t in, std::size_t out, double gain) {
        Tensor wt({in, out});
        const double sd = gain / std::sqrt(static_cast<double>(in));
        for (auto& v : wt.values()) v = rng.normal(0.0, sd);
        p.payload.push_back({name + ".w", std::move(wt)});
        p.payload.push_back({name + ".b", Tensor({out}, 0.0)});
      };
      dense("l1", 2, kExpGHidden, 1.0);
      dense("l2", kExpGHidden, kExpGHidden, 1.0);
      // Small output layer: the initial map is close to uniform.
      dense("l3", kExpGHidden, n, 0.1);
      break;
    }
  }
  return p;
}

Tensor fourier_falloff(std::size_t h, std::size_t w) {
  const std::size_t wc = w / 2 + 1;
  Tensor f({h, wc});
  for (std::size_t u = 0; u < h; ++u) {
    const double fu = static_cast<double>(std::min(u, h - u));
    for (std::size_t v = 0; v < wc; ++v) {
      f[u * wc + v] = 1.0 / (1.0 + std::hypot(fu, static_cast<double>(v)));
    }
  }
  return f;
}

ad::SampleGrid similarity_grid(std::size_t h, std::size_t w, double degrees, double scale,
                               double ty, double tx) {
  ad::SampleGrid g{h, w, std::vector<double>(h * w), std::vector<double>(h * w)};
  const double th = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const double cy = 0.5 * static_cast<double>(h - 1), cx = 0.5 * static_cast<double>(w - 1);
  // Output pixel p maps from source R(-th) (p - centre - t) / scale + centre.
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) - cy - ty;
      const double dx = static_cast<double>(x) - cx - tx;
      g.ys[y * w + x] = (c * dy - s * dx) / scale + cy;
      g.xs[y * w + x] = (s * dy + c * dx) / scale + cx;
    }
  }
  return g;
}

ad::Var realize_map(ad::Tape& tape, const FusionParams& params, std::vector<ad::Var>* leaves,
                    Rng* jitter) {
  const std::size_t n = params.n, h = params.h, w = params.w;
  ad::Var raw;
  switch (params.kind) {
    case ParamKind::kDirect:
      raw = payload_var(tape, params.payload.at(0), leaves);
      break;
    case ParamKind::kTransRob: {
      raw = payload_var(tape, params.payload.at(0), leaves);
      if (jitter != nullptr) {
        const double deg = jitter->uniform(-5.0, 5.0);
        const double scale = jitter->uniform(0.95, 1.05);
        const double ty = jitter->uniform(-2.0, 2.0);
        const double tx = jitter->uniform(-2.0, 2.0);
        raw = ad::bilinear_resample(raw, similarity_grid(h, w, deg, scale, ty, tx));
      }
      break;
    }
    case ParamKind::kFourier: {
      ad::Var re = payload_var(tape, params.payload.at(0), leaves);
      ad::Var im = payload_var(tape, params.payload.at(1), leaves);
      const Tensor f = fourier_falloff(h, w);
      const std::size_t plane = f.size();
      Tensor scale({n, h, w / 2 + 1});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < plane; ++k) scale[i * plane + k] = f[k];
      ad::Var sc = tape.constant(std::move(scale));
      raw = ad::inverse_rdft2(ad::mul(re, sc), ad::mul(im, sc), w);
      break;
    }
    case ParamKind::kExpG: {
      std::vector<ad::Var> v;
      for (const auto& p : params.payload) v.push_back(payload_var(tape, p, leaves));
      ad::Var x = tape.constant(coordinate_grid(h, w));
      x = ad::tanh(ad::bias_add(ad::matmul(x, v[0]), v[1]));
      x = ad::tanh(ad::bias_add(ad::matmul(x, v[2]), v[3]));
      x = ad::bias_add(ad::matmul(x, v[4]), v[5]);
      raw = ad::reshape(ad::transpose(x), {n, h, w});
      break;
    }
  }
  if (raw.dims() != Shape{n, h, w}) {
    throw ShapeError("realize_map: payload realizes to " + shape_string(raw.dims()));
  }
  return raw;
}

Tensor realize_map(const FusionParams& params) {
  ad::Tape tape;
  return realize_map(tape, params, nullptr).value();
}

double expg_lipschitz_bound(const FusionParams& params) {
  if (params.kind != ParamKind::kExpG) throw Error("expg_lipschitz_bound: not an ExpG payload");
  return frobenius(params.payload.at(0).value) * frobenius(params.payload.at(2).value) *
         frobenius(params.payload.at(4).value);
}

double diagfirst_loss(const Sample& sample, const DiagNet& net, const FusionParams& params) {
  ad::Tape tape;
  const Tensor ann = annotations_tensor(sample.annotations);
  return diagnosis_loss(tape, sample, net, ann, realize_map(tape, params, nullptr)).value()[0];
}

DiagFirstResult optimize_diagfirst(const Sample& sample, const DiagNet& net, FusionParams params,
                                   const DiagFirstHyper& hyper) {
  if (!net.frozen()) throw Error("optimize_diagfirst: the diagnosis net must be frozen");
  if (params.n != sample.rater_count() || params.h != sample.height() ||
      params.w != sample.width()) {
    throw ShapeError("optimize_diagfirst: params do not match sample " + sample.id);
  }
  const double lr = hyper.lr < 0.0 ? default_lr(params.kind) : hyper.lr;
  const Tensor ann = annotations_tensor(sample.annotations);
  Rng jitter(hyper.seed, 0x7a5);

  DiagFirstResult result;
  OptTrace& trace = result.trace;
  FusionParams best = params;
  double best_loss = 0.0;
  for (std::size_t step = 0;; ++step) {
    double loss_value = 0.0;
    std::vector<Tensor> grads;
    try {
      ad::Tape tape;
      std::vector<ad::Var> leaves;
      const bool need_grad = step < hyper.steps;
      const bool jittered = params.kind == ParamKind::kTransRob;
      ad::Var loss = diagnosis_loss(tape, sample, net, ann,
                                    realize_map(tape, params, need_grad && !jittered ? &leaves : nullptr));
      loss_value = loss.value()[0];
      if (need_grad) {
        if (jittered) {
          // The step follows a freshly transformed map; the tracked loss is the
          // untransformed one so best-so-far compares like with like.
          ad::Tape aug;
          ad::Var l = diagnosis_loss(aug, sample, net, ann, realize_map(aug, params, &leaves, &jitter));
          const auto g = aug.backprop(l);
          for (auto v : leaves) grads.push_back(g[v]);
        } else {
          const auto g = tape.backprop(loss);
          for (auto v : leaves) grads.push_back(g[v]);
        }
      }
    } catch (const NumericError& e) {
      if (step == 0) throw;
      trace.diverged = true;
      trace.message = "stopped at step " + std::to_string(step) + ": " + e.what();
      break;
    }
    trace.losses.push_back(loss_value);
    if (step == 0 || loss_value < best_loss) {
      best_loss = loss_value;
      best = params;
      trace.best_step = step;
    }
    if (step >= hyper.steps) break;
    for (std::size_t k = 0; k < params.payload.size(); ++k) {
      auto& vals = params.payload[k].value;
      for (std::size_t e = 0; e < vals.size(); ++e) vals[e] -= lr * grads[k][e];
    }
  }
  trace.initial_loss = trace.losses.front();
  trace.final_loss = best_loss;

  ad::Tape tape;
  ad::Var raw = realize_map(tape, best, nullptr);
  result.raw_map = raw.value();
  result.fused = fuse_on_tape(tape, ann, ad::softmax(raw, 0)).value();
  clamp_unit(result.fused);
  result.params = std::move(best);
  return result;
}

std::vector<DiagFirstResult> diagfirst_all(const std::vector<Sample>& samples, const DiagNet& net,
                                           ParamKind kind, const DiagFirstHyper& hyper) {
  std::vector<DiagFirstResult> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const Sample& s = samples[i];
    const std::uint64_t seed = Rng::mix(hyper.seed, s.seed);
    DiagFirstHyper h = hyper;
    h.seed = seed;
    out[i] = optimize_diagfirst(s, net, init_params(kind, s.height(), s.width(), s.rater_count(), seed), h);
  });
  return out;
}

}  // namespace diagfuse
