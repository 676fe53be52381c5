#include "diagfuse/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "diagfuse/errors.hpp"
#include "diagfuse/fusion.hpp"
#include "diagfuse/io.hpp"
#include "diagfuse/rng.hpp"

namespace diagfuse {
namespace {

Tensor he_normal(Rng& rng, Shape dims, std::size_t fan_in, double gain = 2.0) {
  Tensor t(std::move(dims));
  const double sd = std::sqrt(gain / static_cast<double>(fan_in));
  for (auto& v : t.values()) v = rng.normal(0.0, sd);
  return t;
}

ad::Var param_var(ad::Tape& tape, const NamedTensor& p, std::vector<ad::Var>* trainable) {
  if (trainable == nullptr) return tape.constant(p.value);
  ad::Var v = tape.leaf(p.value);
  trainable->push_back(v);
  return v;
}

void check_unit_interval(const Tensor& t, const char* what) {
  for (double v : t.values()) {
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) {
      throw DataError(std::string(what) + ": mask values must lie in [0,1]");
    }
  }
}

// Mini-batch Adam over per-sample losses. loss_of(tape, index, trainable)
// records one sample's loss with the current weights.
template <typename LossFn>
TrainResult train_loop(std::vector<NamedTensor>& params, std::size_t n, const TrainHyper& hyper,
                       const char* what, LossFn&& loss_of) {
  if (n == 0) throw DataError(std::string(what) + ": empty dataset");
  if (hyper.batch == 0) throw DataError(std::string(what) + ": batch must be >= 1");
  TrainResult result;
  double initial = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ad::Tape tape;
    initial += loss_of(tape, i, nullptr).value()[0];
  }
  result.loss_curve.push_back(initial / static_cast<double>(n));

  Adam adam(hyper.lr);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    try {
      Rng rng(hyper.seed, epoch);
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
      double total = 0.0;
      for (std::size_t start = 0; start < n; start += hyper.batch) {
        const std::size_t stop = std::min(n, start + hyper.batch);
        const double scale = 1.0 / static_cast<double>(stop - start);
        std::vector<Tensor> grads;
        for (const auto& p : params) grads.emplace_back(p.value.dims(), 0.0);
        for (std::size_t j = start; j < stop; ++j) {
          ad::Tape tape;
          std::vector<ad::Var> trainable;
          ad::Var loss = loss_of(tape, order[j], &trainable);
          total += loss.value()[0];
          const auto g = tape.backprop(loss);
          for (std::size_t k = 0; k < params.size(); ++k) {
            const Tensor& gk = g[trainable[k]];
            for (std::size_t e = 0; e < gk.size(); ++e) grads[k][e] += scale * gk[e];
          }
        }
        adam.step(params, grads);
        for (const auto& p : params) {
          if (!p.value.all_finite()) throw NumericError("non-finite weight " + p.name);
        }
      }
      result.loss_curve.push_back(total / static_cast<double>(n));
    } catch (const NumericError& e) {
      throw NumericError(std::string(what) + ": diverged at epoch " + std::to_string(epoch) +
                         ": " + e.what());
    }
  }
  return result;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::map<std::string, std::string> read_arch(const std::filesystem::path& dir) {
  std::ifstream in(dir / "arch.txt");
  if (!in) throw DataError("missing checkpoint: " + (dir / "arch.txt").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& arch_value(const std::map<std::string, std::string>& kv,
                              const std::string& key, const std::filesystem::path& dir) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError(dir.string() + "/arch.txt: missing key " + key);
  return it->second;
}

void save_params(const std::filesystem::path& dir, const std::vector<NamedTensor>& params) {
  for (const auto& p : params) write_tns(dir / (p.name + ".tns"), p.value);
}

std::vector<NamedTensor> load_params(const std::filesystem::path& dir,
                                     std::vector<NamedTensor> expected) {
  for (auto& p : expected) {
    const auto path = dir / (p.name + ".tns");
    if (!std::filesystem::exists(path)) throw DataError("missing checkpoint tensor: " + path.string());
    Tensor t = read_tns(path);
    if (t.dims() != p.value.dims()) {
      throw DataError(path.string() + ": dims " + shape_string(t.dims()) + " expected " +
                      shape_string(p.value.dims()));
    }
    p.value = std::move(t);
  }
  return expected;
}

}  // namespace

double vcdr_score(const Mask& disc, const Mask& cup) {
  std::size_t d0 = 0, d1 = 0, c0 = 0, c1 = 0;
  if (!row_extent(disc, d0, d1)) throw DataError("vcdr_score: empty disc");
  if (!row_extent(cup, c0, c1)) return 0.0;
  return static_cast<double>(c1 - c0 + 1) / static_cast<double>(d1 - d0 + 1);
}

double vcdr_score(const Tensor& masks, double thresh) {
  if (masks.rank() != 3 || masks.dim(0) != 2) {
    throw ShapeError("vcdr_score: expected 2 x h x w, got " + shape_string(masks.dims()));
  }
  const std::size_t h = masks.dim(1), w = masks.dim(2);
  const auto v = masks.values();
  return vcdr_score(Mask::threshold(v.subspan(0, h * w), h, w, thresh),
                    Mask::threshold(v.subspan(h * w, h * w), h, w, thresh));
}

DiagNet::DiagNet(DiagArch arch, std::vector<NamedTensor> params)
    : arch_(std::move(arch)), params_(std::move(params)) {}

std::vector<NamedTensor>& DiagNet::mutable_params() {
  if (frozen_) throw Error("DiagNet: weights are frozen");
  return params_;
}

std::size_t DiagNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

DiagNet build_diag_net(DiagArch arch, std::uint64_t seed) {
  if (arch.widths.empty() || arch.input_channels == 0) throw Error("build_diag_net: empty arch");
  for (auto w : arch.widths)
    if (w == 0) throw Error("build_diag_net: widths must be >= 1");
  arch.seed = seed;
  Rng rng(seed, 0xd1a6);
  std::vector<NamedTensor> params;
  std::size_t in = arch.input_channels;
  for (std::size_t k = 0; k < arch.widths.size(); ++k) {
    const std::size_t out = arch.widths[k];
    const std::string name = "conv" + std::to_string(k);
    params.push_back({name + ".w", he_normal(rng, {out, in, 3, 3}, in * 9)});
    params.push_back({name + ".b", Tensor({out}, 0.0)});
    in = out;
  }
  params.push_back({"dense.w", he_normal(rng, {in, 1}, in, 1.0)});
  params.push_back({"dense.b", Tensor({1}, 0.0)});
  return DiagNet(std::move(arch), std::move(params));
}

ad::Var diag_logit(ad::Tape& tape, const DiagNet& net, ad::Var image, ad::Var fused_mask,
                   std::vector<ad::Var>* trainable) {
  const Shape& id = image.dims();
  const Shape& md = fused_mask.dims();
  if (id.size() != 3 || md.size() != 3 || md[0] != 2 || id[1] != md[1] || id[2] != md[2] ||
      id[0] + 2 != net.arch().input_channels) {
    throw ShapeError("diag_forward: image " + shape_string(id) + " and mask " + shape_string(md) +
                     " do not fit input_channels=" + std::to_string(net.arch().input_channels));
  }
  check_unit_interval(fused_mask.value(), "diag_forward");
  const auto& params = net.params();
  const ad::Var parts[] = {image, fused_mask};
  ad::Var h = ad::concat(parts);
  std::size_t k = 0;
  for (std::size_t layer = 0; layer < net.arch().widths.size(); ++layer) {
    ad::Var w = param_var(tape, params[k++], trainable);
    ad::Var b = param_var(tape, params[k++], trainable);
    h = ad::relu(ad::conv2d(h, w, b, 2));
  }
  ad::Var pooled = ad::global_mean(h);
  ad::Var dw = param_var(tape, params[k++], trainable);
  ad::Var db = param_var(tape, params[k++], trainable);
  ad::Var logit = ad::matmul(ad::reshape(pooled, {1, pooled.value().size()}), dw);
  return ad::add(ad::reshape(logit, {1}), db);
}

double diag_forward(const DiagNet& net, const Tensor& image, const Tensor& fused_mask) {
  ad::Tape tape;
  ad::Var logit = diag_logit(tape, net, tape.constant(image), tape.constant(fused_mask));
  return ad::sigmoid(logit).value()[0];
}

MaskSource MaskSource::parse(const std::string& text) {
  MaskSource s;
  if (text == "truth") {
    s.kind = Kind::kTruth;
  } else if (text == "mv") {
    s.kind = Kind::kMajorityVote;
  } else if (text == "none") {
    s.kind = Kind::kNone;
  } else if (text.rfind("degraded@", 0) == 0) {
    s.kind = Kind::kDegraded;
    try {
      s.iou = std::stod(text.substr(9));
    } catch (const std::exception&) {
      throw DataError("mask source: bad IoU in '" + text + "'");
    }
    if (!(s.iou > 0.0 && s.iou <= 1.0)) throw DataError("mask source: IoU must be in (0,1]");
  } else {
    throw DataError("mask source must be truth|mv|none|degraded@IOU, got '" + text + "'");
  }
  return s;
}

std::string MaskSource::str() const {
  switch (kind) {
    case Kind::kTruth: return "truth";
    case Kind::kMajorityVote: return "mv";
    case Kind::kNone: return "none";
    case Kind::kDegraded: {
      std::ostringstream os;
      os << "degraded@" << iou;
      return os.str();
    }
  }
  return "?";
}

Tensor mask_input(const Sample& sample, const MaskSource& source) {
  const std::size_t h = sample.height(), w = sample.width();
  auto stack = [h, w](const Mask& disc, const Mask& cup) {
    Tensor t({2, h, w});
    for (std::size_t p = 0; p < h * w; ++p) {
      t[p] = disc[p] ? 1.0 : 0.0;
      t[h * w + p] = cup[p] ? 1.0 : 0.0;
    }
    return t;
  };
  switch (source.kind) {
    case MaskSource::Kind::kTruth: return stack(sample.true_disc, sample.true_cup);
    case MaskSource::Kind::kMajorityVote: return majority_vote(annotations_tensor(sample.annotations));
    case MaskSource::Kind::kNone: return Tensor({2, h, w}, 0.0);
    case MaskSource::Kind::kDegraded: {
      const auto d = degrade_pair(sample.true_disc, sample.true_cup, source.iou,
                                  Rng::mix(sample.seed, static_cast<std::uint64_t>(
                                                            std::llround(source.iou * 1000.0))));
      return stack(d.disc, d.cup);
    }
  }
  throw Error("mask_input: unknown source");
}

TrainResult train_diag(DiagNet& net, const std::vector<Sample>& data, const TrainHyper& hyper,
                       const MaskSource& source) {
  std::vector<Tensor> masks;
  masks.reserve(data.size());
  for (const auto& s : data) masks.push_back(mask_input(s, source));
  return train_diag(net, data, masks, hyper);
}

TrainResult train_diag(DiagNet& net, const std::vector<Sample>& data,
                       const std::vector<Tensor>& masks, const TrainHyper& hyper) {
  if (masks.size() != data.size()) throw DataError("train_diag: one mask input per sample required");
  auto& params = net.mutable_params();
  std::vector<Tensor> labels;
  for (const auto& s : data) labels.push_back(Tensor::scalar(s.label));
  return train_loop(params, data.size(), hyper, "train_diag",
                    [&](ad::Tape& tape, std::size_t i, std::vector<ad::Var>* trainable) {
                      ad::Var logit = diag_logit(tape, net, tape.constant(data[i].image),
                                                 tape.constant(masks[i]), trainable);
                      return ad::bce(ad::sigmoid(logit), tape.constant(labels[i]));
                    });
}

SegNet build_seg_net(SegArch arch, std::uint64_t seed) {
  if (arch.width == 0 || arch.input_channels == 0) throw Error("build_seg_net: empty arch");
  arch.seed = seed;
  Rng rng(seed, 0x5e6);
  const std::size_t c = arch.input_channels, w = arch.width;
  std::vector<NamedTensor> params;
  auto conv = [&](const std::string& name, std::size_t out, std::size_t in, std::size_t k) {
    params.push_back({name + ".w", he_normal(rng, {out, in, k, k}, in * k * k)});
    params.push_back({name + ".b", Tensor({out}, 0.0)});
  };
  conv("enc1", w, c, 3);
  conv("enc2", 2 * w, w, 3);
  conv("enc3", 2 * w, 2 * w, 3);
  conv("dec2", w, 4 * w, 3);
  conv("dec1", w, 2 * w, 3);
  conv("out", 2, w, 1);
  return SegNet(arch, std::move(params));
}

ad::Var seg_logits(ad::Tape& tape, const SegNet& net, ad::Var image,
                   std::vector<ad::Var>* trainable) {
  const Shape& d = image.dims();
  if (d.size() != 3 || d[0] != net.arch().input_channels || d[1] % 4 != 0 || d[2] % 4 != 0) {
    throw ShapeError("seg_predict: image " + shape_string(d) + " must be " +
                     std::to_string(net.arch().input_channels) + " x h x w with h, w multiples of 4");
  }
  const auto& p = net.params();
  std::size_t k = 0;
  auto layer = [&](ad::Var x, int stride, bool activate) {
    ad::Var w = param_var(tape, p[k++], trainable);
    ad::Var b = param_var(tape, p[k++], trainable);
    ad::Var y = ad::conv2d(x, w, b, stride);
    return activate ? ad::relu(y) : y;
  };
  ad::Var e1 = layer(image, 1, true);
  ad::Var e2 = layer(e1, 2, true);
  ad::Var e3 = layer(e2, 2, true);
  const ad::Var up2[] = {ad::upsample2(e3), e2};
  ad::Var d2 = layer(ad::concat(up2), 1, true);
  const ad::Var up1[] = {ad::upsample2(d2), e1};
  ad::Var d1 = layer(ad::concat(up1), 1, true);
  return layer(d1, 1, false);
}

Tensor seg_predict(const SegNet& net, const Tensor& image) {
  ad::Tape tape;
  return ad::sigmoid(seg_logits(tape, net, tape.constant(image))).value();
}

SegNet train_seg(const std::vector<Sample>& data, const std::map<std::string, Tensor>& gt,
                 const TrainHyper& hyper, const SegArch& arch, TrainResult* curve) {
  std::vector<const Tensor*> targets;
  for (const auto& s : data) {
    auto it = gt.find(s.id);
    if (it == gt.end()) throw DataError("train_seg: missing ground truth for sample " + s.id);
    if (it->second.dims() != Shape{2, s.height(), s.width()}) {
      throw ShapeError("train_seg: ground truth for " + s.id + " has dims " +
                       shape_string(it->second.dims()));
    }
    check_unit_interval(it->second, "train_seg");
    targets.push_back(&it->second);
  }
  SegArch a = arch;
  if (!data.empty()) a.input_channels = data[0].image.dim(0);
  SegNet net = build_seg_net(a, a.seed);
  // Output bias starts at the per-channel foreground prior, so the small cup
  // class does not stall on an all-background plateau.
  if (!targets.empty()) {
    Tensor& bias = net.mutable_params().back().value;
    for (std::size_t ch = 0; ch < 2; ++ch) {
      double mass = 0.0, count = 0.0;
      for (const Tensor* t : targets) {
        const std::size_t hw = t->size() / 2;
        for (double v : t->values().subspan(ch * hw, hw)) mass += v;
        count += static_cast<double>(hw);
      }
      const double prior = std::clamp(mass / count, 1e-4, 1.0 - 1e-4);
      bias.values()[ch] = std::log(prior / (1.0 - prior));
    }
  }
  TrainResult r = train_loop(net.mutable_params(), data.size(), hyper, "train_seg",
                             [&](ad::Tape& tape, std::size_t i, std::vector<ad::Var>* trainable) {
                               ad::Var logits = seg_logits(tape, net, tape.constant(data[i].image),
                                                           trainable);
                               return ad::bce(ad::sigmoid(logits), tape.constant(*targets[i]));
                             });
  if (curve != nullptr) *curve = std::move(r);
  return net;
}

void save_checkpoint(const std::filesystem::path& dir, const DiagNet& net) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "arch.txt");
  if (!out) throw DataError("cannot write checkpoint " + dir.string());
  out << "kind=diag\ninput_channels=" << net.arch().input_channels
      << "\nwidths=" << join(net.arch().widths) << "\nseed=" << net.arch().seed << '\n';
  save_params(dir, net.params());
}

void save_checkpoint(const std::filesystem::path& dir, const SegNet& net) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "arch.txt");
  if (!out) throw DataError("cannot write checkpoint " + dir.string());
  out << "kind=seg\ninput_channels=" << net.arch().input_channels << "\nwidth=" << net.arch().width
      << "\nseed=" << net.arch().seed << '\n';
  save_params(dir, net.params());
}

DiagNet load_diag_net(const std::filesystem::path& dir) {
  const auto kv = read_arch(dir);
  if (arch_value(kv, "kind", dir) != "diag") throw DataError(dir.string() + ": not a diag checkpoint");
  DiagArch arch;
  try {
    arch.input_channels = std::stoul(arch_value(kv, "input_channels", dir));
    arch.widths.clear();
    std::stringstream ws(arch_value(kv, "widths", dir));
    for (std::string tok; std::getline(ws, tok, ',');) arch.widths.push_back(std::stoul(tok));
    arch.seed = std::stoull(arch_value(kv, "seed", dir));
  } catch (const std::invalid_argument&) {
    throw DataError(dir.string() + "/arch.txt: malformed value");
  }
  DiagNet shape = build_diag_net(arch, arch.seed);
  return DiagNet(shape.arch(), load_params(dir, shape.params()));
}

SegNet load_seg_net(const std::filesystem::path& dir) {
  const auto kv = read_arch(dir);
  if (arch_value(kv, "kind", dir) != "seg") throw DataError(dir.string() + ": not a seg checkpoint");
  SegArch arch;
  try {
    arch.input_channels = std::stoul(arch_value(kv, "input_channels", dir));
    arch.width = std::stoul(arch_value(kv, "width", dir));
    arch.seed = std::stoull(arch_value(kv, "seed", dir));
  } catch (const std::invalid_argument&) {
    throw DataError(dir.string() + "/arch.txt: malformed value");
  }
  SegNet shape = build_seg_net(arch, arch.seed);
  return SegNet(shape.arch(), load_params(dir, shape.params()));
}

}  // namespace diagfuse
