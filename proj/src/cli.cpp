#include "diagfuse/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "diagfuse/dataset.hpp"
#include "diagfuse/diagfirst.hpp"
#include "diagfuse/errors.hpp"
#include "diagfuse/experiments.hpp"
#include "diagfuse/fusion.hpp"
#include "diagfuse/io.hpp"
#include "diagfuse/metrics.hpp"
#include "diagfuse/models.hpp"
#include "diagfuse/parallel.hpp"
#include "diagfuse/staple.hpp"

namespace diagfuse::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags every subcommand accepts.
struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string data;
};

void add_common(CLI::App& sub, Common& c, bool with_data, const std::string& out_help) {
  sub.add_option("--seed", c.seed, "Random seed");
  sub.add_option("--out", c.out, out_help);
  if (with_data) sub.add_option("--data", c.data, "Dataset directory written by gen-data");
}

void require(const std::string& value, const std::string& flag, const CLI::App& sub) {
  if (value.empty()) throw UsageError(sub.get_name() + ": " + flag + " is required");
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw UsageError(flag + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

using Extras = std::vector<std::pair<std::string, std::string>>;

// key=value per option of the subcommand (given value or default), then
// values resolved by the handler.
void echo_config(const CLI::App& sub, const fs::path& path, const Extras& extras = {}) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  f << "command=" << sub.get_name() << "\n";
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt == sub.get_help_ptr()) continue;
    std::string value;
    if (opt->count() > 0) {
      for (std::size_t i = 0; i < opt->results().size(); ++i) {
        value += (i ? "," : "") + opt->results()[i];
      }
    } else {
      value = opt->get_default_str();
    }
    std::string name = opt->get_name();
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    f << name << "=" << value << "\n";
  }
  for (const auto& [k, v] : extras) f << k << "=" << v << "\n";
  if (!f) throw DataError("cannot write " + path.string());
}

fs::path sibling_echo(const fs::path& file) {
  return file.parent_path() / (file.filename().string() + ".config.echo");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<Sample> load_split(const std::string& data, const std::string& split) {
  const fs::path root(data);
  if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + data);
  if (split == "all") {
    Dataset ds = read_dataset(root);
    ds.train.insert(ds.train.end(), std::make_move_iterator(ds.test.begin()),
                    std::make_move_iterator(ds.test.end()));
    return std::move(ds.train);
  }
  return read_split(root / split);
}

DiagNet load_frozen_diag(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("diagnosis checkpoint not found: " + dir);
  DiagNet net = load_diag_net(dir);
  net.freeze();
  return net;
}

void write_curve(const fs::path& path, const TrainResult& r) {
  std::ofstream f(path);
  f << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < r.loss_curve.size(); ++e) f << e << "," << r.loss_curve[e] << "\n";
}

const std::vector<std::string> kSplits{"train", "test", "all"};

// -------------------------------------------------------------- gen-data

struct GenData {
  Common c;
  std::size_t train = 600, test = 200, raters = 3, size = 64;
  double glaucoma_frac = 0.5;
  std::string profiles;
  CLI::Option* raters_opt = nullptr;

  void setup(CLI::App& sub) {
    add_common(sub, c, false, "Dataset directory to create");
    sub.add_option("--samples", train, "Training samples")->check(CLI::PositiveNumber);
    sub.add_option("--test-samples", test, "Test samples");
    raters_opt = sub.add_option("--raters", raters, "Raters per sample (ignored with --profiles)")
                     ->check(CLI::PositiveNumber);
    sub.add_option("--size", size, "Image height and width (multiple of 4, at least 16)");
    sub.add_option("--glaucoma-frac", glaucoma_frac, "Fraction of glaucomatous samples")
        ->check(CLI::Range(0.0, 1.0));
    sub.add_option("--profiles", profiles, "Rater profile CSV");
  }

  int run(const CLI::App& sub, std::ostream& out) {
    require(c.out, "--out", sub);
    if (size < 16 || size % 4 != 0) throw UsageError("--size: must be a multiple of 4 and >= 16");
    std::vector<RaterProfile> prof;
    if (!profiles.empty()) {
      prof = read_profiles(profiles);
      if (raters_opt->count() > 0 && prof.size() != raters) {
        throw UsageError("--raters: " + std::to_string(raters) + " disagrees with " +
                         std::to_string(prof.size()) + " profiles in --profiles");
      }
    } else {
      prof = default_profiles(raters);
    }
    GenConfig cfg;
    cfg.h = cfg.w = size;
    cfg.glaucoma_frac = glaucoma_frac;
    const Dataset ds = generate_dataset(train, test, c.seed, cfg, prof);
    write_dataset(c.out, ds);
    echo_config(sub, fs::path(c.out) / "config.echo", {{"raters_resolved", std::to_string(prof.size())}});
    out << "wrote " << ds.train.size() << " train and " << ds.test.size() << " test samples to "
        << c.out << "\n";
    return kExitOk;
  }
};

// ------------------------------------------------------------ train-diag

struct TrainDiagCmd {
  Common c;
  std::string mask_source = "mv", widths = "8,16,32,32";
  std::size_t epochs = 20, batch = 16;
  double lr = 1e-4;

  void setup(CLI::App& sub) {
    add_common(sub, c, true, "Checkpoint directory");
    sub.add_option("--mask-source", mask_source, "truth, mv, none or degraded@IOU");
    sub.add_option("--epochs", epochs, "Training epochs");
    sub.add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    sub.add_option("--batch", batch, "Minibatch size")->check(CLI::PositiveNumber);
    sub.add_option("--widths", widths, "Convolution widths, comma separated");
  }

  int run(const CLI::App& sub, std::ostream& out) {
    require(c.data, "--data", sub);
    require(c.out, "--out", sub);
    MaskSource src;
    try {
      src = MaskSource::parse(mask_source);
    } catch (const Error& e) {
      throw UsageError(std::string("--mask-source: ") + e.what());
    }
    const auto train = load_split(c.data, "train");
    if (train.empty()) throw DataError("no training samples in " + c.data);
    DiagArch arch;
    arch.widths = parse_list<std::size_t>(widths, "--widths");
    arch.input_channels = train[0].image.dims().at(0) + 2;
    DiagNet net = build_diag_net(arch, c.seed);
    TrainHyper hyper{lr, batch, epochs, c.seed};
    const TrainResult r = train_diag(net, train, hyper, src);
    save_checkpoint(c.out, net);
    write_curve(fs::path(c.out) / "loss.csv", r);
    echo_config(sub, fs::path(c.out) / "config.echo");
    out << "trained diagnosis net on " << train.size() << " samples, final loss "
        << r.loss_curve.back() << "\n";
    return kExitOk;
  }
};

// ------------------------------------------------------------------ fuse

struct FuseCmd {
  Common c;
  std::string method = "diagfirst", param = "expg", diag_ckpt, split = "train";
  std::size_t steps = 200;
  double lr = -1.0;
  int threshold_gt = 0;

  void setup(CLI::App& sub) {
    add_common(sub, c, true, "Fused ground-truth directory");
    sub.add_option("--method", method, "Fusion method")
        ->check(CLI::IsMember({"mv", "random", "staple", "diagfirst"}));
    sub.add_option("--param", param, "Expertness parameterization (diagfirst)")
        ->check(CLI::IsMember({"direct", "transrob", "fourier", "expg"}));
    sub.add_option("--diag-ckpt", diag_ckpt, "Frozen diagnosis checkpoint (diagfirst)");
    sub.add_option("--steps", steps, "Descent steps (diagfirst)");
    sub.add_option("--lr", lr, "Descent step size; negative selects the per-parameterization default");
    sub.add_option("--threshold-gt", threshold_gt, "Binarize fused maps at 0.5")
        ->check(CLI::Range(0, 1));
    sub.add_option("--split", split, "Split to fuse")->check(CLI::IsMember(kSplits));
  }

  int run(const CLI::App& sub, std::ostream& out) {
    require(c.data, "--data", sub);
    require(c.out, "--out", sub);
    if (method == "diagfirst") require(diag_ckpt, "--diag-ckpt", sub);
    const auto samples = load_split(c.data, split);
    std::vector<Tensor> fused(samples.size());
    Extras extras;
    const fs::path dir(c.out);
    fs::create_directories(dir);

    if (method == "diagfirst") {
      const DiagNet net = load_frozen_diag(diag_ckpt);
      const ParamKind kind = parse_param_kind(param);
      DiagFirstHyper hyper{steps, lr >= 0 ? lr : default_lr(kind), c.seed};
      extras.emplace_back("lr_resolved", fmt(hyper.lr));
      const auto results = diagfirst_all(samples, net, kind, hyper);
      fs::create_directories(dir / "maps");
      std::ofstream trace(dir / "trace.csv");
      trace << "sample_id,initial_loss,final_loss,best_step,diverged\n" << std::setprecision(17);
      std::size_t diverged = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& r = results[i];
        fused[i] = r.fused;
        write_tns(dir / "maps" / (samples[i].id + ".tns"), r.raw_map);
        trace << samples[i].id << "," << r.trace.initial_loss << "," << r.trace.final_loss << ","
              << r.trace.best_step << "," << (r.trace.diverged ? 1 : 0) << "\n";
        diverged += r.trace.diverged ? 1 : 0;
      }
      if (diverged) out << diverged << " samples diverged; kept their best visited state\n";
    } else {
      parallel_for(samples.size(), [&](std::size_t i) {
        const Tensor a = annotations_tensor(samples[i].annotations);
        if (method == "mv") {
          fused[i] = majority_vote(a);
        } else if (method == "random") {
          fused[i] = random_fuse(a, Rng::mix(c.seed, samples[i].seed));
        } else {
          fused[i] = staple_fuse_annotations(a);
        }
      });
    }

    parallel_for(samples.size(), [&](std::size_t i) {
      write_fused(dir, samples[i].id, threshold_gt ? threshold_fused(fused[i]) : fused[i]);
    });
    echo_config(sub, dir / "config.echo", extras);
    out << "fused " << samples.size() << " samples with " << method << " into " << c.out << "\n";
    return kExitOk;
  }
};

// ------------------------------------------------------------- train-seg

struct TrainSegCmd {
  Common c;
  std::string gt, split = "train";
  std::size_t epochs = 20, batch = 16, width = 8;
  double lr = 1e-3;

  void setup(CLI::App& sub) {
    add_common(sub, c, true, "Checkpoint directory");
    sub.add_option("--gt", gt, "Fused ground-truth directory");
    sub.add_option("--epochs", epochs, "Training epochs");
    sub.add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    sub.add_option("--batch", batch, "Minibatch size")->check(CLI::PositiveNumber);
    sub.add_option("--width", width, "Base channel width")->check(CLI::PositiveNumber);
    sub.add_option("--split", split, "Split to train on")->check(CLI::IsMember(kSplits));
  }

  int run(const CLI::App& sub, std::ostream& out) {
    require(c.data, "--data", sub);
    require(gt, "--gt", sub);
    require(c.out, "--out", sub);
    const auto samples = load_split(c.data, split);
    if (!fs::is_directory(gt)) throw DataError("ground-truth directory not found: " + gt);
    const auto targets = read_fused_dir(gt);
    if (samples.empty()) throw DataError("no samples in " + c.data);
    SegArch arch;
    arch.input_channels = samples[0].image.dims().at(0);
    arch.width = width;
    arch.seed = c.seed;
    TrainResult curve;
    const SegNet net = train_seg(samples, targets, TrainHyper{lr, batch, epochs, c.seed}, arch, &curve);
    save_checkpoint(c.out, net);
    write_curve(fs::path(c.out) / "loss.csv", curve);
    echo_config(sub, fs::path(c.out) / "config.echo");
    out << "trained segmentation net on " << samples.size() << " samples, final loss "
        << curve.loss_curve.back() << "\n";
    return kExitOk;
  }
};

// ----------------------------------------------------------- predict-seg

struct PredictSegCmd {
  Common c;
  std::string ckpt, split = "test";

  void setup(CLI::App& sub) {
    add_common(sub, c, true, "Prediction directory (same layout as fuse output)");
    sub.add_option("--seg-ckpt", ckpt, "Segmentation checkpoint");
    sub.add_option("--split", split, "Split to predict")->check(CLI::IsMember(kSplits));
  }

  int run(const CLI::App& sub, std::ostream& out) {
    require(c.data, "--data", sub);
    require(ckpt, "--seg-ckpt", sub);
    require(c.out, "--out", sub);
    if (!fs::is_directory(ckpt)) throw DataError("segmentation checkpoint not found: " + ckpt);
    const SegNet net = load_seg_net(ckpt);
    const auto samples = load_split(c.data, split);
    fs::create_directories(c.out);
    parallel_for(samples.size(), [&](std::size_t i) {
      write_fused(c.out, samples[i].id, seg_predict(net, samples[i].image));
    });
    echo_config(sub, fs::path(c.out) / "config.echo");
    out << "predicted " << samples.size() << " samples into " << c.out << "\n";
    return kExitOk;
  }
};

// ------------------------------------------------------------------ eval

struct EvalCmd {
  Common c;
  std::string pred, ref = "truth", metrics = "dice,iou,auc,vcdr", diag_ckpt, split = "test";
  double threshold = 0.5;

  void setup(CLI::App& sub) {
    add_common(sub, c, true, "Report CSV");
    sub.add_option("--pred", pred, "Prediction directory, or truth");
    sub.add_option("--ref", ref, "Reference directory, or truth");
    sub.add_option("--metrics", metrics, "Subset of dice,iou,auc,vcdr");
    sub.add_option("--diag-ckpt", diag_ckpt, "Diagnosis checkpoint for the probability AUC");
    sub.add_option("--split", split, "Split to evaluate")->check(CLI::IsMember(kSplits));
    sub.add_option("--threshold", threshold, "Foreground threshold")->check(CLI::Range(0.0, 1.0));
  }

  static std::vector<Tensor> masks_for(const std::vector<Sample>& samples, const std::string& src) {
    std::vector<Tensor> out(samples.size());
    if (src == "truth") {
      const MaskSource truth = MaskSource::parse("truth");
      for (std::size_t i = 0; i < samples.size(); ++i) out[i] = mask_input(samples[i], truth);
      return out;
    }
    if (!fs::is_directory(src)) throw DataError("mask directory not found: " + src);
    const auto maps = read_fused_dir(src);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto it = maps.find(samples[i].id);
      if (it == maps.end()) throw DataError("no masks for sample " + samples[i].id + " in " + src);
      const Shape want{2, samples[i].height(), samples[i].width()};
      if (it->second.dims() != want) throw ShapeError("masks for " + samples[i].id + " are not 2 x h x w");
      out[i] = it->second;
    }
    return out;
  }

  int run(const CLI::App& sub, std::ostream& out) {
    require(c.data, "--data", sub);
    require(pred, "--pred", sub);
    require(c.out, "--out", sub);
    bool want_dice = false, want_iou = false, want_auc = false, want_vcdr = false;
    std::stringstream ss(metrics);
    for (std::string m; std::getline(ss, m, ',');) {
      if (m == "dice") want_dice = true;
      else if (m == "iou") want_iou = true;
      else if (m == "auc") want_auc = true;
      else if (m == "vcdr") want_vcdr = true;
      else throw UsageError("--metrics: unknown metric '" + m + "'");
    }
    const auto samples = load_split(c.data, split);
    const auto p = masks_for(samples, pred);
    const auto r = masks_for(samples, ref);

    std::vector<MetricReport> reports;
    auto report = [&](const std::string& name) -> MetricReport& {
      reports.push_back({name, threshold, {}});
      return reports.back();
    };
    auto channel = [](const Tensor& t, std::size_t ch) {
      const std::size_t hw = t.dims()[1] * t.dims()[2];
      return t.values().subspan(ch * hw, hw);
    };
    const char* names[2] = {"disc", "cup"};
    for (std::size_t ch = 0; ch < 2; ++ch) {
      if (want_dice) {
        auto& rep = report(std::string("dice_") + names[ch]);
        for (std::size_t i = 0; i < samples.size(); ++i) {
          rep.add(samples[i].id, dice(channel(p[i], ch), channel(r[i], ch), threshold));
        }
      }
      if (want_iou) {
        auto& rep = report(std::string("iou_") + names[ch]);
        for (std::size_t i = 0; i < samples.size(); ++i) {
          rep.add(samples[i].id, iou(channel(p[i], ch), channel(r[i], ch), threshold));
        }
      }
    }
    std::vector<double> vcdr(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) vcdr[i] = prediction_vcdr(p[i], threshold);
    if (want_vcdr) {
      auto& pv = report("vcdr");
      auto& err = report("vcdr_abs_err");
      for (std::size_t i = 0; i < samples.size(); ++i) {
        pv.add(samples[i].id, vcdr[i]);
        err.add(samples[i].id, std::abs(vcdr[i] - prediction_vcdr(r[i], threshold)));
      }
    }
    if (want_auc) {
      const auto labels = labels_of(samples);
      report("auc_vcdr").add("all", auc(vcdr, labels));
      if (!diag_ckpt.empty()) {
        const DiagNet net = load_frozen_diag(diag_ckpt);
        report("auc_diag").add("all", auc(diag_scores(net, samples, p), labels));
      }
    }
    const fs::path path(c.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_report_csv(path, reports);
    echo_config(sub, sibling_echo(path));
    for (const auto& rep : reports) out << rep.metric << " mean " << rep.mean() << "\n";
    return kExitOk;
  }
};

// -------------------------------------------------------------- spectrum

struct SpectrumCmd {
  Common c;
  std::string maps;
  double cutoff = -1.0;

  void setup(CLI::App& sub) {
    add_common(sub, c, false, "Report CSV");
    sub.add_option("--maps", maps, "Directory of raw expertness maps (*.tns)");
    sub.add_option("--cutoff", cutoff, "Radial frequency cutoff; negative selects min(h,w)/8");
  }

  int run(const CLI::App& sub, std::ostream& out) {
    require(maps, "--maps", sub);
    require(c.out, "--out", sub);
    if (!fs::is_directory(maps)) throw DataError("map directory not found: " + maps);
    MetricReport rep{"hf_ratio", cutoff, {}};
    for (const auto& [id, t] : read_fused_dir(maps)) {
      const Shape& d = t.dims();
      if (d.size() != 2 && d.size() != 3) throw ShapeError("map " + id + " is not h x w or n x h x w");
      const std::size_t n = d.size() == 3 ? d[0] : 1;
      const std::size_t h = d[d.size() - 2], w = d[d.size() - 1];
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        sum += hf_energy_ratio(t.values().subspan(k * h * w, h * w), h, w, cutoff);
      }
      rep.add(id, sum / static_cast<double>(n));
    }
    if (rep.rows.empty()) throw DataError("no *.tns maps in " + maps);
    const fs::path path(c.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_report_csv(path, {rep});
    echo_config(sub, sibling_echo(path));
    out << "mean hf ratio " << rep.mean() << " over " << rep.rows.size() << " maps\n";
    return kExitOk;
  }
};

// ------------------------------------------------------------ motivation

struct MotivationCmd {
  Common c;
  std::string ious = "0.3,0.5,0.7,1.0";
  std::size_t epochs = 20, batch = 16;
  double lr = 1e-4;

  void setup(CLI::App& sub) {
    add_common(sub, c, true, "Grid CSV (model,test_quality,auc)");
    sub.add_option("--ious", ious, "Mask qualities, comma separated; 1.0 means annotation masks");
    sub.add_option("--epochs", epochs, "Training epochs per model");
    sub.add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    sub.add_option("--batch", batch, "Minibatch size")->check(CLI::PositiveNumber);
  }

  int run(const CLI::App& sub, std::ostream& out) {
    require(c.data, "--data", sub);
    require(c.out, "--out", sub);
    const auto q = parse_list<double>(ious, "--ious");
    for (double v : q) {
      if (!(v > 0.0 && v <= 1.0)) throw UsageError("--ious: values must lie in (0, 1]");
    }
    const Dataset ds = read_dataset(c.data);
    const auto grid = motivation_grid(ds.train, ds.test, q, TrainHyper{lr, batch, epochs, c.seed}, c.seed);
    const fs::path path(c.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    f << "model,test_quality,auc\n" << std::setprecision(10);
    for (const auto& cell : grid) f << cell.model << "," << cell.test_quality << "," << cell.auc << "\n";
    if (!f) throw DataError("cannot write " + path.string());
    echo_config(sub, sibling_echo(path));
    out << "wrote " << grid.size() << " grid cells to " << c.out << "\n";
    return kExitOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-rater optic disc/cup label fusion guided by a diagnosis network", "diagfuse"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  GenData gen;
  TrainDiagCmd train_diag_cmd;
  FuseCmd fuse_cmd;
  TrainSegCmd train_seg_cmd;
  PredictSegCmd predict_cmd;
  EvalCmd eval_cmd;
  SpectrumCmd spectrum_cmd;
  MotivationCmd motivation_cmd;

  std::function<int(std::ostream&)> action;
  auto bind = [&](auto& cmd, const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.setup(*sub);
    sub->callback([&action, &cmd, sub] { action = [&cmd, sub](std::ostream& o) { return cmd.run(*sub, o); }; });
  };
  bind(gen, "gen-data", "Generate a synthetic multi-rater dataset");
  bind(train_diag_cmd, "train-diag", "Train a mask-attentive diagnosis network");
  bind(fuse_cmd, "fuse", "Fuse rater annotations into ground-truth maps");
  bind(train_seg_cmd, "train-seg", "Train a segmentation network on fused ground truth");
  bind(predict_cmd, "predict-seg", "Write segmentation predictions for a split");
  bind(eval_cmd, "eval", "Score predicted masks: Dice, IoU, vCDR and glaucoma AUC");
  bind(spectrum_cmd, "spectrum", "High-frequency energy ratio of expertness maps");
  bind(motivation_cmd, "motivation", "Train-quality x test-quality mask AUC grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action(out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace diagfuse::cli
