#include "d4lcn/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "d4lcn/anchors.hpp"
#include "d4lcn/codec.hpp"
#include "d4lcn/dgfilter.hpp"
#include "d4lcn/eval.hpp"
#include "d4lcn/geometry.hpp"
#include "d4lcn/kitti.hpp"
#include "d4lcn/losses.hpp"
#include "d4lcn/reference.hpp"
#include "d4lcn/tensor.hpp"

namespace d4lcn::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

std::string fmt_fixed(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<fs::path> sorted_files(const std::string& dir) {
  std::vector<fs::path> out;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

RunConfig defaults() { return RunConfig{}; }

double check_eq1(std::uint64_t seed, int cases, int fixed_k,
                 std::ostream& out) {
  SplitMix64 rng(seed);
  const int ks[] = {1, 3, 5};
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) {
    Dims4 dims;
    dims.n = 1 + static_cast<std::int64_t>(rng.next() % 2);
    dims.c = 1 + static_cast<std::int64_t>(rng.next() % 8);
    dims.h = 1 + static_cast<std::int64_t>(rng.next() % 16);
    dims.w = 1 + static_cast<std::int64_t>(rng.next() % 16);
    const int k = fixed_k > 0 ? fixed_k : ks[rng.next() % 3];
    const Tensor input = Tensor::random_uniform(dims, rng.next(), -1.0, 1.0);
    const Tensor depth = Tensor::random_uniform(dims, rng.next(), -1.0, 1.0);
    const Tensor naive = dlcn_forward(input, depth, k, FilterMode::naive);
    const Tensor fast = dlcn_forward(input, depth, k, FilterMode::fast);
    worst = std::max(worst, max_abs_diff(naive, fast));
  }
  out << "check eq1: cases=" << cases << " max|fast-naive|=" << fmt_sci(worst)
      << "\n";
  return worst;
}

double check_eq2(std::uint64_t seed, int cases, const RunConfig& cfg,
                 std::ostream& out) {
  SplitMix64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) {
    const int d = cfg.d;
    Dims4 dims;
    dims.n = 1 + static_cast<std::int64_t>(rng.next() % 2);
    dims.c = 1 + static_cast<std::int64_t>(rng.next() % 6);
    dims.h = d + static_cast<std::int64_t>(rng.next() % 10);
    dims.w = d + static_cast<std::int64_t>(rng.next() % 10);
    const int n_f = 1 + static_cast<int>(rng.next() %
                                         static_cast<std::uint64_t>(dims.c));
    const DGFilterParams params = DGFilterParams::initialized(
        cfg.k, d, n_f, static_cast<int>(dims.c), rng.next());
    const Tensor input = Tensor::random_uniform(dims, rng.next(), -1.0, 1.0);
    const Tensor depth = Tensor::random_uniform(dims, rng.next(), -1.0, 1.0);
    const Tensor fast = d4lcn_forward(input, depth, params).output;
    const Tensor loops = reference::d4lcn_forward_loops(input, depth, params);
    worst = std::max(worst, max_abs_diff(fast, loops));
  }
  out << "check eq2: cases=" << cases << " k=" << cfg.k << " d=" << cfg.d
      << " max|fast-loops|=" << fmt_sci(worst) << "\n";
  return worst;
}

double check_grad(std::uint64_t seed, int cases, double step,
                  std::ostream& out) {
  SplitMix64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) {
    const int d = 1 + static_cast<int>(rng.next() % 3);
    const int k = (rng.next() % 2) ? 3 : 1;
    Dims4 dims;
    dims.n = 1;
    dims.c = 2 + static_cast<std::int64_t>(rng.next() % 2);
    dims.h = std::max<std::int64_t>(d, 5 + static_cast<std::int64_t>(rng.next() % 2));
    dims.w = std::max<std::int64_t>(d, 5 + static_cast<std::int64_t>(rng.next() % 2));
    const int n_f = 1 + static_cast<int>(rng.next() % 2);
    const DGFilterParams params = DGFilterParams::initialized(
        k, d, n_f, static_cast<int>(dims.c), rng.next());
    const Tensor input = Tensor::random_uniform(dims, rng.next(), 0.5, 1.5);
    const Tensor depth = Tensor::random_uniform(dims, rng.next(), 0.5, 1.5);
    const Tensor upstream = Tensor::random_uniform(dims, rng.next(), 0.5, 1.5);
    const reference::GradCheckReport rep =
        reference::gradient_check(input, depth, params, upstream, step);
    worst = std::max(worst, rep.max_rel_error);
  }
  out << "check grad: cases=" << cases << " step=" << fmt_sci(step)
      << " max rel err=" << fmt_sci(worst) << "\n";
  return worst;
}

BenchResult bench_dgf(int n, int c, int hw, int k, int d, int n_f, int iters,
                      int warmup, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const Dims4 dims{n, c, hw, hw};
  const DGFilterParams params =
      DGFilterParams::initialized(k, d, n_f, c, rng.next());
  const Tensor input = Tensor::random_uniform(dims, rng.next(), -1.0, 1.0);
  const Tensor depth = Tensor::random_uniform(dims, rng.next(), -1.0, 1.0);

  const auto time_once = [&](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  };
  const auto median_of = [&](auto&& fn) {
    for (int i = 0; i < warmup; ++i) fn();
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(iters));
    for (int i = 0; i < iters; ++i) samples.push_back(time_once(fn));
    std::sort(samples.begin(), samples.end());
    const std::size_t mid = samples.size() / 2;
    return samples.size() % 2 == 1
               ? samples[mid]
               : (samples[mid - 1] + samples[mid]) / 2.0;
  };

  BenchResult r;
  volatile double sink = 0.0;
  r.naive_ms = median_of([&] {
    sink = reference::d4lcn_forward_loops(input, depth, params).data()[0];
  });
  r.fast_ms = median_of([&] {
    sink = d4lcn_forward(input, depth, params).output.data()[0];
  });
  (void)sink;
  r.speedup = r.fast_ms > 0.0 ? r.naive_ms / r.fast_ms : 0.0;
  return r;
}

namespace {

// ---------------------------------------------------------------- dgf I/O

int cmd_dgf_forward(const std::string& input_path, const std::string& depth_path,
                    std::uint64_t seed, const RunConfig& cfg,
                    const std::string& out_path,
                    const std::string& weights_out, std::ostream& out) {
  const Tensor input = read_tensor(input_path);
  const Tensor depth = read_tensor(depth_path);
  const DGFilterParams params = DGFilterParams::initialized(
      cfg.k, cfg.d, cfg.n_f, static_cast<int>(input.dims().c), seed);
  const D4lcnResult result = d4lcn_forward(input, depth, params);
  write_tensor(out_path, result.output);
  if (!weights_out.empty()) {
    write_tensor(weights_out, result.weights.to_tensor());
  }
  out << "dgf forward: " << input.dims().str() << " k=" << cfg.k
      << " d=" << cfg.d << " nf=" << cfg.n_f << " -> " << out_path << "\n";
  return 0;
}

int cmd_dgf_backward(const std::string& input_path,
                     const std::string& depth_path,
                     const std::string& upstream_path, std::uint64_t seed,
                     const RunConfig& cfg, const std::string& grad_input_path,
                     const std::string& grad_depth_path,
                     const std::string& grad_weights_path,
                     const std::string& grad_bias_path, std::ostream& out) {
  const Tensor input = read_tensor(input_path);
  const Tensor depth = read_tensor(depth_path);
  const Tensor upstream = read_tensor(upstream_path);
  const DGFilterParams params = DGFilterParams::initialized(
      cfg.k, cfg.d, cfg.n_f, static_cast<int>(input.dims().c), seed);
  const D4lcnGradients g = d4lcn_backward(input, depth, params, upstream);
  if (!grad_input_path.empty()) write_tensor(grad_input_path, g.grad_input);
  if (!grad_depth_path.empty()) write_tensor(grad_depth_path, g.grad_depth);
  if (!grad_weights_path.empty()) {
    write_tensor(grad_weights_path, g.grad_conv_weights);
  }
  if (!grad_bias_path.empty()) {
    write_tensor(grad_bias_path,
                 Tensor({static_cast<std::int64_t>(g.grad_conv_bias.size()), 1,
                         1, 1},
                        g.grad_conv_bias));
  }
  out << "dgf backward: " << input.dims().str() << " k=" << cfg.k
      << " d=" << cfg.d << " nf=" << cfg.n_f << "\n";
  return 0;
}

int cmd_inspect_dilation(const std::string& weights_path,
                         const std::string& input_path, std::uint64_t seed,
                         const RunConfig& cfg, const std::string& weights_out,
                         std::ostream& out) {
  DilationWeights weights;
  if (!weights_path.empty()) {
    weights = DilationWeights::from_tensor(read_tensor(weights_path));
  } else {
    const Tensor input = read_tensor(input_path);
    const DGFilterParams params = DGFilterParams::initialized(
        cfg.k, cfg.d, cfg.n_f, static_cast<int>(input.dims().c), seed);
    weights = adaptive_weights(shift_pool(input, cfg.n_f), params);
  }
  const std::vector<double> ratios = dilation_histogram(weights);
  out << "dilation histogram over (n=" << weights.n << ", c=" << weights.c
      << "):\n";
  for (std::size_t w = 0; w < ratios.size(); ++w) {
    out << "  rate " << (w + 1) << ": " << fmt_fixed(ratios[w]) << "\n";
  }
  if (!weights_out.empty()) write_tensor(weights_out, weights.to_tensor());
  return 0;
}

// ------------------------------------------------------------- anchors fit

Calibration calib_for(const std::string& calib_arg, const fs::path& label_file) {
  if (fs::is_directory(calib_arg)) {
    const fs::path candidate = fs::path(calib_arg) / label_file.filename();
    return parse_calib(read_text_file(candidate.string()));
  }
  return parse_calib(read_text_file(calib_arg));
}

int cmd_anchors_fit(const std::string& labels_dir, const std::string& calib_arg,
                    int stride, int image_w, int image_h,
                    const std::string& out_path, std::ostream& out,
                    std::ostream& err) {
  std::vector<GtSample> gts;
  for (const fs::path& file : sorted_files(labels_dir)) {
    const Calibration calib = calib_for(calib_arg, file);
    for (const LabelRecord& rec : parse_labels(read_text_file(file.string()))) {
      if (rec.dont_care) continue;
      GtSample s{label_to_box3d(rec), calib};
      try {
        enclosing_rect(s.calib, s.box);
      } catch (const std::exception& e) {
        err << "skipping unprojectable box in " << file.filename().string()
            << ": " << e.what() << "\n";
        continue;
      }
      gts.push_back(std::move(s));
    }
  }
  const std::vector<Anchor> fitted =
      fit_priors(generate_templates(), gts, stride, image_w, image_h);
  write_text_file(out_path, anchors_to_json(fitted));
  int unmatched = 0;
  for (const Anchor& a : fitted) unmatched += a.match_count == 0 ? 1 : 0;
  out << "anchors fit: " << gts.size() << " ground truths, " << fitted.size()
      << " templates, " << unmatched << " on fallback priors -> " << out_path
      << "\n";
  return 0;
}

// ------------------------------------------------------------------ decode

int cmd_decode(const std::string& pred_path, const std::string& anchors_path,
               const std::string& calib_path, const std::string& out_path,
               int stride, double score_thresh, double nms_thresh,
               int anchor_index, const std::string& classes_csv,
               int background_class, std::ostream& out) {
  const Tensor pred = read_tensor(pred_path);
  const std::vector<Anchor> anchors =
      anchors_from_json(read_text_file(anchors_path));
  const Calibration calib = parse_calib(read_text_file(calib_path));
  const std::vector<std::string> classes = split_list(classes_csv);
  const int n_c = static_cast<int>(classes.size());
  if (n_c < 1) throw std::runtime_error("need a non-empty class list");
  const int vec_len = OutputLayout{n_c}.length();

  if (pred.dims().n != 1) {
    throw std::runtime_error("decode expects a single batch item");
  }
  std::vector<int> anchor_ids;
  if (pred.dims().c == vec_len) {
    const int idx = anchor_index < 0 ? 0 : anchor_index;
    if (idx >= static_cast<int>(anchors.size())) {
      throw std::runtime_error("anchor index out of range");
    }
    anchor_ids.push_back(idx);
  } else if (pred.dims().c ==
             static_cast<std::int64_t>(anchors.size()) * vec_len) {
    for (int a = 0; a < static_cast<int>(anchors.size()); ++a) {
      anchor_ids.push_back(a);
    }
  } else {
    throw std::runtime_error(
        "prediction channels " + std::to_string(pred.dims().c) +
        " match neither one nor all anchors (vector length " +
        std::to_string(vec_len) + ")");
  }

  std::vector<DecodedBox> decoded;
  for (std::size_t block = 0; block < anchor_ids.size(); ++block) {
    const Anchor& tmpl = anchors[static_cast<std::size_t>(anchor_ids[block])];
    for (std::int64_t i = 0; i < pred.dims().h; ++i) {
      for (std::int64_t j = 0; j < pred.dims().w; ++j) {
        OutputVector vec(n_c);
        for (int s = 0; s < vec_len; ++s) {
          vec.v[static_cast<std::size_t>(s)] = pred.at(
              0, static_cast<std::int64_t>(block) * vec_len + s, i, j);
        }
        const Anchor placed =
            tmpl.placed_at((j + 0.5) * stride, (i + 0.5) * stride);
        const DecodedBox box = decode(vec, placed, calib);
        if (box.box3d.class_id == background_class) continue;
        if (box.box3d.score < score_thresh) continue;
        decoded.push_back(box);
      }
    }
  }

  // Class-wise greedy suppression in 2D.
  std::vector<LabelRecord> records;
  for (int cls = 0; cls < n_c; ++cls) {
    if (cls == background_class) continue;
    std::vector<std::pair<Box2D, double>> boxes;
    std::vector<std::size_t> src;
    for (std::size_t i = 0; i < decoded.size(); ++i) {
      if (decoded[i].box3d.class_id == cls) {
        boxes.emplace_back(decoded[i].box2d, decoded[i].box3d.score);
        src.push_back(i);
      }
    }
    for (std::size_t kept : nms(boxes, nms_thresh)) {
      const DecodedBox& b = decoded[src[kept]];
      records.push_back(box3d_to_label(b.box3d, b.box2d,
                                       classes[static_cast<std::size_t>(cls)]));
    }
  }
  write_text_file(out_path, emit_labels(records));
  out << "decode: " << records.size() << " detections -> " << out_path << "\n";
  return 0;
}

// -------------------------------------------------------------------- loss

int cmd_loss(const std::string& pred_path, const std::string& target_path,
             const std::string& anchors_path, double gamma,
             int background_class, std::ostream& out) {
  const Tensor pred = read_tensor(pred_path);
  const Tensor target = read_tensor(target_path);
  if (!(pred.dims() == target.dims())) {
    throw std::runtime_error("prediction/target dims mismatch " +
                             pred.dims().str() + " vs " + target.dims().str());
  }
  // The anchors document is part of the interface contract; parsing it also
  // validates that decode would see the same priors the targets were built
  // from.
  const std::vector<Anchor> anchors =
      anchors_from_json(read_text_file(anchors_path));
  (void)anchors;
  const int n_c = static_cast<int>(pred.dims().c) - OutputLayout::scores;
  if (n_c < 1) {
    throw std::runtime_error("tensor channels " + std::to_string(pred.dims().c) +
                             " leave no class scores");
  }

  LossBreakdown sum;
  std::int64_t samples = 0;
  std::int64_t foreground = 0;
  for (std::int64_t bn = 0; bn < pred.dims().n; ++bn) {
    for (std::int64_t i = 0; i < pred.dims().h; ++i) {
      for (std::int64_t j = 0; j < pred.dims().w; ++j) {
        OutputVector pv(n_c), tv(n_c);
        for (int s = 0; s < pv.layout.length(); ++s) {
          pv.v[static_cast<std::size_t>(s)] = pred.at(bn, s, i, j);
          tv.v[static_cast<std::size_t>(s)] = target.at(bn, s, i, j);
        }
        int target_class = 0;
        for (int c = 1; c < n_c; ++c) {
          if (tv.score(c) > tv.score(target_class)) target_class = c;
        }
        LossComponents comps;
        if (target_class == background_class) {
          comps = background_components(pv.score(background_class));
        } else {
          comps = component_losses(pv, tv, target_class);
          ++foreground;
        }
        const LossBreakdown b =
            total_loss(comps, pv.score(target_class), gamma);
        sum.class_loss += b.class_loss;
        sum.loss_2d += b.loss_2d;
        sum.loss_3d += b.loss_3d;
        sum.loss_corner += b.loss_corner;
        sum.total += b.total;
        ++samples;
      }
    }
  }
  out << "loss over " << samples << " samples (" << foreground
      << " foreground), gamma=" << fmt_fixed(gamma, 2) << ":\n"
      << "  class:  " << fmt_fixed(sum.class_loss) << "\n"
      << "  2d:     " << fmt_fixed(sum.loss_2d) << "\n"
      << "  3d:     " << fmt_fixed(sum.loss_3d) << "\n"
      << "  corner: " << fmt_fixed(sum.loss_corner) << "\n"
      << "  total (focal-weighted): " << fmt_fixed(sum.total) << "\n";
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalReportRow {
  std::string cls;
  std::string difficulty;
  double ap_r11 = 0.0;
  double ap_r40 = 0.0;
  std::int64_t num_gt = 0;
};

int cmd_eval(const std::string& gt_dir, const std::string& pred_dir,
             double iou_thresh, const std::string& classes_csv,
             const std::string& match, bool as_json, std::ostream& out) {
  const Matching matching =
      match == "3d" ? Matching::iou_3d : Matching::iou_2d;

  struct ImageLabels {
    std::vector<LabelRecord> gts;
    std::vector<LabelRecord> dets;
  };
  std::vector<ImageLabels> images;
  std::vector<std::string> auto_classes;
  for (const fs::path& file : sorted_files(gt_dir)) {
    ImageLabels img;
    img.gts = parse_labels(read_text_file(file.string()));
    const fs::path pred_file = fs::path(pred_dir) / file.filename();
    if (fs::exists(pred_file)) {
      img.dets = parse_labels(read_text_file(pred_file.string()));
    }
    for (const LabelRecord& r : img.gts) {
      if (!r.dont_care &&
          std::find(auto_classes.begin(), auto_classes.end(), r.type) ==
              auto_classes.end()) {
        auto_classes.push_back(r.type);
      }
    }
    images.push_back(std::move(img));
  }
  std::sort(auto_classes.begin(), auto_classes.end());
  const std::vector<std::string> classes =
      classes_csv.empty() ? auto_classes : split_list(classes_csv);

  const std::pair<Difficulty, const char*> levels[] = {
      {Difficulty::easy, "easy"},
      {Difficulty::moderate, "moderate"},
      {Difficulty::hard, "hard"},
  };

  std::vector<EvalReportRow> rows;
  for (const std::string& cls : classes) {
    for (const auto& [level, level_name] : levels) {
      std::vector<EvalImage> eval_images;
      std::int64_t num_gt = 0;
      for (const ImageLabels& img : images) {
        EvalImage e;
        for (const LabelRecord& r : img.gts) {
          if (r.dont_care) {
            e.dontcare.push_back(r.bbox());
          } else if (r.type == cls) {
            EvalGt gt;
            gt.box2d = r.bbox();
            gt.box3d = label_to_box3d(r);
            gt.ignored = !passes_difficulty(r, level);
            num_gt += gt.ignored ? 0 : 1;
            e.gts.push_back(gt);
          }
        }
        for (const LabelRecord& r : img.dets) {
          if (r.dont_care || r.type != cls) continue;
          EvalDet det;
          det.box2d = r.bbox();
          det.box3d = label_to_box3d(r);
          det.score = r.score.value_or(1.0);
          e.dets.push_back(det);
        }
        eval_images.push_back(std::move(e));
      }
      const PRCurve curve = pr_curve(eval_images, matching, iou_thresh);
      rows.push_back({cls, level_name, ap(curve, ApVariant::r11),
                      ap(curve, ApVariant::r40), num_gt});
    }
  }

  if (as_json) {
    nlohmann::json doc;
    doc["iou_thresh"] = iou_thresh;
    doc["matching"] = match;
    for (const EvalReportRow& r : rows) {
      doc["classes"][r.cls][r.difficulty] = {
          {"ap_r11", r.ap_r11}, {"ap_r40", r.ap_r40}, {"num_gt", r.num_gt}};
    }
    out << doc.dump(2) << "\n";
  } else {
    out << "eval: iou_thresh=" << fmt_fixed(iou_thresh, 2) << " match=" << match
        << "\n";
    out << "class        difficulty  AP|R11    AP|R40    #gt\n";
    for (const EvalReportRow& r : rows) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%-12s %-10s %8.6f  %8.6f  %lld\n",
                    r.cls.c_str(), r.difficulty.c_str(), r.ap_r11, r.ap_r40,
                    static_cast<long long>(r.num_gt));
      out << buf;
    }
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"depth-guided dilated local filtering and 2D-3D detection-head toolkit"};
  app.require_subcommand(1);

  RunConfig cfg = defaults();
  std::uint64_t seed = 0;
  std::function<int()> action;

  // ---- check
  CLI::App* check = app.add_subcommand("check", "run a verification suite");
  check->require_subcommand(1);

  {
    CLI::App* eq1 = check->add_subcommand(
        "eq1", "shift-based local filter vs per-pixel reference");
    auto opts = std::make_shared<RunConfig>(cfg);
    auto k = std::make_shared<int>(0);
    auto cases = std::make_shared<int>(50);
    eq1->add_option("--seed", seed, "generator seed")->required();
    eq1->add_option("--k", *k, "fixed kernel size (default: sweep 1/3/5)");
    eq1->add_option("--cases", *cases, "number of cases");
    eq1->add_option("--tol", opts->tol_eq1, "max allowed |delta|");
    eq1->callback([&, opts, k, cases] {
      action = [&, opts, k, cases] {
        const double worst = check_eq1(seed, *cases, *k, out);
        const bool ok = worst <= opts->tol_eq1;
        out << (ok ? "PASS" : "FAIL") << " eq1 (tol " << fmt_sci(opts->tol_eq1)
            << ")\n";
        return ok ? 0 : 1;
      };
    });
  }
  {
    CLI::App* eq2 = check->add_subcommand(
        "eq2", "adaptive dilated operator vs triple-loop reference");
    auto opts = std::make_shared<RunConfig>(cfg);
    auto cases = std::make_shared<int>(20);
    eq2->add_option("--seed", seed, "generator seed")->required();
    eq2->add_option("--cases", *cases, "number of cases");
    eq2->add_option("--k", opts->k, "kernel size");
    eq2->add_option("--d", opts->d, "maximum dilation rate");
    eq2->add_option("--tol", opts->tol_eq2, "max allowed |delta|");
    eq2->callback([&, opts, cases] {
      action = [&, opts, cases] {
        const double worst = check_eq2(seed, *cases, *opts, out);
        const bool ok = worst <= opts->tol_eq2;
        out << (ok ? "PASS" : "FAIL") << " eq2 (tol " << fmt_sci(opts->tol_eq2)
            << ")\n";
        return ok ? 0 : 1;
      };
    });
  }
  {
    CLI::App* grad = check->add_subcommand(
        "grad", "analytic backward vs central finite differences");
    auto opts = std::make_shared<RunConfig>(cfg);
    auto cases = std::make_shared<int>(10);
    grad->add_option("--seed", seed, "generator seed")->required();
    grad->add_option("--cases", *cases, "number of cases");
    grad->add_option("--step", opts->fd_step, "finite-difference step");
    grad->add_option("--tol", opts->tol_grad, "max allowed relative error");
    grad->callback([&, opts, cases] {
      action = [&, opts, cases] {
        const double worst = check_grad(seed, *cases, opts->fd_step, out);
        const bool ok = worst <= opts->tol_grad;
        out << (ok ? "PASS" : "FAIL") << " grad (tol "
            << fmt_sci(opts->tol_grad) << ")\n";
        return ok ? 0 : 1;
      };
    });
  }

  // ---- bench
  CLI::App* bench = app.add_subcommand("bench", "timing comparisons");
  bench->require_subcommand(1);
  {
    CLI::App* dgf = bench->add_subcommand(
        "dgf", "per-pixel reference vs shift-based operator");
    auto opts = std::make_shared<RunConfig>(cfg);
    auto n = std::make_shared<int>(1);
    auto c = std::make_shared<int>(64);
    auto hw = std::make_shared<int>(64);
    auto iters = std::make_shared<int>(20);
    auto warmup = std::make_shared<int>(3);
    dgf->add_option("--seed", seed, "generator seed")->required();
    dgf->add_option("--n", *n, "batch");
    dgf->add_option("--c", *c, "channels");
    dgf->add_option("--hw", *hw, "spatial extent");
    dgf->add_option("--k", opts->k, "kernel size");
    dgf->add_option("--d", opts->d, "maximum dilation rate");
    dgf->add_option("--nf", opts->n_f, "shift-pooling channels");
    dgf->add_option("--iters", *iters, "timed iterations (>= 1)");
    dgf->add_option("--warmup", *warmup, "warm-up iterations");
    dgf->callback([&, opts, n, c, hw, iters, warmup] {
      action = [&, opts, n, c, hw, iters, warmup] {
        const BenchResult r = bench_dgf(*n, *c, *hw, opts->k, opts->d,
                                         opts->n_f, *iters, *warmup, seed);
        const double elems = static_cast<double>(*n) * *c * *hw * *hw;
        out << "bench dgf: n=" << *n << " c=" << *c << " hw=" << *hw
            << " k=" << opts->k << " d=" << opts->d << " nf=" << opts->n_f
            << " iters=" << *iters << "\n";
        out << "  naive: " << fmt_fixed(r.naive_ms, 3) << " ms  ("
            << fmt_fixed(elems / r.naive_ms / 1e3, 2) << " Melem/s)\n";
        out << "  fast:  " << fmt_fixed(r.fast_ms, 3) << " ms  ("
            << fmt_fixed(elems / r.fast_ms / 1e3, 2) << " Melem/s)\n";
        out << "  speedup: " << fmt_fixed(r.speedup, 2) << "x\n";
        return 0;  // timing is informative, never a gate
      };
    });
  }

  // ---- dgf forward/backward over tensor files
  CLI::App* dgf = app.add_subcommand("dgf", "run the operator on tensor files");
  dgf->require_subcommand(1);
  {
    CLI::App* fwd = dgf->add_subcommand("forward", "depth-guided filtering");
    auto opts = std::make_shared<RunConfig>(cfg);
    auto paths = std::make_shared<std::array<std::string, 4>>();
    fwd->add_option("--input", (*paths)[0], "feature tensor (DTEN)")->required();
    fwd->add_option("--depth", (*paths)[1], "depth-feature tensor (DTEN)")->required();
    fwd->add_option("--out", (*paths)[2], "output tensor path")->required();
    fwd->add_option("--weights-out", (*paths)[3],
                    "optional dilation-weights tensor path");
    fwd->add_option("--seed", seed, "parameter-init seed")->required();
    fwd->add_option("--k", opts->k, "kernel size");
    fwd->add_option("--d", opts->d, "maximum dilation rate");
    fwd->add_option("--nf", opts->n_f, "shift-pooling channels");
    fwd->callback([&, opts, paths] {
      action = [&, opts, paths] {
        return cmd_dgf_forward((*paths)[0], (*paths)[1], seed, *opts,
                               (*paths)[2], (*paths)[3], out);
      };
    });
  }
  {
    CLI::App* bwd = dgf->add_subcommand("backward", "analytic gradients");
    auto opts = std::make_shared<RunConfig>(cfg);
    auto paths = std::make_shared<std::array<std::string, 7>>();
    bwd->add_option("--input", (*paths)[0], "feature tensor (DTEN)")->required();
    bwd->add_option("--depth", (*paths)[1], "depth-feature tensor (DTEN)")->required();
    bwd->add_option("--upstream", (*paths)[2], "upstream gradient (DTEN)")->required();
    bwd->add_option("--grad-input", (*paths)[3], "output path");
    bwd->add_option("--grad-depth", (*paths)[4], "output path");
    bwd->add_option("--grad-weights", (*paths)[5], "output path");
    bwd->add_option("--grad-bias", (*paths)[6], "output path");
    bwd->add_option("--seed", seed, "parameter-init seed")->required();
    bwd->add_option("--k", opts->k, "kernel size");
    bwd->add_option("--d", opts->d, "maximum dilation rate");
    bwd->add_option("--nf", opts->n_f, "shift-pooling channels");
    bwd->callback([&, opts, paths] {
      action = [&, opts, paths] {
        return cmd_dgf_backward((*paths)[0], (*paths)[1], (*paths)[2], seed,
                                *opts, (*paths)[3], (*paths)[4], (*paths)[5],
                                (*paths)[6], out);
      };
    });
  }

  // ---- inspect dilation
  CLI::App* inspect = app.add_subcommand("inspect", "introspection reports");
  inspect->require_subcommand(1);
  {
    CLI::App* dil = inspect->add_subcommand(
        "dilation", "per-rate ratios of dilation weights");
    auto opts = std::make_shared<RunConfig>(cfg);
    auto paths = std::make_shared<std::array<std::string, 3>>();
    dil->add_option("--weights", (*paths)[0],
                    "dilation-weights tensor (n, c, d, 1)");
    dil->add_option("--input", (*paths)[1],
                    "feature tensor; weights are computed from it");
    dil->add_option("--weights-out", (*paths)[2], "save computed weights");
    CLI::Option* seed_opt =
        dil->add_option("--seed", seed, "parameter-init seed (with --input)");
    dil->add_option("--k", opts->k, "kernel size");
    dil->add_option("--d", opts->d, "maximum dilation rate");
    dil->add_option("--nf", opts->n_f, "shift-pooling channels");
    dil->callback([&, opts, paths, seed_opt] {
      action = [&, opts, paths, seed_opt] {
        if ((*paths)[0].empty() == (*paths)[1].empty()) {
          throw std::runtime_error(
              "inspect dilation needs exactly one of --weights or --input");
        }
        if (!(*paths)[1].empty() && seed_opt->count() == 0) {
          throw std::runtime_error("--input requires an explicit --seed");
        }
        return cmd_inspect_dilation((*paths)[0], (*paths)[1], seed, *opts,
                                    (*paths)[2], out);
      };
    });
  }

  // ---- anchors fit
  CLI::App* anchors_cmd = app.add_subcommand("anchors", "anchor workflows");
  anchors_cmd->require_subcommand(1);
  {
    CLI::App* fit = anchors_cmd->add_subcommand(
        "fit", "fit 3D anchor priors from ground-truth labels");
    auto paths = std::make_shared<std::array<std::string, 3>>();
    auto stride = std::make_shared<int>(16);
    auto image_w = std::make_shared<int>(1760);
    auto image_h = std::make_shared<int>(512);
    fit->add_option("--labels", (*paths)[0], "label directory")->required();
    fit->add_option("--calib", (*paths)[1], "calibration file or directory")
        ->required();
    fit->add_option("--out", (*paths)[2], "anchors JSON path")->required();
    fit->add_option("--stride", *stride, "anchor grid stride");
    fit->add_option("--image-width", *image_w, "image width (px)");
    fit->add_option("--image-height", *image_h, "image height (px)");
    fit->callback([&, paths, stride, image_w, image_h] {
      action = [&, paths, stride, image_w, image_h] {
        return cmd_anchors_fit((*paths)[0], (*paths)[1], *stride, *image_w,
                               *image_h, (*paths)[2], out, err);
      };
    });
  }

  // ---- decode
  {
    CLI::App* dec = app.add_subcommand(
        "decode", "decode output tensors into label lines");
    auto paths = std::make_shared<std::array<std::string, 4>>();
    auto stride = std::make_shared<int>(16);
    auto score_thresh = std::make_shared<double>(0.5);
    auto nms_thresh = std::make_shared<double>(0.4);
    auto anchor_index = std::make_shared<int>(-1);
    auto classes = std::make_shared<std::string>(
        "Background,Car,Pedestrian,Cyclist");
    auto background = std::make_shared<int>(0);
    dec->add_option("--pred", (*paths)[0], "prediction tensor (DTEN)")->required();
    dec->add_option("--anchors", (*paths)[1], "anchors JSON")->required();
    dec->add_option("--calib", (*paths)[2], "calibration file")->required();
    dec->add_option("--out", (*paths)[3], "output label file")->required();
    dec->add_option("--stride", *stride, "anchor grid stride");
    dec->add_option("--score-thresh", *score_thresh, "minimum class score");
    dec->add_option("--nms-thresh", *nms_thresh, "suppression IoU threshold");
    dec->add_option("--anchor-index", *anchor_index,
                    "anchor for single-anchor tensors");
    dec->add_option("--classes", *classes, "comma-separated class names");
    dec->add_option("--background-class", *background, "background class index");
    dec->callback([&, paths, stride, score_thresh, nms_thresh, anchor_index,
                   classes, background] {
      action = [&, paths, stride, score_thresh, nms_thresh, anchor_index,
                classes, background] {
        return cmd_decode((*paths)[0], (*paths)[1], (*paths)[2], (*paths)[3],
                          *stride, *score_thresh, *nms_thresh, *anchor_index,
                          *classes, *background, out);
      };
    });
  }

  // ---- loss
  {
    CLI::App* loss = app.add_subcommand(
        "loss", "loss breakdown from prediction/target tensors");
    auto paths = std::make_shared<std::array<std::string, 3>>();
    auto gamma = std::make_shared<double>(0.5);
    auto background = std::make_shared<int>(0);
    loss->add_option("--pred", (*paths)[0], "prediction tensor (DTEN)")->required();
    loss->add_option("--target", (*paths)[1], "target tensor (DTEN)")->required();
    loss->add_option("--anchors", (*paths)[2], "anchors JSON")->required();
    loss->add_option("--gamma", *gamma, "focusing parameter");
    loss->add_option("--background-class", *background, "background class index");
    loss->callback([&, paths, gamma, background] {
      action = [&, paths, gamma, background] {
        return cmd_loss((*paths)[0], (*paths)[1], (*paths)[2], *gamma,
                        *background, out);
      };
    });
  }

  // ---- eval
  {
    CLI::App* ev = app.add_subcommand(
        "eval", "average precision over label directories");
    auto paths = std::make_shared<std::array<std::string, 2>>();
    auto iou_thresh = std::make_shared<double>(0.7);
    auto classes = std::make_shared<std::string>();
    auto match = std::make_shared<std::string>("2d");
    auto as_json = std::make_shared<bool>(false);
    ev->add_option("--gt", (*paths)[0], "ground-truth label directory")->required();
    ev->add_option("--pred", (*paths)[1], "prediction label directory")->required();
    ev->add_option("--iou-thresh", *iou_thresh, "matching IoU threshold");
    ev->add_option("--classes", *classes,
                   "comma-separated class names (default: all in GT)");
    ev->add_option("--match", *match, "matching space: 2d or 3d")
        ->check(CLI::IsMember({"2d", "3d"}));
    ev->add_flag("--json", *as_json, "emit a JSON report");
    ev->callback([&, paths, iou_thresh, classes, match, as_json] {
      action = [&, paths, iou_thresh, classes, match, as_json] {
        return cmd_eval((*paths)[0], (*paths)[1], *iou_thresh, *classes,
                        *match, *as_json, out);
      };
    });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    return action ? action() : 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace d4lcn::cli
