#include "splatmap/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "splatmap/losses.hpp"

#include <nlohmann/json.hpp>

namespace splatmap {

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double depth_l1_cm(const Image& rendered, const Image& gt, const Mask& valid) {
  require_same_shape(rendered, gt, "depth_l1");
  if (valid.size() != rendered.pixel_count())
    throw std::invalid_argument("depth_l1: mask size mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (!valid[i]) continue;
    sum += std::abs(rendered.data[i] - gt.data[i]);
    ++n;
  }
  return n == 0 ? 0.0 : 100.0 * sum / static_cast<double>(n);
}

MiouResult miou(const Image& rendered_semantic,
                const std::vector<std::int32_t>& gt_labels,
                const Palette& palette) {
  if (palette.entries.empty())
    throw std::invalid_argument("miou: empty palette");
  if (gt_labels.size() != rendered_semantic.pixel_count())
    throw std::invalid_argument("miou: label image size mismatch");

  // intersection / union counts keyed by label id
  std::map<int, std::int64_t> inter, uni, gt_count;
  for (std::size_t pix = 0; pix < gt_labels.size(); ++pix) {
    const double* p = rendered_semantic.data.data() + pix * 3;
    const int pred_idx = palette.snap(Vec3(p[0], p[1], p[2]));
    const int pred = palette.entries[pred_idx].id;
    const int gt = gt_labels[pix];
    ++gt_count[gt];
    if (pred == gt) {
      ++inter[gt];
      ++uni[gt];
    } else {
      ++uni[gt];
      ++uni[pred];
    }
  }

  MiouResult res;
  double sum = 0.0;
  for (const auto& [label, n_gt] : gt_count) {
    const double u = static_cast<double>(uni[label]);
    const double iou = u > 0 ? static_cast<double>(inter[label]) / u : 0.0;
    res.per_class.push_back({label, iou, n_gt});
    sum += iou;
  }
  res.miou = gt_count.empty() ? 0.0 : sum / static_cast<double>(gt_count.size());
  return res;
}

MetricsReport evaluate(const GaussianMap& map,
                       const std::vector<FrameSet>& frames,
                       const Camera& intrinsics, const Palette& palette,
                       const RenderConfig& config) {
  MetricsReport report;
  double s_psnr = 0, s_ssim = 0, s_depth = 0, s_miou = 0;
  for (const FrameSet& frame : frames) {
    Camera cam = intrinsics;
    cam.pose_w2c = frame.pose_w2c;
    const RenderOutput out = render(map, cam, config);

    FrameMetrics m;
    m.frame_id = frame.frame_id;
    m.psnr = psnr(out.rgb, frame.rgb);
    m.ssim = ssim(out.rgb, frame.rgb).value;
    m.depth_l1_cm = depth_l1_cm(out.depth, frame.depth, frame.depth_valid);
    m.miou = miou(out.semantic, frame.labels, palette).miou;
    report.per_frame.push_back(m);
    s_psnr += m.psnr;
    s_ssim += m.ssim;
    s_depth += m.depth_l1_cm;
    s_miou += m.miou;
  }
  const double n = static_cast<double>(report.per_frame.size());
  if (n > 0) {
    report.mean.psnr = s_psnr / n;
    report.mean.ssim = s_ssim / n;
    report.mean.depth_l1_cm = s_depth / n;
    report.mean.miou = s_miou / n;
  }
  return report;
}

namespace {
nlohmann::json metric_value(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

nlohmann::json frame_json(const FrameMetrics& m, bool with_id) {
  nlohmann::json j{{"psnr", metric_value(m.psnr)},
                   {"ssim", metric_value(m.ssim)},
                   {"depth_l1_cm", metric_value(m.depth_l1_cm)},
                   {"miou", metric_value(m.miou)}};
  if (with_id) j["frame_id"] = m.frame_id;
  return j;
}
}  // namespace

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["per_frame"] = nlohmann::json::array();
  for (const auto& m : per_frame) j["per_frame"].push_back(frame_json(m, true));
  j["mean"] = frame_json(mean, false);
  return j;
}

}  // namespace splatmap
