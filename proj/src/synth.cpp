#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "radtriage/dataset.hpp"
#include "radtriage/errors.hpp"
#include "radtriage/image_io.hpp"
#include "radtriage/rng.hpp"

namespace fs = std::filesystem;

namespace radtriage {
namespace {

// Bone geometry shared by all views of one study, in units of the image size.
struct StudyGeometry {
  double cx, cy;          // bone centre
  double half_length;     // semi-major axis
  double half_width;      // semi-minor axis
  double angle;           // radians
  double intensity;
  double lesion_along;    // lesion centre along the bone axis, fraction of half_length
  double lesion_across;   // across the axis, fraction of half_width
  double lesion_radius;
};

StudyGeometry draw_geometry(RngStream& rng) {
  StudyGeometry g{};
  g.cx = 0.5 + rng.uniform(-0.08, 0.08);
  g.cy = 0.5 + rng.uniform(-0.08, 0.08);
  g.half_length = rng.uniform(0.30, 0.40);
  g.half_width = rng.uniform(0.08, 0.12);
  g.angle = 0.5 * std::numbers::pi + rng.uniform(-0.35, 0.35);
  g.intensity = rng.uniform(0.40, 0.55);
  g.lesion_along = rng.uniform(-0.6, 0.6);
  g.lesion_across = rng.uniform(-0.3, 0.3);
  g.lesion_radius = rng.uniform(0.06, 0.10);
  return g;
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

std::vector<float> render_view(std::size_t size, const StudyGeometry& g, bool abnormal, RngStream& rng) {
  const double s = static_cast<double>(size);
  // per-view projection change
  const double angle = g.angle + rng.uniform(-0.15, 0.15);
  const double cx = (g.cx + rng.uniform(-0.03, 0.03)) * s;
  const double cy = (g.cy + rng.uniform(-0.03, 0.03)) * s;
  const double base = rng.uniform(0.05, 0.15);
  const double gx = rng.uniform(-0.08, 0.08);
  const double gy = rng.uniform(-0.08, 0.08);
  const double a = g.half_length * s, b = g.half_width * s;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double lx = cx + ca * g.lesion_along * a - sa * g.lesion_across * b;
  const double ly = cy + sa * g.lesion_along * a + ca * g.lesion_across * b;
  const double radius = g.lesion_radius * s;

  std::vector<float> px(size * size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x) + 0.5, fy = static_cast<double>(y) + 0.5;
      double v = base + gx * (fx / s - 0.5) + gy * (fy / s - 0.5);
      const double u = ((fx - cx) * ca + (fy - cy) * sa) / a;
      const double w = (-(fx - cx) * sa + (fy - cy) * ca) / b;
      const double r = std::sqrt(u * u + w * w);
      v += g.intensity * (1.0 - smoothstep(0.85, 1.0, r));
      if (abnormal) {
        const double d = std::hypot(fx - lx, fy - ly);
        v += 0.35 * std::clamp(radius - d + 0.5, 0.0, 1.0);
      }
      v += 0.015 * rng.normal();
      px[y * size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return px;
}

std::string numbered(const char* prefix, std::size_t value, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, value);
  return buf;
}

}  // namespace

SynthResult synth_generate(const SynthConfig& cfg, const fs::path& out_dir) {
  if (cfg.patients == 0 || cfg.studies_per_patient == 0 || cfg.views_per_study == 0 || cfg.image_size == 0) {
    throw ConfigError("synth: counts and image size must be positive");
  }
  if (!(cfg.abnormal_fraction >= 0.0 && cfg.abnormal_fraction <= 1.0)) {
    throw ConfigError("synth: abnormal_fraction must lie in [0, 1]");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const std::size_t total = cfg.patients * cfg.studies_per_patient;
  const auto n_abnormal = static_cast<std::size_t>(std::llround(cfg.abnormal_fraction * static_cast<double>(total)));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream label_rng = RngStream::substream(cfg.seed, 0x1abe1);
  for (std::size_t i = total - 1; i > 0; --i) std::swap(order[i], order[label_rng.below(i + 1)]);
  std::vector<int> labels(total, 0);
  for (std::size_t i = 0; i < n_abnormal; ++i) labels[order[i]] = 1;

  SynthResult result;
  for (std::size_t p = 0; p < cfg.patients; ++p) {
    const Anatomy anatomy = cfg.cycle_anatomies ? kAnatomies[p % kAnatomies.size()] : Anatomy::wrist;
    std::string anatomy_dir = "XR_" + std::string(anatomy_name(anatomy));
    std::transform(anatomy_dir.begin(), anatomy_dir.end(), anatomy_dir.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    const std::string patient = numbered("patient", p + 1, 5);
    for (std::size_t k = 0; k < cfg.studies_per_patient; ++k) {
      const int label = labels[p * cfg.studies_per_patient + k];
      StudyRecord rec;
      rec.patient_id = patient;
      rec.anatomy = anatomy;
      rec.study_id = "study" + std::to_string(k + 1);
      rec.label = label;
      const fs::path study_dir =
          out_dir / anatomy_dir / patient / (rec.study_id + (label ? "_positive" : "_negative"));
      fs::create_directories(study_dir, ec);
      if (ec) throw IoError("cannot create " + study_dir.string() + ": " + ec.message());

      RngStream geo_rng = RngStream::substream(cfg.seed, p + 1, k + 1);
      const StudyGeometry geometry = draw_geometry(geo_rng);
      for (std::size_t v = 0; v < cfg.views_per_study; ++v) {
        RngStream view_rng = RngStream::substream(geo_rng.seed(), 0x7e1e + v);
        const auto pixels = render_view(cfg.image_size, geometry, label == 1, view_rng);
        const fs::path file = study_dir / ("image" + std::to_string(v + 1) + ".png");
        write_png_gray8(file, cfg.image_size, cfg.image_size, pixels);
        rec.view_paths.push_back(file);
        ++result.images;
      }
      result.records.push_back(std::move(rec));
    }
  }
  result.manifest = out_dir / "manifest.csv";
  write_manifest(result.manifest, result.records);
  return result;
}

}  // namespace radtriage
