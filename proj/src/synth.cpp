#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "patchscope/dataset.hpp"
#include "patchscope/imaging.hpp"
#include "patchscope/random.hpp"
#include "patchscope/tiling.hpp"

namespace patchscope {

using json = nlohmann::json;

namespace {

constexpr int kHarmonics = 3;  // boundary orders 2..4
constexpr double kBlobFraction = 0.44;
constexpr std::array<double, 3> kNucleusColor{110.0, 70.0, 160.0};
constexpr std::array<double, 3> kMarkColor{200.0, 30.0, 90.0};
// A local cluster must meet fewer than this share of the tissue windows of a
// 224 px half-stride tiling, so that the pattern stays sparse.
constexpr int kSparsePatch = 224;
constexpr double kSparseShare = 0.15;

// Fixed table of standard normal draws; one 64-bit random word indexes three entries.
const std::array<float, 4096>& normal_table() {
  static const auto table = [] {
    std::array<float, 4096> t{};
    RandomStream rng(0x5eed7ab1e);
    for (auto& v : t) v = static_cast<float>(rng.normal());
    return t;
  }();
  return table;
}

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

bool in_half(int side, double x, double y, double cx, double cy) {
  switch (side) {
    case 0: return x < cx;
    case 1: return x >= cx;
    case 2: return y < cy;
    default: return y >= cy;
  }
}

// Tissue geometry for one image, shared by rendering and region tests.
struct Blob {
  double cx, cy, r0;
  std::array<double, kHarmonics> cos_phase{}, sin_phase{}, amp{};

  // Boundary radius along unit direction (ux, uy) using Chebyshev recurrences.
  double radius(double ux, double uy) const {
    double ck = ux, sk = uy;  // cos(theta), sin(theta)
    double r = 1.0;
    for (int k = 0; k < kHarmonics; ++k) {
      const double c2 = ck * ux - sk * uy;
      const double s2 = sk * ux + ck * uy;
      ck = c2;
      sk = s2;
      r += amp[k] * (ck * cos_phase[k] - sk * sin_phase[k]);
    }
    return r0 * r;
  }

  // Signed depth inside the blob along the ray from the centre (negative outside).
  double depth(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double d = std::hypot(dx, dy);
    if (d < 1e-9) return r0;
    return radius(dx / d, dy / d) - d;
  }
};

Blob blob_from_truth(const GroundTruth& gt) {
  Blob b{gt.blob_cx, gt.blob_cy, gt.blob_radius};
  for (int k = 0; k < kHarmonics; ++k) {
    b.amp[k] = gt.harmonics[2 * k];
    b.cos_phase[k] = std::cos(gt.harmonics[2 * k + 1]);
    b.sin_phase[k] = std::sin(gt.harmonics[2 * k + 1]);
  }
  return b;
}

void paint_ellipse(RasterImage& img, const Mark& m, const std::array<double, 3>& color,
                   double sigma, RandomStream& rng) {
  const double reach = std::max(m.rx, m.ry);
  const int x0 = std::max(0, static_cast<int>(std::floor(m.x - reach)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(m.x + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(m.y - reach)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(m.y + reach)));
  const double c = std::cos(m.angle), s = std::sin(m.angle);
  const auto& table = normal_table();
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - m.x, dy = y + 0.5 - m.y;
      const double u = (c * dx + s * dy) / m.rx;
      const double v = (-s * dx + c * dy) / m.ry;
      if (u * u + v * v > 1.0) continue;
      const auto bits = rng.next();
      img.set_pixel(x, y, clamp_u8(color[0] + sigma * table[bits & 0xfff]),
                    clamp_u8(color[1] + sigma * table[(bits >> 12) & 0xfff]),
                    clamp_u8(color[2] + sigma * table[(bits >> 24) & 0xfff]));
    }
}

}  // namespace

std::string to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::LocalCluster: return "local";
    case PatternKind::EdgeDistributed: return "edge";
    case PatternKind::HalfTissue: return "half";
    case PatternKind::GlobalDiffuse: return "global";
  }
  return "global";
}

PatternKind pattern_from_string(const std::string& text) {
  if (text == "local" || text == "A" || text == "LocalCluster") return PatternKind::LocalCluster;
  if (text == "edge" || text == "B" || text == "EdgeDistributed") return PatternKind::EdgeDistributed;
  if (text == "half" || text == "C" || text == "HalfTissue") return PatternKind::HalfTissue;
  if (text == "global" || text == "D" || text == "GlobalDiffuse") return PatternKind::GlobalDiffuse;
  throw std::invalid_argument("unknown pattern '" + text + "' (expected local, edge, half or global)");
}

void SynthPattern::validate() const {
  if (!(feature_density > 0.0 && feature_density <= 1.0))
    throw std::invalid_argument("feature density must lie in (0, 1]");
  if (feature_size < 1) throw std::invalid_argument("feature size must be >= 1");
  if (mark_size < 2) throw std::invalid_argument("mark size must be >= 2");
  if (!(count_jitter >= 0.0 && count_jitter < 1.0))
    throw std::invalid_argument("count jitter must lie in [0, 1)");
  if (!(noise_sigma >= 0.0) || !(nuclei_per_10k >= 0.0))
    throw std::invalid_argument("texture parameters must be non-negative");
}

SynthPattern SynthPattern::defaults(PatternKind kind) {
  SynthPattern p;
  p.kind = kind;
  switch (kind) {
    case PatternKind::LocalCluster:
      p.feature_density = 0.35;
      p.feature_size = 64;
      break;
    case PatternKind::EdgeDistributed:
      p.feature_density = 0.06;
      p.feature_size = 48;
      break;
    case PatternKind::HalfTissue:
      p.feature_density = 0.03;
      break;
    case PatternKind::GlobalDiffuse:
      p.feature_density = 0.02;
      break;
  }
  return p;
}

Rect GroundTruth::cluster_rect() const {
  const double r = cluster_diameter / 2.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(cluster_cx - r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cluster_cy - r)));
  const int x1 = std::min(width, static_cast<int>(std::ceil(cluster_cx + r)));
  const int y1 = std::min(height, static_cast<int>(std::ceil(cluster_cy + r)));
  return {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
}

double GroundTruth::blob_radius_at(double theta) const {
  return blob_from_truth(*this).radius(std::cos(theta), std::sin(theta));
}

json to_json(const GroundTruth& gt) {
  json marks = json::array();
  for (const auto& m : gt.marks) marks.push_back({m.x, m.y, m.rx, m.ry, m.angle});
  json j = {{"image_id", gt.image_id},
            {"pattern", to_string(gt.kind)},
            {"label", std::string(to_string(gt.label))},
            {"width", gt.width},
            {"height", gt.height},
            {"blob", {{"cx", gt.blob_cx}, {"cy", gt.blob_cy}, {"radius", gt.blob_radius},
                      {"harmonics", gt.harmonics}}},
            {"nominal_marks", gt.nominal_marks},
            {"mark_band", {gt.min_marks, gt.max_marks}},
            {"mark_count", gt.marks.size()},
            {"marks", marks}};
  if (gt.kind == PatternKind::LocalCluster)
    j["cluster"] = {{"cx", gt.cluster_cx}, {"cy", gt.cluster_cy}, {"diameter", gt.cluster_diameter}};
  if (gt.kind == PatternKind::HalfTissue) j["half_side"] = gt.half_side;
  return j;
}

GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth gt;
  gt.image_id = j.at("image_id").get<std::string>();
  gt.kind = pattern_from_string(j.at("pattern").get<std::string>());
  gt.label = label_from_string(j.at("label").get<std::string>());
  gt.width = j.at("width").get<int>();
  gt.height = j.at("height").get<int>();
  const auto& b = j.at("blob");
  gt.blob_cx = b.at("cx").get<double>();
  gt.blob_cy = b.at("cy").get<double>();
  gt.blob_radius = b.at("radius").get<double>();
  gt.harmonics = b.at("harmonics").get<std::vector<double>>();
  gt.nominal_marks = j.at("nominal_marks").get<int>();
  gt.min_marks = j.at("mark_band").at(0).get<int>();
  gt.max_marks = j.at("mark_band").at(1).get<int>();
  for (const auto& m : j.at("marks"))
    gt.marks.push_back({m.at(0).get<double>(), m.at(1).get<double>(), m.at(2).get<double>(),
                        m.at(3).get<double>(), m.at(4).get<double>()});
  if (j.contains("cluster")) {
    gt.cluster_cx = j["cluster"].at("cx").get<double>();
    gt.cluster_cy = j["cluster"].at("cy").get<double>();
    gt.cluster_diameter = j["cluster"].at("diameter").get<double>();
  }
  gt.half_side = j.value("half_side", 0);
  return gt;
}

Label synth_label(LabelRule rule, int index) {
  switch (rule) {
    case LabelRule::AllPositive: return Label::ActiveEoE;
    case LabelRule::AllNegative: return Label::NonEoE;
    case LabelRule::Alternating: break;
  }
  return index % 2 == 0 ? Label::ActiveEoE : Label::NonEoE;
}

std::string synth_image_id(PatternKind kind, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d", to_string(kind).c_str(), index);
  return buf;
}

void check_synth_geometry(const SynthPattern& pattern, int width, int height) {
  pattern.validate();
  if (width < 16 || height < 16) throw std::invalid_argument("synthetic images need at least 16x16 pixels");
  const int side = std::min(width, height);
  const double inner = kBlobFraction * side * 0.7;  // blob radius lower bound with margin
  if (pattern.mark_size > side / 4)
    throw std::invalid_argument("mark size " + std::to_string(pattern.mark_size) +
                                " does not fit a " + std::to_string(width) + "x" +
                                std::to_string(height) + " image");
  switch (pattern.kind) {
    case PatternKind::LocalCluster:
      if (pattern.feature_size > inner || pattern.feature_size < pattern.mark_size)
        throw std::invalid_argument("cluster diameter " + std::to_string(pattern.feature_size) +
                                    " does not fit the tissue of a " + std::to_string(width) + "x" +
                                    std::to_string(height) + " image");
      break;
    case PatternKind::EdgeDistributed:
      if (pattern.feature_size > inner / 2 || pattern.feature_size < pattern.mark_size)
        throw std::invalid_argument("edge band width " + std::to_string(pattern.feature_size) +
                                    " does not fit the tissue of a " + std::to_string(width) + "x" +
                                    std::to_string(height) + " image");
      break;
    default:
      break;
  }
}

SynthSample synth_image(const SynthPattern& pattern, int index, Label label, int width, int height,
                        std::uint64_t seed) {
  check_synth_geometry(pattern, width, height);
  RandomStream root(derive_seed(seed, "synth", static_cast<std::uint64_t>(index)));
  RandomStream shape_rng = root.child("blob");
  RandomStream texture_rng = root.child("texture");
  RandomStream nuclei_rng = root.child("nuclei");
  RandomStream mark_rng = root.child("marks");

  SynthSample out;
  out.label = label;
  GroundTruth& gt = out.truth;
  gt.image_id = synth_image_id(pattern.kind, index);
  gt.kind = pattern.kind;
  gt.label = label;
  gt.width = width;
  gt.height = height;

  const int side = std::min(width, height);
  gt.blob_cx = width / 2.0 + shape_rng.uniform(-0.04, 0.04) * side;
  gt.blob_cy = height / 2.0 + shape_rng.uniform(-0.04, 0.04) * side;
  gt.blob_radius = kBlobFraction * side * shape_rng.uniform(0.95, 1.05);
  for (int k = 0; k < kHarmonics; ++k) {
    gt.harmonics.push_back(shape_rng.uniform(-0.08, 0.08) / (k + 1));
    gt.harmonics.push_back(shape_rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  gt.half_side = static_cast<int>(shape_rng.below(4));
  const Blob blob = blob_from_truth(gt);

  const bool positive = is_positive(label);
  std::array<double, 3> base = pattern.base_color;
  if (positive && pattern.kind == PatternKind::GlobalDiffuse) {
    base[0] -= pattern.texture_shift;
    base[1] -= 0.6 * pattern.texture_shift;
    base[2] += 0.3 * pattern.texture_shift;
  }

  // Background, tissue texture and region areas in one pass.
  RasterImage& img = out.image;
  img = RasterImage(width, height);
  const auto& table = normal_table();
  long long tissue_px = 0, band_px = 0, half_px = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double depth = blob.depth(px, py);
      const auto bits = texture_rng.next();
      if (depth < 0.0) {
        const auto n0 = table[bits & 0xfff], n1 = table[(bits >> 12) & 0xfff],
                   n2 = table[(bits >> 24) & 0xfff];
        img.set_pixel(x, y, clamp_u8(std::clamp(250.0 + 2.0 * n0, 244.0, 255.0)),
                      clamp_u8(std::clamp(250.0 + 2.0 * n1, 244.0, 255.0)),
                      clamp_u8(std::clamp(250.0 + 2.0 * n2, 244.0, 255.0)));
        continue;
      }
      ++tissue_px;
      if (depth <= pattern.feature_size) ++band_px;
      if (in_half(gt.half_side, px, py, gt.blob_cx, gt.blob_cy)) ++half_px;
      const double s = pattern.noise_sigma;
      img.set_pixel(x, y, clamp_u8(base[0] + s * table[bits & 0xfff]),
                    clamp_u8(base[1] + s * table[(bits >> 12) & 0xfff]),
                    clamp_u8(base[2] + s * table[(bits >> 24) & 0xfff]));
    }
  }

  const auto inside_tissue = [&](double x, double y) {
    return x >= 0.0 && y >= 0.0 && x < width && y < height && blob.depth(x, y) >= 0.0;
  };

  // Nuclei are part of the base texture and appear in both classes.
  const long long nuclei = std::llround(pattern.nuclei_per_10k * static_cast<double>(tissue_px) / 1e4);
  for (long long k = 0; k < nuclei; ++k) {
    const double x = nuclei_rng.uniform(0.0, width), y = nuclei_rng.uniform(0.0, height);
    const double r = nuclei_rng.uniform(2.0, 3.5);
    RandomStream paint = nuclei_rng.child("paint", static_cast<std::uint64_t>(k));
    if (inside_tissue(x, y)) paint_ellipse(img, {x, y, r, r, 0.0}, kNucleusColor, 8.0, paint);
  }

  // Region in which mark centres are drawn.
  const double mark_r = pattern.mark_size / 2.0;
  double region_area = 0.0;
  switch (pattern.kind) {
    case PatternKind::LocalCluster: {
      gt.cluster_diameter = pattern.feature_size;
      const double cr = pattern.feature_size / 2.0;
      // Windows are only known once the tissue is painted; nuclei and marks
      // do not change the mask.
      std::vector<Rect> windows;
      for (const auto& p : filter_patches(tile(width, height, kSparsePatch), tissue_mask(img)))
        windows.push_back(p.rect);
      const auto sparse = [&](double x, double y) {
        GroundTruth probe = gt;
        probe.cluster_cx = x;
        probe.cluster_cy = y;
        const Rect box = probe.cluster_rect();
        const auto hits = std::count_if(windows.begin(), windows.end(), [&](const Rect& w) { return w.intersects(box); });
        return static_cast<double>(hits) < kSparseShare * static_cast<double>(windows.size());
      };
      // Small images cannot be sparse at all; after the first half of the
      // attempts any placement inside the tissue is accepted.
      bool placed = false;
      for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
        const double x = shape_rng.uniform(cr, width - cr), y = shape_rng.uniform(cr, height - cr);
        if (blob.depth(x, y) >= cr + mark_r && (attempt >= 5000 || sparse(x, y))) {
          gt.cluster_cx = x;
          gt.cluster_cy = y;
          placed = true;
        }
      }
      if (!placed) throw std::invalid_argument("could not place the local cluster inside the tissue");
      const double inner = std::max(cr - mark_r, 0.5);
      region_area = std::numbers::pi * inner * inner;
      break;
    }
    case PatternKind::EdgeDistributed: region_area = static_cast<double>(band_px); break;
    case PatternKind::HalfTissue: region_area = static_cast<double>(half_px); break;
    case PatternKind::GlobalDiffuse: region_area = static_cast<double>(tissue_px); break;
  }
  const double mark_area = std::numbers::pi * mark_r * mark_r;
  gt.nominal_marks = std::max(1, static_cast<int>(std::lround(pattern.feature_density * region_area / mark_area)));
  gt.min_marks = std::max(1, static_cast<int>(std::floor((1.0 - pattern.count_jitter) * gt.nominal_marks)));
  gt.max_marks = static_cast<int>(std::ceil((1.0 + pattern.count_jitter) * gt.nominal_marks));
  const int count = mark_rng.uniform_int(gt.min_marks, gt.max_marks);
  if (!positive) return out;

  const auto in_region = [&](double x, double y) {
    if (!inside_tissue(x, y)) return false;
    switch (pattern.kind) {
      case PatternKind::LocalCluster:
        return std::hypot(x - gt.cluster_cx, y - gt.cluster_cy) <= gt.cluster_diameter / 2.0 - mark_r;
      case PatternKind::EdgeDistributed: return blob.depth(x, y) <= pattern.feature_size;
      case PatternKind::HalfTissue: return in_half(gt.half_side, x, y, gt.blob_cx, gt.blob_cy);
      case PatternKind::GlobalDiffuse: return true;
    }
    return true;
  };
  double bx0 = 0.0, by0 = 0.0, bx1 = width, by1 = height;
  if (pattern.kind == PatternKind::LocalCluster) {
    const double cr = gt.cluster_diameter / 2.0;
    bx0 = gt.cluster_cx - cr;
    by0 = gt.cluster_cy - cr;
    bx1 = gt.cluster_cx + cr;
    by1 = gt.cluster_cy + cr;
  }
  const long long max_attempts = 2000LL * count + 10000;
  long long attempts = 0;
  while (static_cast<int>(gt.marks.size()) < count) {
    if (++attempts > max_attempts)
      throw std::invalid_argument("could not place " + std::to_string(count) + " marks in the feature region");
    const double x = mark_rng.uniform(bx0, bx1), y = mark_rng.uniform(by0, by1);
    if (!in_region(x, y)) continue;
    Mark m{x, y, mark_r, mark_r * mark_rng.uniform(0.6, 1.0), mark_rng.uniform(0.0, std::numbers::pi)};
    RandomStream paint = mark_rng.child("paint", gt.marks.size());
    paint_ellipse(img, m, kMarkColor, 6.0, paint);
    gt.marks.push_back(m);
  }
  return out;
}

SynthSet synth_generate(const SynthPattern& pattern, LabelRule rule, int n, int width, int height,
                        std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("synthetic image count must be non-negative");
  check_synth_geometry(pattern, width, height);
  SynthSet set;
  set.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto sample = synth_image(pattern, i, synth_label(rule, i), width, height, seed);
    set.manifest.push_back({sample.truth.image_id, sample.truth.image_id + ".png", sample.label,
                            ResolutionClass::of_dims(width, height)});
    set.samples.push_back(std::move(sample));
  }
  return set;
}

}  // namespace patchscope
