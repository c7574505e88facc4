#pragma once

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "patchscope/image.hpp"

namespace patchscope {

/// Named image resolution. R1-R3 are the three microscope resolutions; any
/// other class is written "WxH".
struct ResolutionClass {
  std::string name;
  int width = 0;
  int height = 0;

  static ResolutionClass parse(const std::string& text);
  static ResolutionClass of_dims(int width, int height);
  friend bool operator==(const ResolutionClass& a, const ResolutionClass& b) { return a.name == b.name; }
  friend auto operator<=>(const ResolutionClass& a, const ResolutionClass& b) { return a.name <=> b.name; }
};

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path path;
  Label label = Label::NonEoE;
  ResolutionClass resolution;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

using Manifest = std::vector<ManifestEntry>;

/// CSV with header image_id,path,label,resolution_class. Relative paths are
/// resolved against the manifest's directory when read.
Manifest read_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {});
void write_manifest(std::ostream& out, const Manifest& manifest);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct SplitSpec {
  int train_per_class = 147;
  int val_per_class = 63;
  /// Images to draw per class from each resolution. Empty means one pool per class.
  std::map<std::string, int> per_resolution_counts{{"R1", 29}, {"R2", 126}, {"R3", 55}};
  std::uint64_t seed = 0;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

/// Raised when a (class, resolution) cell holds fewer images than requested.
class SplitShortfall : public std::runtime_error {
 public:
  SplitShortfall(Label label, std::string resolution, int requested, int available);
  Label label() const { return label_; }
  const std::string& resolution() const { return resolution_; }

 private:
  Label label_;
  std::string resolution_;
};

struct Split {
  Manifest train;
  Manifest validation;
};

/// Class- and resolution-balanced random split.
///
/// For each class and resolution cell, count images are drawn without
/// replacement from a seeded shuffle. The validation share of each cell is
/// val_per_class * count / total with largest-remainder rounding; remainder
/// ties are broken by a seeded order. Both classes use the same allocation,
/// so the two sets are balanced per class and per resolution. Output entries
/// are sorted by image_id.
/// Throws SplitShortfall on insufficient availability and
/// std::invalid_argument when the resolution counts do not sum to
/// train_per_class + val_per_class.
Split balanced_split(const Manifest& manifest, const SplitSpec& spec);

/// Validation count per resolution cell under the largest-remainder rule.
std::map<std::string, int> allocate_validation(const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Synthetic images with planted features

enum class PatternKind { LocalCluster, EdgeDistributed, HalfTissue, GlobalDiffuse };

std::string to_string(PatternKind kind);
/// Accepts "local"/"A", "edge"/"B", "half"/"C", "global"/"D" and the enum names.
PatternKind pattern_from_string(const std::string& text);

struct SynthPattern {
  PatternKind kind = PatternKind::GlobalDiffuse;
  /// Fraction of the feature region covered by marks, in (0, 1].
  double feature_density = 0.02;
  /// Extent of the feature region: cluster diameter (A) or boundary band width (B).
  int feature_size = 64;
  /// Major diameter of one mark in pixels.
  int mark_size = 8;
  /// Planted counts are drawn uniformly from [1 - jitter, 1 + jitter] * nominal.
  double count_jitter = 0.1;
  /// Colour shift of the whole tissue texture in positive GlobalDiffuse images.
  double texture_shift = 12.0;
  /// Tissue texture: base RGB, per-pixel noise and nuclei per 10k tissue pixels.
  std::array<double, 3> base_color{220.0, 150.0, 190.0};
  double noise_sigma = 10.0;
  double nuclei_per_10k = 8.0;

  void validate() const;
  /// Defaults tuned for each kind (density, feature size).
  static SynthPattern defaults(PatternKind kind);
  friend bool operator==(const SynthPattern&, const SynthPattern&) = default;
};

enum class LabelRule { Alternating, AllPositive, AllNegative };

struct Mark {
  double x = 0.0, y = 0.0;    // centre
  double rx = 0.0, ry = 0.0;  // semi-axes
  double angle = 0.0;         // radians
};

/// Everything the generator planted in one image.
struct GroundTruth {
  std::string image_id;
  PatternKind kind = PatternKind::GlobalDiffuse;
  Label label = Label::NonEoE;
  int width = 0, height = 0;
  double blob_cx = 0.0, blob_cy = 0.0, blob_radius = 0.0;
  std::vector<double> harmonics;  // (amplitude, phase) pairs for orders 2, 3, ...
  /// Feature region: cluster disk (A) as centre + diameter; unused otherwise.
  double cluster_cx = 0.0, cluster_cy = 0.0, cluster_diameter = 0.0;
  /// Tissue half holding the marks (C only): 0 left, 1 right, 2 top, 3 bottom.
  int half_side = 0;
  int nominal_marks = 0;
  int min_marks = 0, max_marks = 0;  // configured density band
  std::vector<Mark> marks;

  /// Bounding box of the local cluster, clipped to the image (A only).
  Rect cluster_rect() const;
  /// Radius of the tissue blob in direction theta.
  double blob_radius_at(double theta) const;
};

nlohmann::json to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

struct SynthSample {
  RasterImage image;
  Label label = Label::NonEoE;
  GroundTruth truth;
};

Label synth_label(LabelRule rule, int index);
std::string synth_image_id(PatternKind kind, int index);

/// Generates image `index` of a synthetic set. A tissue blob with a smooth
/// random boundary sits on a near-white background; tissue carries noisy
/// stain texture with scattered nuclei. Positives additionally carry dark
/// elliptical marks placed according to the pattern. Deterministic in
/// (pattern, index, label, dims, seed).
/// Throws std::invalid_argument when the geometry cannot hold the feature.
SynthSample synth_image(const SynthPattern& pattern, int index, Label label, int width, int height,
                        std::uint64_t seed);

struct SynthSet {
  std::vector<SynthSample> samples;
  Manifest manifest;
};

/// n images in memory with a manifest whose paths are "<image_id>.png".
SynthSet synth_generate(const SynthPattern& pattern, LabelRule rule, int n, int width, int height,
                        std::uint64_t seed);

/// Checks the geometry without generating pixels; throws like synth_image.
void check_synth_geometry(const SynthPattern& pattern, int width, int height);

}  // namespace patchscope
