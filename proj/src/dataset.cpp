#include "patchscope/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "patchscope/random.hpp"

namespace patchscope {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

ResolutionClass ResolutionClass::parse(const std::string& text) {
  if (text == "R1") return {"R1", 4140, 3096};
  if (text == "R2") return {"R2", 2010, 1548};
  if (text == "R3") return {"R3", 1360, 1024};
  const auto x = text.find_first_of("xX");
  if (x != std::string::npos) {
    try {
      std::size_t used_w = 0, used_h = 0;
      const int w = std::stoi(text.substr(0, x), &used_w);
      const int h = std::stoi(text.substr(x + 1), &used_h);
      if (used_w == x && used_h == text.size() - x - 1 && w > 0 && h > 0) return of_dims(w, h);
    } catch (const std::logic_error&) {
    }
  }
  throw std::invalid_argument("unknown resolution class '" + text + "'");
}

ResolutionClass ResolutionClass::of_dims(int width, int height) {
  for (const char* known : {"R1", "R2", "R3"}) {
    auto r = parse(known);
    if (r.width == width && r.height == height) return r;
  }
  return {std::to_string(width) + "x" + std::to_string(height), width, height};
}

Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  Manifest manifest;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "image_id,path,label,resolution_class")
    throw std::runtime_error("manifest must start with header image_id,path,label,resolution_class");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(trim(line));
    if (f.size() != 4)
      throw std::runtime_error("manifest line " + std::to_string(line_no) + ": expected 4 fields");
    ManifestEntry e;
    e.image_id = f[0];
    e.path = f[1];
    if (e.path.is_relative() && !base_dir.empty()) e.path = base_dir / e.path;
    e.label = label_from_string(f[2]);
    e.resolution = ResolutionClass::parse(f[3]);
    manifest.push_back(std::move(e));
  }
  return manifest;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest '" + path.string() + "'");
  return parse_manifest(in, path.parent_path());
}

void write_manifest(std::ostream& out, const Manifest& manifest) {
  out << "image_id,path,label,resolution_class\n";
  for (const auto& e : manifest)
    out << e.image_id << ',' << e.path.generic_string() << ',' << to_string(e.label) << ','
        << e.resolution.name << '\n';
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
  write_manifest(out, manifest);
}

SplitShortfall::SplitShortfall(Label label, std::string resolution, int requested, int available)
    : std::runtime_error("split shortfall in cell (" + std::string(to_string(label)) + ", " +
                         resolution + "): requested " + std::to_string(requested) +
                         ", available " + std::to_string(available)),
      label_(label),
      resolution_(std::move(resolution)) {}

std::map<std::string, int> allocate_validation(const SplitSpec& spec) {
  std::map<std::string, int> alloc;
  const int total = spec.train_per_class + spec.val_per_class;
  if (spec.per_resolution_counts.empty()) {
    alloc[""] = spec.val_per_class;
    return alloc;
  }
  struct Share {
    std::string name;
    long long remainder;  // numerator of the fractional part, over `total`
    std::uint64_t tiebreak;
  };
  std::vector<Share> shares;
  RandomStream tie_rng(derive_seed(spec.seed, "split-ties"));
  int assigned = 0;
  for (const auto& [name, count] : spec.per_resolution_counts) {
    const long long num = static_cast<long long>(spec.val_per_class) * count;
    alloc[name] = total > 0 ? static_cast<int>(num / total) : 0;
    assigned += alloc[name];
    shares.push_back({name, total > 0 ? num % total : 0, tie_rng.next()});
  }
  std::sort(shares.begin(), shares.end(), [](const Share& a, const Share& b) {
    return a.remainder != b.remainder ? a.remainder > b.remainder : a.tiebreak < b.tiebreak;
  });
  for (std::size_t k = 0; assigned < spec.val_per_class && k < shares.size(); ++k, ++assigned)
    ++alloc[shares[k].name];
  return alloc;
}

Split balanced_split(const Manifest& manifest, const SplitSpec& spec) {
  if (spec.train_per_class < 0 || spec.val_per_class < 0)
    throw std::invalid_argument("split counts must be non-negative");
  const int total = spec.train_per_class + spec.val_per_class;
  std::map<std::string, int> cells = spec.per_resolution_counts;
  if (cells.empty()) {
    cells[""] = total;
  } else {
    int sum = 0;
    for (const auto& [name, count] : cells) {
      if (count < 0) throw std::invalid_argument("negative count for resolution " + name);
      sum += count;
    }
    if (sum != total)
      throw std::invalid_argument("per-resolution counts sum to " + std::to_string(sum) +
                                  " but train+validation per class is " + std::to_string(total));
  }
  const auto val_alloc = allocate_validation(spec);

  Split split;
  for (Label label : {Label::ActiveEoE, Label::NonEoE}) {
    for (const auto& [res, count] : cells) {
      std::vector<const ManifestEntry*> pool;
      for (const auto& e : manifest)
        if (e.label == label && (res.empty() || e.resolution.name == res)) pool.push_back(&e);
      if (static_cast<int>(pool.size()) < count)
        throw SplitShortfall(label, res.empty() ? "any" : res, count, static_cast<int>(pool.size()));
      // Canonical order first so the draw does not depend on manifest row order.
      std::sort(pool.begin(), pool.end(),
                [](const auto* a, const auto* b) { return a->image_id < b->image_id; });
      RandomStream rng(derive_seed(spec.seed, std::string("split/") + std::string(to_string(label)) + "/" + res));
      rng.shuffle(pool.begin(), pool.end());
      const int n_val = val_alloc.at(res);
      for (int k = 0; k < count; ++k)
        (k < n_val ? split.validation : split.train).push_back(*pool[k]);
    }
  }
  const auto by_id = [](const ManifestEntry& a, const ManifestEntry& b) { return a.image_id < b.image_id; };
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.validation.begin(), split.validation.end(), by_id);
  return split;
}

}  // namespace patchscope
