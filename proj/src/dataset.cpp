#include "radtriage/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "radtriage/errors.hpp"
#include "radtriage/log.hpp"
#include "radtriage/rng.hpp"

namespace fs = std::filesystem;

namespace radtriage {

std::string_view anatomy_name(Anatomy a) {
  switch (a) {
    case Anatomy::elbow: return "elbow";
    case Anatomy::finger: return "finger";
    case Anatomy::forearm: return "forearm";
    case Anatomy::hand: return "hand";
    case Anatomy::humerus: return "humerus";
    case Anatomy::shoulder: return "shoulder";
    case Anatomy::wrist: return "wrist";
  }
  return "unknown";
}

std::optional<Anatomy> parse_anatomy(std::string_view text) {
  std::string s(text);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s.rfind("xr_", 0) == 0) s = s.substr(3);
  for (Anatomy a : kAnatomies) {
    if (anatomy_name(a) == s) return a;
  }
  return std::nullopt;
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_png(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png";
}

}  // namespace

ScanResult scan_layout(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root is not a readable directory: " + root.string());
  ScanResult result;
  try {
    for (const auto& anatomy_dir : sorted_entries(root, true)) {
      const std::string dname = anatomy_dir.filename().string();
      if (dname.rfind("XR_", 0) != 0) continue;
      const auto anatomy = parse_anatomy(dname);
      if (!anatomy) {
        log::warn("skipping unknown anatomy directory " + anatomy_dir.string());
        continue;
      }
      for (const auto& patient_dir : sorted_entries(anatomy_dir, true)) {
        for (const auto& study_dir : sorted_entries(patient_dir, true)) {
          const std::string sname = study_dir.filename().string();
          const auto us = sname.rfind('_');
          const std::string suffix = us == std::string::npos ? "" : sname.substr(us + 1);
          if (us == 0 || (suffix != "positive" && suffix != "negative")) {
            log::warn("skipping study with unparsable name " + study_dir.string());
            ++result.skipped;
            continue;
          }
          StudyRecord rec;
          rec.patient_id = patient_dir.filename().string();
          rec.anatomy = *anatomy;
          rec.study_id = sname.substr(0, us);
          rec.label = suffix == "positive" ? 1 : 0;
          for (const auto& f : sorted_entries(study_dir, false)) {
            if (is_png(f)) rec.view_paths.push_back(f);
          }
          if (rec.view_paths.empty()) {
            log::warn("skipping empty study directory " + study_dir.string());
            ++result.skipped;
            continue;
          }
          result.records.push_back(std::move(rec));
        }
      }
    }
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("scanning dataset failed: ") + e.what());
  }
  return result;
}

void SplitSpec::validate() const {
  for (double f : {train, val, test}) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fractions must each lie in (0, 1)");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

namespace {

// Whole-patient partition into fractions.size() buckets. Every bucket after
// the first gets round(f * P) patients (at least one); the first takes the rest.
std::vector<std::vector<StudyRecord>> partition_patients(const std::vector<StudyRecord>& records,
                                                         const std::vector<double>& fractions,
                                                         std::uint64_t seed) {
  std::set<std::string> unique;
  for (const auto& r : records) unique.insert(r.patient_id);
  std::vector<std::string> patients(unique.begin(), unique.end());
  const std::size_t n = patients.size();
  const std::size_t k = fractions.size();
  if (n < k) {
    throw PartitionError("patient-disjoint split into " + std::to_string(k) + " parts needs at least " +
                         std::to_string(k) + " patients, found " + std::to_string(n));
  }

  RngStream rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(patients[i], patients[rng.below(i + 1)]);

  std::vector<std::size_t> counts(k, 0);
  std::size_t assigned = 0;
  for (std::size_t b = 1; b < k; ++b) {
    counts[b] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fractions[b] * static_cast<double>(n))));
    assigned += counts[b];
  }
  // keep at least one patient in the first bucket
  while (assigned > n - 1) {
    const auto big = std::max_element(counts.begin() + 1, counts.end());
    if (*big <= 1) break;
    --*big;
    --assigned;
  }
  counts[0] = n - assigned;

  std::map<std::string, std::size_t> bucket;
  std::size_t i = 0;
  for (std::size_t b = 0; b < k; ++b)
    for (std::size_t c = 0; c < counts[b]; ++c) bucket[patients[i++]] = b;
  std::vector<std::vector<StudyRecord>> out(k);
  for (const auto& r : records) out[bucket[r.patient_id]].push_back(r);
  return out;
}

}  // namespace

DatasetSplits patient_disjoint_split(const std::vector<StudyRecord>& records, const SplitSpec& spec) {
  spec.validate();
  auto parts = partition_patients(records, {spec.train, spec.val, spec.test}, spec.seed);
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

DatasetSplits load_dataset(const fs::path& root, const SplitSpec& spec) {
  std::error_code ec;
  if (fs::is_directory(root / "train", ec) && fs::is_directory(root / "valid", ec)) {
    spec.validate();
    const double denom = spec.train + spec.val;
    auto parts = partition_patients(scan_layout(root / "train").records,
                                    {spec.train / denom, spec.val / denom}, spec.seed);
    log::info("using official train/valid partition under " + root.string());
    return {std::move(parts[0]), std::move(parts[1]), scan_layout(root / "valid").records};
  }
  return patient_disjoint_split(scan_layout(root).records, spec);
}

std::vector<ViewGroup> group_views(const std::vector<StudyRecord>& records) {
  std::map<StudyKey, ViewGroup> groups;
  for (const auto& r : records) {
    StudyKey key{r.patient_id, r.anatomy, r.study_id};
    auto [it, fresh] = groups.try_emplace(key);
    auto& g = it->second;
    if (!fresh && g.label != r.label) {
      throw InputError("conflicting labels for study " + r.patient_id + "/" + r.study_id);
    }
    g.key = key;
    g.label = r.label;
    g.views.insert(g.views.end(), r.view_paths.begin(), r.view_paths.end());
  }
  std::vector<ViewGroup> out;
  out.reserve(groups.size());
  for (auto& [k, g] : groups) out.push_back(std::move(g));
  return out;
}

std::vector<ManifestRow> manifest_rows(const std::vector<StudyRecord>& records) {
  std::vector<ManifestRow> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back({r.patient_id, r.anatomy, r.study_id, r.label, r.view_paths.size()});
  return rows;
}

void write_manifest(const fs::path& path, const std::vector<StudyRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& row : manifest_rows(records)) {
    out << row.patient_id << ',' << anatomy_name(row.anatomy) << ',' << row.study_id << ','
        << row.label << ',' << row.view_count << '\n';
  }
  if (!out) throw IoError("failed writing manifest " + path.string());
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw FormatError("manifest header mismatch in " + path.string());
  }
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw FormatError("malformed manifest line: " + line);
    const auto anatomy = parse_anatomy(cells[1]);
    if (!anatomy) throw FormatError("unknown anatomy in manifest: " + cells[1]);
    rows.push_back({cells[0], *anatomy, cells[2], std::stoi(cells[3]),
                    static_cast<std::size_t>(std::stoul(cells[4]))});
  }
  return rows;
}

}  // namespace radtriage
