#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace radtriage {

enum class Anatomy { elbow, finger, forearm, hand, humerus, shoulder, wrist };

inline constexpr std::array<Anatomy, 7> kAnatomies = {
    Anatomy::elbow, Anatomy::finger, Anatomy::forearm, Anatomy::hand,
    Anatomy::humerus, Anatomy::shoulder, Anatomy::wrist};

/// Lower-case name, e.g. "elbow".
std::string_view anatomy_name(Anatomy a);
/// Accepts "elbow", "ELBOW" or the directory form "XR_ELBOW".
std::optional<Anatomy> parse_anatomy(std::string_view text);

/// One radiographic study: every view shares the study-level label.
struct StudyRecord {
  std::string patient_id;
  Anatomy anatomy = Anatomy::wrist;
  std::string study_id;
  int label = 0;  // 0 normal, 1 abnormal
  std::vector<std::filesystem::path> view_paths;

  friend bool operator==(const StudyRecord&, const StudyRecord&) = default;
};

struct ScanResult {
  std::vector<StudyRecord> records;
  std::size_t skipped = 0;  // unparsable or empty study directories
};

/// Walks <root>/XR_<ANATOMY>/<patient>/<study>_<positive|negative>/*.png.
/// Records come out sorted by (anatomy dir, patient, study); views sorted by
/// file name. IoError if root is missing or not a directory.
ScanResult scan_layout(const std::filesystem::path& root);

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct DatasetSplits {
  std::vector<StudyRecord> train;
  std::vector<StudyRecord> val;
  std::vector<StudyRecord> test;
};

/// Shuffles distinct patient ids with the seeded stream and assigns whole
/// patients to train/val/test. Val and test each get round(fraction * P)
/// patients (at least one); train gets the rest. PartitionError when there
/// are fewer than three patients.
DatasetSplits patient_disjoint_split(const std::vector<StudyRecord>& records, const SplitSpec& spec);

/// Uses the official MURA partition when `root` holds train/ and valid/
/// (train/ is further split patient-disjointly into train and val, valid/
/// becomes test); otherwise scans `root` and calls patient_disjoint_split.
DatasetSplits load_dataset(const std::filesystem::path& root, const SplitSpec& spec);

struct StudyKey {
  std::string patient_id;
  Anatomy anatomy = Anatomy::wrist;
  std::string study_id;

  auto operator<=>(const StudyKey&) const = default;
  bool operator==(const StudyKey&) const = default;
};

struct ViewGroup {
  StudyKey key;
  int label = 0;
  std::vector<std::filesystem::path> views;
};

/// Merges views by study key (study ids repeat across anatomies in MURA, so
/// the anatomy is part of the key). Groups are ordered by key.
std::vector<ViewGroup> group_views(const std::vector<StudyRecord>& records);

inline constexpr std::string_view kManifestHeader = "patient_id,anatomy,study_id,label,view_count";

struct ManifestRow {
  std::string patient_id;
  Anatomy anatomy = Anatomy::wrist;
  std::string study_id;
  int label = 0;
  std::size_t view_count = 0;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

void write_manifest(const std::filesystem::path& path, const std::vector<StudyRecord>& records);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
std::vector<ManifestRow> manifest_rows(const std::vector<StudyRecord>& records);

struct SynthConfig {
  std::size_t patients = 64;
  std::size_t studies_per_patient = 2;
  std::size_t views_per_study = 2;
  std::size_t image_size = 56;
  double abnormal_fraction = 0.4;
  std::uint64_t seed = 0;
  /// false: every study is filed under one anatomy (wrist); true: patients
  /// cycle through the seven anatomies.
  bool cycle_anatomies = false;
};

struct SynthResult {
  std::vector<StudyRecord> records;
  std::filesystem::path manifest;
  std::size_t images = 0;
};

/// Writes a MURA-layout PNG tree under `out_dir` plus manifest.csv. Each view
/// is a smooth background with noise and a bright elongated bone; abnormal
/// studies add a bright circular lesion on the bone in every view. The
/// number of abnormal studies is round(abnormal_fraction * total).
SynthResult synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace radtriage
