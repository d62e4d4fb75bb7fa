#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include "radtriage/dataset.hpp"
#include "radtriage/errors.hpp"
#include "radtriage/image_io.hpp"
#include "test_util.hpp"

using namespace radtriage;
using radtriage::testing::TempDir;
namespace fs = std::filesystem;

namespace {

void touch_png(const fs::path& p) {
  fs::create_directories(p.parent_path());
  write_png_gray8(p, 2, 2, std::vector<float>{0.0f, 0.5f, 1.0f, 0.25f});
}

std::vector<StudyRecord> fake_records(std::size_t patients, std::size_t studies) {
  std::vector<StudyRecord> out;
  for (std::size_t p = 0; p < patients; ++p)
    for (std::size_t s = 0; s < studies; ++s) {
      StudyRecord r;
      r.patient_id = "patient" + std::to_string(p);
      r.anatomy = kAnatomies[p % 7];
      r.study_id = "study" + std::to_string(s + 1);
      r.label = static_cast<int>((p + s) % 2);
      r.view_paths = {"v" + std::to_string(p) + "_" + std::to_string(s) + ".png"};
      out.push_back(r);
    }
  return out;
}

}  // namespace

TEST(Anatomy, ParseForms) {
  EXPECT_EQ(parse_anatomy("elbow"), Anatomy::elbow);
  EXPECT_EQ(parse_anatomy("XR_SHOULDER"), Anatomy::shoulder);
  EXPECT_EQ(parse_anatomy("Wrist"), Anatomy::wrist);
  EXPECT_FALSE(parse_anatomy("knee").has_value());
  EXPECT_EQ(anatomy_name(Anatomy::humerus), "humerus");
}

TEST(Scan, SingleStudyTwoViews) {
  TempDir dir("scan1");
  const auto study = dir.path() / "XR_ELBOW" / "patient00001" / "study1_positive";
  touch_png(study / "image2.png");
  touch_png(study / "image1.png");
  const auto result = scan_layout(dir.path());
  ASSERT_EQ(result.records.size(), 1u);
  const auto& r = result.records[0];
  EXPECT_EQ(r.label, 1);
  EXPECT_EQ(r.anatomy, Anatomy::elbow);
  EXPECT_EQ(r.patient_id, "patient00001");
  EXPECT_EQ(r.study_id, "study1");
  ASSERT_EQ(r.view_paths.size(), 2u);
  EXPECT_EQ(r.view_paths[0].filename(), "image1.png");
}

TEST(Scan, EmptyRootAndMissingRoot) {
  TempDir dir("scan2");
  EXPECT_TRUE(scan_layout(dir.path()).records.empty());
  EXPECT_THROW(scan_layout(dir.path() / "nope"), IoError);
}

TEST(Scan, ThreePatientsTwoStudies) {
  TempDir dir("scan3");
  for (int p = 1; p <= 3; ++p)
    for (int s = 1; s <= 2; ++s) {
      const std::string study = "study" + std::to_string(s) + (s == 1 ? "_negative" : "_positive");
      touch_png(dir.path() / "XR_HAND" / ("patient0000" + std::to_string(p)) / study / "image1.png");
    }
  const auto result = scan_layout(dir.path());
  ASSERT_EQ(result.records.size(), 6u);
  std::set<std::string> patients;
  for (const auto& r : result.records) patients.insert(r.patient_id);
  EXPECT_EQ(patients, (std::set<std::string>{"patient00001", "patient00002", "patient00003"}));
}

TEST(Scan, SkipsEmptyAndUnparsableStudies) {
  TempDir dir("scan4");
  fs::create_directories(dir.path() / "XR_WRIST" / "patient1" / "study1_negative");
  touch_png(dir.path() / "XR_WRIST" / "patient1" / "study2_maybe" / "image1.png");
  touch_png(dir.path() / "XR_WRIST" / "patient1" / "study3_negative" / "image1.png");
  const auto result = scan_layout(dir.path());
  EXPECT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.skipped, 2u);
}

TEST(Split, TenPatientsEightOneOne) {
  const auto recs = fake_records(10, 2);
  const auto s = patient_disjoint_split(recs, SplitSpec{});
  EXPECT_EQ(s.train.size(), 16u);
  EXPECT_EQ(s.val.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, DisjointAndDeterministic) {
  const auto recs = fake_records(37, 3);
  SplitSpec spec{0.7, 0.15, 0.15, 5};
  const auto a = patient_disjoint_split(recs, spec);
  const auto b = patient_disjoint_split(recs, spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::map<std::string, int> where;
  int idx = 0;
  for (const auto* part : {&a.train, &a.val, &a.test}) {
    for (const auto& r : *part) {
      auto [it, fresh] = where.emplace(r.patient_id, idx);
      EXPECT_TRUE(fresh || it->second == idx) << r.patient_id;
    }
    ++idx;
  }
  EXPECT_EQ(a.train.size() + a.val.size() + a.test.size(), recs.size());
  spec.seed = 6;
  EXPECT_NE(patient_disjoint_split(recs, spec).val, a.val);
}

TEST(Split, Errors) {
  EXPECT_THROW(patient_disjoint_split(fake_records(2, 3), SplitSpec{}), PartitionError);
  EXPECT_THROW(patient_disjoint_split(fake_records(5, 1), SplitSpec{0.5, 0.5, 0.5, 0}), ConfigError);
  EXPECT_THROW(patient_disjoint_split(fake_records(5, 1), SplitSpec{1.0, 0.0, 0.0, 0}), ConfigError);
  EXPECT_NO_THROW(patient_disjoint_split(fake_records(3, 1), SplitSpec{}));
}

TEST(Group, ByStudyKey) {
  auto recs = fake_records(2, 2);
  recs[0].view_paths = {"a.png", "b.png", "c.png"};
  const auto groups = group_views(recs);
  ASSERT_EQ(groups.size(), 4u);
  std::multiset<std::string> in, out;
  for (const auto& r : recs)
    for (const auto& v : r.view_paths) in.insert(v.string());
  for (const auto& g : groups)
    for (const auto& v : g.views) out.insert(v.string());
  EXPECT_EQ(in, out);
  EXPECT_EQ(groups[0].views.size(), 3u);
}

TEST(Group, MergesSplitRecordsAndRejectsConflicts) {
  auto recs = fake_records(1, 1);
  auto extra = recs[0];
  extra.view_paths = {"second.png"};
  recs.push_back(extra);
  const auto groups = group_views(recs);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].views.size(), 2u);
  recs[1].label = 1 - recs[1].label;
  EXPECT_THROW(group_views(recs), InputError);
}

TEST(Manifest, RoundTrip) {
  TempDir dir("manifest");
  const auto recs = fake_records(4, 2);
  write_manifest(dir.path() / "m.csv", recs);
  EXPECT_EQ(read_manifest(dir.path() / "m.csv"), manifest_rows(recs));
  std::ofstream(dir.path() / "bad.csv") << "wrong,header\n";
  EXPECT_THROW(read_manifest(dir.path() / "bad.csv"), FormatError);
}

TEST(Synth, ScanRecoversManifest) {
  TempDir dir("synth");
  SynthConfig cfg;
  cfg.patients = 4;
  cfg.studies_per_patient = 2;
  cfg.views_per_study = 2;
  cfg.image_size = 56;
  cfg.seed = 3;
  const auto result = synth_generate(cfg, dir.path());
  EXPECT_EQ(result.images, 16u);
  const auto scanned = scan_layout(dir.path());
  ASSERT_EQ(scanned.records.size(), 8u);
  std::size_t images = 0;
  for (const auto& r : scanned.records) images += r.view_paths.size();
  EXPECT_EQ(images, 16u);
  EXPECT_EQ(manifest_rows(scanned.records), read_manifest(result.manifest));
  const auto img = read_png(scanned.records[0].view_paths[0]);
  EXPECT_EQ(img.height, 56u);
}

TEST(Synth, AbnormalFractionIsExact) {
  TempDir dir("synthfrac");
  SynthConfig cfg;
  cfg.patients = 5;
  cfg.studies_per_patient = 2;
  cfg.views_per_study = 1;
  cfg.image_size = 28;
  cfg.abnormal_fraction = 0.0;
  auto none = synth_generate(cfg, dir.path() / "a");
  for (const auto& r : none.records) EXPECT_EQ(r.label, 0);
  for (const auto& r : scan_layout(dir.path() / "a").records) {
    EXPECT_NE(r.view_paths[0].parent_path().filename().string().find("negative"), std::string::npos);
  }
  cfg.abnormal_fraction = 0.3;
  auto some = synth_generate(cfg, dir.path() / "b");
  int pos = 0;
  for (const auto& r : some.records) pos += r.label;
  EXPECT_EQ(pos, 3);
}

TEST(Synth, SeedReplayIsByteIdentical) {
  TempDir dir("synthseed");
  SynthConfig cfg;
  cfg.patients = 2;
  cfg.studies_per_patient = 1;
  cfg.views_per_study = 2;
  cfg.image_size = 28;
  cfg.seed = 11;
  const auto a = synth_generate(cfg, dir.path() / "a");
  const auto b = synth_generate(cfg, dir.path() / "b");
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  for (std::size_t i = 0; i < a.records.size(); ++i)
    for (std::size_t v = 0; v < a.records[i].view_paths.size(); ++v)
      EXPECT_EQ(slurp(a.records[i].view_paths[v]), slurp(b.records[i].view_paths[v]));
}

TEST(Synth, CycledAnatomiesAndLesionBrightness) {
  TempDir dir("synthcycle");
  SynthConfig cfg;
  cfg.patients = 7;
  cfg.studies_per_patient = 2;
  cfg.views_per_study = 1;
  cfg.abnormal_fraction = 0.5;
  cfg.cycle_anatomies = true;
  const auto res = synth_generate(cfg, dir.path());
  std::set<Anatomy> seen;
  double bright_pos = 0, bright_neg = 0;
  int npos = 0, nneg = 0;
  for (const auto& r : res.records) {
    seen.insert(r.anatomy);
    const auto img = read_png(r.view_paths[0]);
    float mx = 0;
    for (float v : img.pixels) mx = std::max(mx, v);
    (r.label ? bright_pos : bright_neg) += mx;
    (r.label ? npos : nneg)++;
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_GT(bright_pos / npos, bright_neg / nneg + 0.2);
}

TEST(LoadDataset, UsesOfficialPartitionWhenPresent) {
  TempDir dir("official");
  for (int p = 1; p <= 4; ++p) touch_png(dir.path() / "train" / "XR_HAND" / ("patient" + std::to_string(p)) / "study1_negative" / "i.png");
  touch_png(dir.path() / "valid" / "XR_HAND" / "patient9" / "study1_positive" / "i.png");
  const auto s = load_dataset(dir.path(), SplitSpec{});
  ASSERT_EQ(s.test.size(), 1u);
  EXPECT_EQ(s.test[0].patient_id, "patient9");
  EXPECT_EQ(s.train.size() + s.val.size(), 4u);
  EXPECT_GE(s.val.size(), 1u);
}
