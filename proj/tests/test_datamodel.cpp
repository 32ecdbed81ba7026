#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "rtgan/datamodel.hpp"
#include "test_util.hpp"

namespace rtgan {
namespace {

Frame ramp(int h, int w, int t) {
  Frame f = Frame::filled(h, w, 3, t, 0.0f);
  for (Eigen::Index i = 0; i < f.pixels.size(); ++i) f.pixels[i] = normalize_pixel(static_cast<std::uint8_t>((i * 7 + t) % 256));
  return f;
}

VideoSequence make_seq(int n, int h = 16, int w = 16) {
  VideoSequence s;
  for (int t = 0; t < n; ++t) s.frames.push_back(std::make_shared<const Frame>(ramp(h, w, t)));
  s.sequence_id = "seq";
  return s;
}

TEST(Normalize, Endpoints) {
  EXPECT_EQ(normalize_pixel(255), 1.0f);
  EXPECT_EQ(normalize_pixel(0), -1.0f);
  EXPECT_EQ(denormalize_pixel(1.0f), 255);
  EXPECT_EQ(denormalize_pixel(-1.0f), 0);
  EXPECT_EQ(denormalize_pixel(5.0f), 255);
}

TEST(Normalize, RoundTripAllValues) {
  for (int v = 0; v < 256; ++v) EXPECT_EQ(denormalize_pixel(normalize_pixel(static_cast<std::uint8_t>(v))), v);
}

TEST(Frame, ValidateChecksShapeAndRange) {
  Frame f = Frame::filled(16, 20, 3, 0, 0.0f);
  EXPECT_NO_THROW(f.validate());
  f.pixels[3] = 1.5f;
  EXPECT_THROW(f.validate(), FormatError);
  EXPECT_THROW(Frame::filled(12, 16, 3, 0, 0.0f).validate(), FormatError);
  EXPECT_THROW(Frame::filled(18, 16, 3, 0, 0.0f).validate(), FormatError);
}

TEST(Frame, MaskPromotesToRedOverlay) {
  Frame m = Frame::filled(16, 16, 1, 0, -1.0f);
  m.at(0, 2, 3) = 1.0f;
  const Frame rgb = m.as_rgb();
  ASSERT_EQ(rgb.channels, 3);
  EXPECT_EQ(rgb.at(0, 2, 3), 1.0f);
  EXPECT_EQ(rgb.at(1, 2, 3), -1.0f);
  EXPECT_EQ(rgb.at(2, 2, 3), -1.0f);
  EXPECT_EQ(rgb.at(0, 0, 0), -1.0f);
}

TEST(Frame, CenterCropToMultipleOf4) {
  Frame f = Frame::filled(19, 22, 1, 0, 0.0f);
  for (int y = 0; y < 19; ++y) {
    for (int x = 0; x < 22; ++x) f.at(0, y, x) = static_cast<float>(y * 22 + x) / 1000.0f;
  }
  const Frame c = center_crop_to_multiple_of_4(f);
  EXPECT_EQ(c.height, 16);
  EXPECT_EQ(c.width, 20);
  EXPECT_EQ(c.at(0, 0, 0), f.at(0, 1, 1));
}

TEST(Triplets, SmallEnumeration) {
  const auto tr = make_triplets(make_seq(5), 1);
  ASSERT_EQ(tr.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_EQ(tr[i].x[k]->t_index, i + k);
  }
  EXPECT_TRUE(make_triplets(make_seq(2), 1).empty());
  EXPECT_EQ(make_triplets(make_seq(300), 1).size(), 298u);
  EXPECT_THROW(make_triplets(make_seq(5), 0), ConfigError);
}

TEST(Triplets, CountMatchesCeilFormula) {
  for (int n = 0; n <= 32; ++n) {
    const VideoSequence seq = make_seq(n);
    for (int stride = 1; stride <= 4; ++stride) {
      const int expected = n > 2 ? (n - 2 + stride - 1) / stride : 0;
      int brute = 0;
      for (int t = 0; t + 2 < n; t += stride) ++brute;
      ASSERT_EQ(brute, expected);
      EXPECT_EQ(static_cast<int>(make_triplets(seq, stride).size()), expected) << n << " " << stride;
      EXPECT_EQ((TripletRange{0, std::max(n - 2, 0), stride}.count()), expected);
    }
  }
}

TEST(Triplets, ValidateRejectsNonConsecutive) {
  auto tr = make_triplets(make_seq(4), 1);
  FrameTriplet bad = tr[0];
  bad.x[2] = tr[1].x[2];
  EXPECT_THROW(bad.validate(), ContractError);
  FrameTriplet mismatched = tr[0];
  mismatched.f[0] = std::make_shared<const Frame>(Frame::filled(20, 16, 3, 0, 0.0f));
  mismatched.f[1] = mismatched.f[0];
  EXPECT_THROW(mismatched.validate(), ContractError);
}

TEST(LoadSequence, RoundTripAndNormalization) {
  test::TempDir dir;
  const VideoSequence seq = make_seq(10);
  save_sequence(seq, dir.path() / "a");
  const VideoSequence back = load_sequence(dir.path() / "a", Domain::Y);
  ASSERT_EQ(back.size(), 10u);
  EXPECT_EQ(back.sequence_id, "a");
  EXPECT_EQ(back.domain_tag, Domain::Y);
  for (int t = 0; t < 10; ++t) {
    EXPECT_EQ(back[t].t_index, t);
    EXPECT_TRUE((back[t].pixels == seq[t].pixels).all());
  }
}

TEST(LoadSequence, Errors) {
  test::TempDir dir;
  EXPECT_THROW(load_sequence(dir.path() / "missing", Domain::X), NotFoundError);
  const VideoSequence seq = make_seq(4);
  fs::create_directories(dir.path() / "gap");
  for (int t : {0, 1, 3}) save_frame(seq[t], dir.path() / "gap" / frame_file_name(t));
  try {
    load_sequence(dir.path() / "gap", Domain::X);
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("gap at index 2"), std::string::npos);
  }
  fs::create_directories(dir.path() / "mixed");
  save_frame(Frame::filled(16, 16, 3, 0, 0.0f), dir.path() / "mixed" / frame_file_name(0));
  save_frame(Frame::filled(20, 16, 3, 1, 0.0f), dir.path() / "mixed" / frame_file_name(1));
  EXPECT_THROW(load_sequence(dir.path() / "mixed", Domain::X), FormatError);
}

DatasetManifest manifest_of(int sequences) {
  DatasetManifest m;
  m.root_path = ".";
  for (int i = 0; i < sequences; ++i) {
    const std::string id = "v" + std::to_string(i);
    m.entries.push_back({id, id + "/x", Domain::X, 12, {0, 10, 1}});
    m.entries.push_back({id, id + "/y", Domain::Y, 12, {0, 10, 1}});
  }
  return m;
}

TEST(SplitDataset, CountsDeterminismAndDisjointness) {
  const DatasetManifest m = manifest_of(10);
  const auto a = split_dataset(m, {0.5, 0.3, 0.2}, 7);
  const auto b = split_dataset(m, {0.5, 0.3, 0.2}, 7);
  EXPECT_EQ(a[0].sequence_ids().size(), 5u);
  EXPECT_EQ(a[1].sequence_ids().size(), 3u);
  EXPECT_EQ(a[2].sequence_ids().size(), 2u);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(manifest_to_string(a[k]), manifest_to_string(b[k]));
  std::multiset<std::string> all;
  std::size_t entries = 0;
  for (const auto& part : a) {
    for (const auto& id : part.sequence_ids()) all.insert(id);
    entries += part.entries.size();
  }
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(std::set<std::string>(all.begin(), all.end()).size(), 10u);
  EXPECT_EQ(entries, m.entries.size());
  EXPECT_EQ(a[0].split, Split::train);
  EXPECT_EQ(a[2].split, Split::test);
}

TEST(SplitDataset, IdentityAndErrors) {
  const DatasetManifest m = manifest_of(4);
  const auto s = split_dataset(m, {1.0, 0.0, 0.0}, 1);
  EXPECT_EQ(s[0].sequence_ids().size(), 4u);
  EXPECT_TRUE(s[1].entries.empty());
  EXPECT_THROW(split_dataset(manifest_of(2), {0.4, 0.3, 0.3}, 1), ConfigError);
  EXPECT_THROW(split_dataset(m, {0.5, 0.3, 0.3}, 1), ConfigError);
}

TEST(Manifest, RoundTripAndVerification) {
  test::TempDir dir;
  DatasetManifest m;
  m.root_path = ".";
  m.seed = 42;
  m.split = Split::val;
  save_sequence(make_seq(5), dir.path() / "v0" / "x");
  m.entries.push_back({"v0", "v0/x", Domain::X, 5, {0, 3, 1}});
  EXPECT_EQ(manifest_from_string(manifest_to_string(m)), m);
  save_manifest(m, dir.path() / "manifest.json");
  EXPECT_EQ(load_manifest(dir.path() / "manifest.json"), m);
  EXPECT_EQ(m.triplet_count(), 3u);
  fs::remove(dir.path() / "v0" / "x" / frame_file_name(4));
  EXPECT_THROW(load_manifest(dir.path() / "manifest.json"), NotFoundError);
  std::ofstream(dir.path() / "bad.json") << "{ not json";
  EXPECT_THROW(load_manifest(dir.path() / "bad.json"), FormatError);
}

}  // namespace
}  // namespace rtgan
