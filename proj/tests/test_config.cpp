#include <gtest/gtest.h>

#include <filesystem>

#include "fuq/config.hpp"
#include "fuq/io.hpp"

using namespace fuq;
using nlohmann::json;

namespace {

ErrorKind parse_kind(const json& j) {
  try {
    parse_run_config(j);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "accepted: " << j.dump();
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(Config, Defaults) {
  const auto rc = parse_run_config(json::object());
  EXPECT_EQ(rc.omega0, 30.0);
  EXPECT_EQ(rc.dropout_placement, DropoutPlacement::last_block);
  EXPECT_EQ(rc.uq.method, UqMethod::mcdropout);
  EXPECT_EQ(rc.uq.mc_samples, 100u);
  EXPECT_EQ(rc.output_dir, "out");
  const auto n2 = rc.network_for(2);
  EXPECT_EQ(n2.hidden_width, 100u);
  EXPECT_EQ(n2.num_res_blocks, 10u);
  const auto n3 = rc.network_for(3);
  EXPECT_EQ(n3.hidden_width, 120u);
  EXPECT_EQ(n3.num_res_blocks, 14u);
  EXPECT_EQ(n3.input_dim, 3u);
}

TEST(Config, ExplicitValues) {
  const auto rc = parse_run_config(json::parse(R"({
    "network": {"hidden_width": 16, "num_res_blocks": 2, "dropout_placement": "all_blocks", "dropout_p_test": 0.2},
    "training": {"epochs": 7, "batch_size": 64, "learning_rate": 0.01},
    "uq": {"method": "ensemble", "members": 4},
    "flow": {"seeds": [[0.1, 0.2], [0.3, 0.4]], "format": "both"},
    "metrics": {"match_radius": 0.3},
    "output": {"dir": "elsewhere"},
    "jobs": 2
  })"));
  EXPECT_EQ(rc.network_for(3).hidden_width, 16u);
  EXPECT_EQ(rc.dropout_placement, DropoutPlacement::all_blocks);
  EXPECT_EQ(rc.dropout_p_test, 0.2);
  EXPECT_EQ(rc.training.epochs, 7u);
  EXPECT_EQ(rc.uq.method, UqMethod::ensemble);
  EXPECT_EQ(rc.uq.members, 4u);
  ASSERT_EQ(rc.flow.seeds.size(), 2u);
  EXPECT_EQ(rc.flow.seeds[1], (Vec{0.3, 0.4}));
  EXPECT_EQ(*rc.metrics.match_radius, 0.3);
  EXPECT_EQ(rc.output_dir, "elsewhere");
  EXPECT_EQ(rc.jobs, 2u);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_EQ(parse_kind(json::parse(R"({"bogus": 1})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"({"training": {"epoch": 3}})")), ErrorKind::InvalidConfig);
  try {
    parse_run_config(json::parse(R"({"uq": {"samples": 3}})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("uq.samples"), std::string::npos);
  }
}

TEST(Config, Validation) {
  EXPECT_EQ(parse_kind(json::parse(R"({"network": {"dropout_p_test": 1.0}})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"({"network": {"dropout_placement": "middle"}})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"({"uq": {"method": "bayes"}})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"({"uq": {"mc_samples": 0}})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"({"training": {"batch_size": 0}})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"({"training": {"learning_rate": "fast"}})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"({"flow": {"seeds": [[1.0]]}})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"({"flow": {"format": "vtk"}})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"({"jobs": 0})")), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_kind(json::parse(R"([1, 2])")), ErrorKind::InvalidConfig);
}

TEST(Config, LoadFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "fuq_test_config";
  std::filesystem::create_directories(dir);
  io::write_text(dir / "ok.json", R"({"training": {"epochs": 3}})");
  EXPECT_EQ(load_run_config(dir / "ok.json").training.epochs, 3u);
  io::write_text(dir / "bad.json", "{");
  try {
    load_run_config(dir / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  }
  try {
    load_run_config(dir / "absent.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
}

TEST(Config, SampleConfigParses) {
  const std::filesystem::path sample = std::filesystem::path(FUQ_SOURCE_DIR) / "configs" / "center2d.json";
  ASSERT_TRUE(std::filesystem::exists(sample));
  EXPECT_NO_THROW(load_run_config(sample));
}
