#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ticketlab/io.hpp"

namespace tl = ticketlab;

TEST_SUITE("io") {

TEST_CASE("config parses key=value text with comments and sections") {
  const tl::Config cfg = tl::Config::from_text(
      "# experiment setup\n"
      "[train]\n"
      "eta = 0.5\n"
      "beta=0.2\n"
      "d = 300\n"
      "K=10\n"
      "N = 5000\n");
  CHECK(cfg.get_double("eta", 0.0) == 0.5);
  CHECK(cfg.get_double("beta", 0.0) == 0.2);
  CHECK(cfg.get_int("d", 0) == 300);
  CHECK(cfg.get_int("K", 0) == 10);
  CHECK(cfg.get_int("N", 0) == 5000);
}

TEST_CASE("empty config falls back to every documented default") {
  const tl::Config cfg = tl::Config::from_text("");
  CHECK(cfg.get_double("eta", 0.5) == 0.5);
  CHECK(cfg.get_string("partition_mode", "reuse_full") == "reuse_full");
  CHECK(cfg.get_u64("seed", 1) == 1);
  CHECK(cfg.get_double_list("lambda_list", {0.1, 0.2}) == std::vector<double>{0.1, 0.2});
}

TEST_CASE("config type errors name the offending key") {
  const tl::Config cfg = tl::Config::from_text("eta = fast\n");
  CHECK_THROWS_WITH_AS(cfg.get_double("eta", 0.5), doctest::Contains("eta"),
                       std::invalid_argument);
}

TEST_CASE("unknown keys are rejected by name") {
  const tl::Config cfg = tl::Config::from_text("etaa = 0.5\n");
  CHECK_THROWS_WITH_AS(cfg.reject_unknown_keys({"eta", "beta"}), doctest::Contains("etaa"),
                       std::invalid_argument);
}

TEST_CASE("json configs are auto-detected") {
  const auto path = std::filesystem::temp_directory_path() / "tl_cfg_test.json";
  std::ofstream(path) << "{\"eta\": 0.25, \"d\": 40, \"lambda_list\": [0.1, 0.3]}";
  const tl::Config cfg = tl::Config::from_file(path);
  CHECK(cfg.get_double("eta", 0.0) == 0.25);
  CHECK(cfg.get_int("d", 0) == 40);
  CHECK(cfg.get_double_list("lambda_list", {}) == std::vector<double>{0.1, 0.3});
  std::filesystem::remove(path);
}

TEST_CASE("double lists parse comma separated values") {
  const tl::Config cfg = tl::Config::from_text("xs = 1, 2.5,4\n");
  CHECK(cfg.get_double_list("xs", {}) == std::vector<double>{1.0, 2.5, 4.0});
}

TEST_CASE("content hash is stable and content sensitive") {
  const std::string a = tl::content_hash("hello");
  CHECK(a == tl::content_hash("hello"));
  CHECK(a != tl::content_hash("hello!"));
  CHECK(a.size() == 16);  // 64-bit hex
}

TEST_CASE("manifest round-trips through json") {
  tl::RunManifest m;
  m.command = "train";
  m.config = {{"eta", "0.5"}, {"d", "300"}};
  m.master_seed = 99;
  m.version = "0.1.0";
  m.runtime_seconds = 1.25;
  m.stats = {{"final_rel_error", 3e-5}};
  m.outputs.push_back({"out/train-x-trace.csv", "abcd"});
  const tl::RunManifest back = tl::RunManifest::from_json(m.to_json());
  CHECK(back.command == m.command);
  CHECK(back.config == m.config);
  CHECK(back.master_seed == m.master_seed);
  CHECK(back.version == m.version);
  CHECK(back.runtime_seconds == m.runtime_seconds);
  CHECK(back.stats.at("final_rel_error") == 3e-5);
  REQUIRE(back.outputs.size() == 1);
  CHECK(back.outputs[0].path == m.outputs[0].path);
  CHECK(back.outputs[0].hash == m.outputs[0].hash);
}

TEST_CASE("write_output creates directories and hashes the content") {
  const auto dir = std::filesystem::temp_directory_path() / "tl_io_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "nested" / "file.csv";
  const tl::ManifestEntry entry = tl::write_output(path, "a,b\n1,2\n");
  CHECK(entry.hash == tl::content_hash("a,b\n1,2\n"));
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "a,b");
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv builder enforces row width and formats doubles") {
  tl::CsvBuilder csv({"x", "y"});
  csv.cell(1.5).cell(std::uint64_t{7});
  csv.end_row();
  CHECK(csv.str() == "x,y\n1.5,7\n");
  tl::CsvBuilder bad({"x", "y"});
  bad.cell(1.0);
  CHECK_THROWS(bad.end_row());
}

}  // TEST_SUITE
