#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rnf/config.h"
#include "rnf/errors.h"

using namespace rnf;

TEST_CASE("key=value parsing") {
  const auto cfg = KeyValueConfig::parse(
      "# model\n"
      "task = sst5\n"
      "\n"
      "  window=7  \r\n"
      "lr=0.25\n"
      "ms = 1, 2,3\n"
      "shared_encoder=false\n"
      "empty=\n");
  CHECK(cfg.get_string("task", "") == "sst5");
  CHECK(cfg.get_size("window", 0) == 7);
  CHECK(cfg.get_double("lr", 0.0) == 0.25);
  CHECK(cfg.get_size_list("ms", {}) == std::vector<std::size_t>{1, 2, 3});
  CHECK_FALSE(cfg.get_bool("shared_encoder", true));
  CHECK(cfg.get_string("empty", "x").empty());
  CHECK(cfg.get_size("missing", 42) == 42);
  CHECK(cfg.values().size() == 6);
  CHECK_THROWS_AS(cfg.require_string("empty"), ConfigError);
  CHECK_THROWS_AS(cfg.require_string("missing"), ConfigError);
}

TEST_CASE("malformed configs") {
  CHECK_THROWS_AS(KeyValueConfig::parse("window 7\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("=7\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("a=1\na=2\n"), ConfigError);
  try {
    KeyValueConfig::parse("a=1\n\nbroken\n", "my.cfg");
    FAIL("no throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("my.cfg line 3") != std::string::npos);
  }

  const auto cfg = KeyValueConfig::parse("n=-3\nx=abc\nb=maybe\nl=1,0\nf=1.5e\n");
  CHECK_THROWS_AS(cfg.get_size("n", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_size("x", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("x", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("f", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("b", false), ConfigError);
  CHECK_THROWS_AS(cfg.get_size_list("l", {}), ConfigError);
}

TEST_CASE("flags override file values") {
  const auto path = std::filesystem::temp_directory_path() / "rnf_config_test.cfg";
  {
    std::ofstream out(path);
    out << "seed=1\nfilter=linear\n";
  }
  auto cfg = KeyValueConfig::load(path);
  cfg.set("seed", "9");
  CHECK(cfg.get_u64("seed", 0) == 9);
  CHECK(cfg.get_string("filter", "") == "linear");

  const std::vector<std::string> known{"seed", "filter"};
  CHECK_NOTHROW(cfg.reject_unknown(known));
  cfg.set("sead", "2");
  CHECK_THROWS_WITH_AS(cfg.reject_unknown(known), doctest::Contains("sead"), ConfigError);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(KeyValueConfig::load("/no/such/file.cfg"), ConfigError);
}
