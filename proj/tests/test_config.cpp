#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "rgwalk/config.hpp"

using namespace rgwalk;

TEST_CASE("defaults round trip through text") {
  const ExperimentConfig c;
  CHECK(parse_config(config_to_text(c)) == c);
  CHECK_NOTHROW(validate_config(c));
}

TEST_CASE("non-default values round trip") {
  ExperimentConfig c;
  c.preset = "lazy_nn";
  c.hold = 0.3;
  c.dim = 2;
  c.model = "markov_field";
  c.epsilon = 0.123456789012345;
  c.orders = {2, 3, 4};
  c.times = {0.125, 1.0};
  c.seed = 18446744073709551615ull;
  c.antithetic = false;
  c.out_dir = "results/run 1";
  const ExperimentConfig back = parse_config(config_to_text(c));
  CHECK(back == c);
  CHECK(config_to_text(back) == config_to_text(c));
}

TEST_CASE("comments, blanks and overrides") {
  const ExperimentConfig c = parse_config("# header\n\nepsilon = 0.1   # weak\nlevels=3\ntimes = 0.5, 1\n");
  CHECK(c.epsilon == 0.1);
  CHECK(c.levels == 3);
  CHECK(c.times == std::vector<double>{0.5, 1.0});
  ExperimentConfig d = c;
  set_config_value(d, "L", "4");
  CHECK(d.L == 4);
}

TEST_CASE("schema errors name the key") {
  try {
    parse_config("epsilon = 0.1\nbogus_key = 3\n");
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
  CHECK(code_of([] { parse_config("levels = three\n"); }) == ErrorCode::SchemaError);
  CHECK(code_of([] { parse_config("no equals sign\n"); }) == ErrorCode::SchemaError);
  ExperimentConfig c;
  CHECK(code_of([&] { set_config_value(c, "nope", "1"); }) == ErrorCode::SchemaError);
  c.epsilon = 1.5;
  CHECK(code_of([&] { validate_config(c); }) == ErrorCode::SchemaError);
  c = {};
  c.model = "ising";
  CHECK(code_of([&] { validate_config(c); }) == ErrorCode::SchemaError);
  c = {};
  c.schema_version = 99;
  CHECK(code_of([&] { validate_config(c); }) == ErrorCode::SchemaError);
}

TEST_CASE("every key is settable and listed once") {
  const auto keys = config_keys();
  const std::string text = config_to_text(ExperimentConfig{});
  for (const auto& k : keys) CHECK(text.find(k + " = ") != std::string::npos);
  CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == keys.size());
}

TEST_CASE("loading files") {
  const auto path = std::filesystem::temp_directory_path() / "rgwalk_config_test.txt";
  std::ofstream(path) << "dim = 2\nseed = 7\n";
  const ExperimentConfig c = load_config(path.string());
  CHECK(c.dim == 2);
  CHECK(c.seed == 7u);
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_config(path.string()); }) == ErrorCode::IoError);
}
