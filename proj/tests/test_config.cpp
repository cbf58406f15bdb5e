#include <doctest.h>

#include "hyperembed/config.hpp"
#include "hyperembed/errors.hpp"

using namespace hyperembed;

TEST_SUITE("config") {

TEST_CASE("parses the TOML subset") {
  const ConfigMap cfg = ConfigMap::from_toml(
      "# experiment\n"
      "input = \"links.txt\"\n"
      "level = 0.95\n"
      "n_grid = [100, 200,\n"
      "          400]   # grows\n"
      "beta_grid = [0.0, -1.0]\n"
      "names = [\"a\", \"b\"]\n"
      "quiet = true\n"
      "\n"
      "[fit]\n"
      "k = 2\n"
      "tol = 1e-8\n");
  CHECK(cfg.get_string("input") == "links.txt");
  CHECK(cfg.get_double("level") == doctest::Approx(0.95));
  CHECK(cfg.get_int_list("n_grid") == std::vector<long long>{100, 200, 400});
  CHECK(cfg.get_double_list("beta_grid") == std::vector<double>{0.0, -1.0});
  CHECK(cfg.get_string_list("names") == std::vector<std::string>{"a", "b"});
  CHECK(cfg.get_bool("quiet"));
  CHECK(cfg.get_int("fit.k") == 2);
  CHECK(cfg.get_double("fit.tol") == doctest::Approx(1e-8));
}

TEST_CASE("int values read as doubles, not vice versa") {
  const ConfigMap cfg = ConfigMap::from_toml("a = 3\nb = 3.5\n");
  CHECK(cfg.get_double("a") == doctest::Approx(3.0));
  CHECK_THROWS_AS(cfg.get_int("b"), ConfigError);
}

TEST_CASE("toml errors carry line numbers") {
  CHECK_THROWS_AS(ConfigMap::from_toml("a 3\n"), ParseError);
  CHECK_THROWS_AS(ConfigMap::from_toml("a = \n"), ParseError);
  CHECK_THROWS_AS(ConfigMap::from_toml("x = [1, \"two\"]\n"), ParseError);
  CHECK_THROWS_AS(ConfigMap::from_toml("[tab\n"), ParseError);
}

TEST_CASE("json fallback flattens nested objects") {
  const ConfigMap cfg = ConfigMap::from_json(
      R"({"input": "x.txt", "fit": {"k": 3, "lambda": 2.5}, "n_grid": [10, 20]})");
  CHECK(cfg.get_string("input") == "x.txt");
  CHECK(cfg.get_int("fit.k") == 3);
  CHECK(cfg.get_double("fit.lambda") == doctest::Approx(2.5));
  CHECK(cfg.get_int_list("n_grid") == std::vector<long long>{10, 20});
}

TEST_CASE("missing keys and defaults") {
  const ConfigMap cfg = ConfigMap::from_toml("a = 1\n");
  CHECK_THROWS_AS(cfg.get_int("b"), ConfigError);
  CHECK(cfg.get_int_or("b", 7) == 7);
  CHECK(cfg.get_string_or("s", "d") == "d");
}

TEST_CASE("fit config loader applies defaults and validates") {
  const ConfigMap cfg = ConfigMap::from_toml("[fit]\nk = 3\nlambda = 0.5\n");
  const FitConfig fc = load_fit_config(cfg);
  CHECK(fc.k == 3);
  CHECK(fc.lambda == doctest::Approx(0.5));
  CHECK(fc.c_prime == doctest::Approx(1.5));
  CHECK(fc.c3_prime == doctest::Approx(0.9));
  CHECK(fc.max_iters == 2000);

  const ConfigMap bad = ConfigMap::from_toml("[fit]\nc3_prime = 1.5\n");
  CHECK_THROWS_AS(load_fit_config(bad), ConfigError);
}

TEST_CASE("sim design loader") {
  const ConfigMap cfg =
      ConfigMap::from_toml("[sim]\nn = 50\nm = 100\nk = 2\nbeta_star = -1.0\nseed = 9\n");
  const SimDesign d = load_sim_design(cfg);
  CHECK(d.n == 50);
  CHECK(d.m == 100);
  CHECK(d.beta_star == doctest::Approx(-1.0));
  CHECK(d.seed == 9);

  const ConfigMap bad = ConfigMap::from_toml("[sim]\nn = 0\nm = 10\n");
  CHECK_THROWS_AS(load_sim_design(bad), ConfigError);
}

}  // TEST_SUITE
