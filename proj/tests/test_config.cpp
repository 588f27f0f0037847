#include "advreg/config.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace advreg;

namespace {

ExperimentConfig parse(const std::string& text, const std::string& base = "") {
  std::istringstream in(text);
  return parse_config(in, "test.toml", base);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("full config") {
  const ExperimentConfig cfg = parse(R"(
name = "wine"   # trailing comment
jobs = 4

[dataset]
path = "/data/wine.csv"
label_column = "quality"
exclude_columns = ["id", "No"]

[split]
ratio = 0.75

[grid]
m = [1, 2, 3]
delta = [0.9, 0.95]
seeds = [0, 7]

[attack]
fraction = 0.2

[model]
ridge = 50
nu = 0.3
bs_proximal = 2.5
bs_max_iter = 100

[solver]
eps = 1e-8
max_iter = 200
refine_steps = 0
)");
  CHECK(cfg.name == "wine");
  CHECK(cfg.jobs == 4);
  CHECK(cfg.dataset_path == "/data/wine.csv");
  CHECK(cfg.schema.label_column == "quality");
  CHECK(cfg.schema.exclude_columns == std::vector<std::string>{"id", "No"});
  CHECK(cfg.split_ratio == 0.75);
  CHECK(cfg.m_grid == std::vector<std::size_t>{1, 2, 3});
  CHECK(cfg.delta_grid == std::vector<double>{0.9, 0.95});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 7});
  CHECK(cfg.attacked_fraction == 0.2);
  REQUIRE(cfg.ridge.has_value());
  CHECK(*cfg.ridge == 50.0);
  REQUIRE(cfg.nu.has_value());
  CHECK(*cfg.nu == 0.3);
  CHECK(cfg.bs.proximal == 2.5);
  CHECK(cfg.bs.max_iter == 100);
  CHECK(cfg.solver.eps == 1e-8);
  CHECK(cfg.solver.max_iter == 200);
  CHECK(cfg.solver.refine_steps == 0);
}

TEST_CASE("defaults survive an empty file") {
  const ExperimentConfig cfg = parse("");
  const ExperimentConfig def;
  CHECK(cfg.m_grid == def.m_grid);
  CHECK(cfg.delta_grid == def.delta_grid);
  CHECK(cfg.solver.kappa == 0.8);
  CHECK(cfg.hash() == def.hash());
}

TEST_CASE("ridge switch") {
  CHECK_FALSE(parse("[model]\nridge_enabled = false\n").ridge.has_value());
  CHECK(*parse("[model]\nridge_enabled = true\n").ridge == 100.0);
}

TEST_CASE("config errors") {
  CHECK(error_of("[grid]\nbogus = 1\n").find("unknown key 'grid.bogus'") != std::string::npos);
  CHECK(error_of("[nope]\n").find("unknown section") != std::string::npos);
  CHECK(error_of("[split]\nratio = \"half\"\n").find("must be a number") != std::string::npos);
  CHECK(error_of("[split]\nratio = 0.8x\n").find("test.toml:2") != std::string::npos);
  CHECK(error_of("[grid]\nm = [0, 1]\n").find("positive integers") != std::string::npos);
  CHECK(error_of("[grid\n").find("malformed") != std::string::npos);
  CHECK(error_of("jobs\n").find("key = value") != std::string::npos);
  // Range checks come from validation and are reported as config errors.
  CHECK_FALSE(error_of("[split]\nratio = 1.5\n").empty());
  CHECK_FALSE(error_of("[grid]\ndelta = [1.5]\n").empty());
  CHECK_THROWS_AS(load_config("/no/such/config.toml"), ConfigError);
}

TEST_CASE("command-line overrides") {
  ExperimentConfig cfg = parse("[solver]\neps = 1e-6\n");
  apply_setting(cfg, "solver.eps=1e-9");
  CHECK(cfg.solver.eps == 1e-9);
  apply_setting(cfg, "grid.m=2,5");
  CHECK(cfg.m_grid == std::vector<std::size_t>{2, 5});
  apply_setting(cfg, "grid.seeds=3");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3});
  apply_setting(cfg, "grid.delta=[0.9]");
  CHECK(cfg.delta_grid == std::vector<double>{0.9});
  apply_setting(cfg, "dataset.label_column=quality");
  CHECK(cfg.schema.label_column == "quality");
  apply_setting(cfg, "model.ridge_enabled=false");
  CHECK_FALSE(cfg.ridge.has_value());
  CHECK_THROWS_AS(apply_setting(cfg, "solver.bogus=1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "solver.eps"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "solver.max_iter=fast"), ConfigError);

  CHECK(parse_number_list("1, 2,5") == std::vector<double>{1, 2, 5});
  CHECK_THROWS_AS(parse_number_list("1,x"), ConfigError);
}

TEST_CASE("relative dataset paths follow the config file") {
  const auto dir = std::filesystem::temp_directory_path() / "advreg_config_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "exp.toml";
  {
    std::ofstream out(file);
    out << "[dataset]\npath = \"data/set.csv\"\nlabel_column = \"y\"\n";
  }
  const ExperimentConfig cfg = load_config(file.string());
  CHECK(cfg.dataset_path == (dir / "data" / "set.csv").string());
  CHECK(parse("[dataset]\npath = \"/abs/set.csv\"\n", dir.string()).dataset_path == "/abs/set.csv");
  std::filesystem::remove_all(dir);
}

TEST_CASE("hash tracks result-affecting settings only") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.jobs = 8;
  CHECK(a.hash() == b.hash());
  b.solver.eps = 1e-9;
  CHECK(a.hash() != b.hash());
  CHECK(a.hash().size() == 16);
}
