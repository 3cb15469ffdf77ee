#include <string>

#include "doctest.h"
#include "kanlab/config.hpp"
#include "kanlab/error.hpp"

using namespace kanlab;

namespace {

const std::string kMinimal = R"([system]
name = ikeda
[data]
n = 500
[model]
shape = 2, 3, 2
[training]
steps = 5
[diagnostics]
orbit = 1000
)";

std::string without(const std::string& text, const std::string& block) {
  const auto start = text.find("[" + block + "]");
  const auto end = text.find('[', start + 1);
  return text.substr(0, start) + (end == std::string::npos ? "" : text.substr(end));
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("minimal file with defaults") {
  const ExperimentConfig cfg = parse_config(kMinimal);
  CHECK(cfg.system.name == "ikeda");
  CHECK(cfg.system.ikeda.mu == 0.9);
  CHECK(cfg.data.n == 500);
  CHECK(cfg.model.shape == std::vector<int>{2, 3, 2});
  CHECK(cfg.model.k == 3);
  CHECK(cfg.model.G == 10);
  CHECK(cfg.training.lambda_entropy == 10.0);
  CHECK(cfg.training.optimizer == Optimizer::adam);
  CHECK(cfg.initial_state() == default_initial_state("ikeda"));
  CHECK(cfg.transient() == 1000.0);
  CHECK(cfg.output_dir == "kanlab-out");
}

TEST_CASE("missing blocks are named") {
  for (const char* block : {"system", "data", "model", "training", "diagnostics"}) {
    const std::string msg = config_error(without(kMinimal, block));
    CHECK(msg.find(std::string("missing [") + block + "] block") != std::string::npos);
  }
}

TEST_CASE("strict parsing") {
  CHECK(config_error(kMinimal + "[extra]\nx = 1\n").find("unknown section") != std::string::npos);
  CHECK(config_error(kMinimal + "[output]\ndirr = x\n").find("unknown key 'dirr'") !=
        std::string::npos);
  CHECK(!config_error("n = 3\n" + kMinimal).empty());
  CHECK(config_error(kMinimal + "[output]\ndir = a\n").empty());
  CHECK(!config_error(without(kMinimal, "system") + "[system]\nname = ikeda\nK = 1\n").empty());
  CHECK(!config_error(without(kMinimal, "system") + "[system]\nname = lorenz\n").empty());
  CHECK(!config_error(without(kMinimal, "data") + "[data]\nn = ten\n").empty());
  CHECK(!config_error(without(kMinimal, "data") + "[data]\nsplit = 1.5\n").empty());
  CHECK(!config_error(without(kMinimal, "model") + "[model]\nshape = 2, 3, 3\n").empty());
  CHECK(!config_error(without(kMinimal, "model") + "[model]\nshape = 2, 3, 2\nk = 9\n").empty());
  CHECK(!config_error(without(kMinimal, "training") + "[training]\noptimizer = sgd\n").empty());
  CHECK(!config_error(without(kMinimal, "diagnostics") + "[diagnostics]\nbins = 5, 5, 5\n").empty());
}

TEST_CASE("comments in either style") {
  const std::string text = "; leading\n# also\n" + kMinimal + "# trailing\n";
  CHECK(parse_config(text).data.n == 500);
}

TEST_CASE("list parsing") {
  CHECK(parse_real_list("1, 2.5,3", "x") == std::vector<double>{1, 2.5, 3});
  CHECK(parse_int_list(" 4 ", "x") == std::vector<int>{4});
  CHECK_THROWS_AS(parse_real_list("", "x"), ConfigError);
  CHECK_THROWS_AS(parse_int_list("1.5", "x"), ConfigError);
  CHECK_THROWS_AS(parse_real_list("1,,2", "x"), ConfigError);
}

TEST_CASE("hash tracks the experiment, not the text") {
  const ExperimentConfig a = parse_config(kMinimal);
  const ExperimentConfig b = parse_config("; comment\n" + kMinimal + "[output]\ndir = elsewhere\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  const ExperimentConfig c = parse_config(without(kMinimal, "data") + "[data]\nn = 501\n");
  CHECK(a.hash() != c.hash());
}

TEST_CASE("bundled configs") {
  for (const char* name : {"ikeda.cfg", "ikeda_wide.cfg", "food_chain.cfg"}) {
    CAPTURE(name);
    const ExperimentConfig cfg = load_config(std::filesystem::path(KANLAB_CONFIG_DIR) / name);
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.model.shape.front() == cfg.make_system().dim());
  }
  CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), ConfigError);
}

}  // TEST_SUITE
