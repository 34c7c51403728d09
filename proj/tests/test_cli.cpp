#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gnlab/cli.hpp"

using namespace gnlab;
namespace fs = std::filesystem;

namespace {

const fs::path kFig9 = fs::path(GNLAB_SOURCE_DIR) / "configs" / "fig9.cfg";

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gnlab_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "test.cfg";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kSmall =
    "[generator]\nwidth = 16\ndepth = 2\nlatent_dim = 4\n"
    "[discriminator]\nwidth = 16\ndepth = 2\n"
    "[train]\nsteps = 5\nbatch_size = 16\nn_dis = 2\nlipschitz_every = 0\n"
    "[data]\nreal = 1 -1 0 0.04 0 0.04\nfake = 1 1 0 0.04 0 0.04\n"
    "[constraint]\nmode = gn_abs_f\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
  std::istringstream in("# comment\n[train]\nsteps = 12   # trailing\nloss = wasserstein\n[constraint]\nmode = gp0\nlambda = 5\n");
  const cli::Config cfg = cli::build_config(cli::parse_raw_config(in));
  CHECK(cfg.train.steps == 12);
  CHECK(cfg.train.loss.kind == gan::LossKind::wasserstein);
  CHECK(cfg.train.lr_d == 2.0 * cfg.train.lr_g);
  const auto* gp = std::get_if<constraint::Gp>(&cfg.constraint);
  REQUIRE(gp);
  CHECK(gp->center == 0);
  CHECK(gp->lambda == 5.0);

  const auto m = cli::parse_mixture("0.25 1 2 0.5 0.1 0.4 | 0.75 -1 0 1 0 1");
  CHECK(m.size() == 2);
  CHECK(m.weight(0) == 0.25);
  CHECK(m.component(0).cov[0][1] == 0.1);
}

TEST_CASE("config errors report the line") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      cli::build_config(cli::parse_raw_config(in));
    } catch (const cli::ConfigError& e) {
      CHECK(std::string(e.what()).find("config line") == (e.line() ? 0 : std::string::npos));
      return e.line();
    }
    return 999;
  };
  CHECK(line_of("[train]\nsteps = 1\nbogus = 2\n") == 3);
  CHECK(line_of("[nowhere]\n") == 1);
  CHECK(line_of("[train]\nsteps\n") == 2);
  CHECK(line_of("[train]\nsteps = 1\nsteps = 2\n") == 3);
  CHECK(line_of("[train]\nsteps = \n") == 2);
  CHECK(line_of("[train]\n\nsteps = -4\n") == 3);
  CHECK(line_of("[train]\nloss = nope\n") == 2);
  CHECK(line_of("[constraint]\nmode = sn\nlambda = 3\n") == 3);
  CHECK(line_of("[discriminator]\nactivation = swish\n") == 2);
  CHECK(line_of("steps = 3\n") == 1);
}

TEST_CASE("exit code 2 on bad usage or config") {
  const fs::path dir = scratch("usage");
  CHECK(run({"frobnicate", "--config", kFig9.string()}).code == 2);
  CHECK(run({"train"}).code == 2);
  CHECK(run({"train", "--config", (dir / "missing.cfg").string()}).code == 2);
  const fs::path bad = write_config(dir, "[train]\nsteps = 1\nnot_a_key = 1\n");
  const Run r = run({"train", "--config", bad.string(), "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("config line 3") != std::string::npos);
  CHECK(run({"train", "--config", kFig9.string(), "--constraint", "bogus", "--out", dir.string()}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("exit code 3 on numerical abort") {
  const fs::path dir = scratch("abort");
  const fs::path cfg = write_config(dir, std::string(kSmall) + "[train]\n");
  // re-opening [train] appends to the same section
  std::ofstream(cfg, std::ios::app) << "lr_g = 1e300\nlr_d = 1e300\n";
  const Run r = run({"train", "--config", cfg.string(), "--constraint", "none", "--out", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("step") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("verify passes on the fig9 config") {
  const fs::path dir = scratch("verify");
  const Run r = run({"verify", "--config", kFig9.string(), "--out", dir.string()});
  CHECK_MESSAGE(r.code == 0, (r.out + r.err));
  CHECK(fs::exists(dir / "verify.txt"));
  fs::remove_all(dir);
}

TEST_CASE("train is byte-deterministic and writes checkpoints") {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  const fs::path cfg = write_config(a, kSmall);
  REQUIRE(run({"train", "--config", cfg.string(), "--seed", "7", "--out", (a / "o").string()}).code == 0);
  REQUIRE(run({"train", "--config", cfg.string(), "--seed", "7", "--out", (b / "o").string()}).code == 0);
  CHECK(slurp(a / "o" / "report.csv") == slurp(b / "o" / "report.csv"));
  CHECK(slurp(a / "o" / "discriminator.gnnet") == slurp(b / "o" / "discriminator.gnnet"));
  const auto net = nn::load_network(a / "o" / "generator.gnnet");
  CHECK(net.spec.input_size() == 4);
  REQUIRE(run({"train", "--config", cfg.string(), "--seed", "8", "--out", (b / "o").string()}).code == 0);
  CHECK(slurp(a / "o" / "report.csv") != slurp(b / "o" / "report.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("surface, lipschitz and gradcheck subcommands write their files") {
  const fs::path dir = scratch("outputs");
  const fs::path cfg = write_config(dir, std::string(kSmall) + "[analysis]\nsurface_resolution = 11\nsamples = 64\n");
  CHECK(run({"surface", "--config", cfg.string(), "--steps", "3", "--out", dir.string()}).code == 0);
  CHECK(fs::exists(dir / "surface_empirical.csv"));
  CHECK(fs::exists(dir / "surface_theoretical.pgm"));
  CHECK(run({"lipschitz", "--config", cfg.string(), "--out", dir.string()}).code == 0);
  CHECK(slurp(dir / "lipschitz.csv").rfind("quantity,index,value\n", 0) == 0);
  const Run g = run({"gradcheck", "--config", cfg.string(), "--out", dir.string()});
  CHECK(g.code == 0);
  CHECK(slurp(dir / "gradcheck.txt").find("max_relative_error") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("ablate emits one row per zeta") {
  const fs::path dir = scratch("ablate");
  const fs::path cfg = write_config(dir, kSmall);
  REQUIRE(run({"ablate", "--config", cfg.string(), "--out", dir.string()}).code == 0);
  std::istringstream csv(slurp(dir / "ablate.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<std::string> modes;
  while (std::getline(csv, line)) modes.push_back(line.substr(0, line.find(',')));
  CHECK(modes == std::vector<std::string>{"gn_abs_f", "gn_one", "gn_zero"});
  CHECK(slurp(dir / "ablate.csv").find("gn_abs_f,ok,") != std::string::npos);
  fs::remove_all(dir);
}

}  // TEST_SUITE
