#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnlab/constraint.hpp"
#include "gnlab/data.hpp"
#include "gnlab/gan.hpp"
#include "gnlab/nn.hpp"

namespace gnlab::cli {

/// Bad config file. line() is 1-based; 0 when the problem is a missing key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + what : "config: " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// `[section]` headers and `key = value` lines; '#' starts a comment.
struct RawConfig {
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  std::map<std::string, std::map<std::string, Entry>> sections;
};

RawConfig parse_raw_config(std::istream& in);

struct MlpConfig {
  std::size_t width = 64;
  std::size_t depth = 3;
  nn::ActivationLayer activation;
};

struct DataConfig {
  std::optional<data::Mixture2D> real;
  std::optional<data::Mixture2D> fake;
  std::optional<std::filesystem::path> idx_path;
};

struct AnalysisConfig {
  double surface_x_min = -2.0, surface_x_max = 2.0;
  double surface_y_min = -2.0, surface_y_max = 2.0;
  std::size_t surface_resolution = 201;
  std::size_t surface_steps = 2000;
  std::size_t lipschitz_samples = 1024;
  std::size_t prefix_pairs = 10000;
  std::size_t audit_nets = 1000;
  std::size_t audit_inputs = 8;
  std::size_t gradcheck_samples = 8;
  double gradcheck_threshold = 1e-4;
};

struct Config {
  MlpConfig generator;
  MlpConfig discriminator;
  gan::TrainConfig train;
  constraint::ConstraintMode constraint = constraint::Gn{};
  DataConfig data;
  AnalysisConfig analysis;
};

/// Validates keys and values; unknown sections or keys throw ConfigError.
Config build_config(const RawConfig& raw);
Config load_config(const std::filesystem::path& path);

/// Parses `w mx my sxx sxy syy | ...` into a mixture.
data::Mixture2D parse_mixture(const std::string& text);

nn::NetworkSpec generator_spec(const Config& cfg, std::size_t data_dim);
nn::NetworkSpec discriminator_spec(const Config& cfg, std::size_t data_dim);

/// Exit codes: 0 success, 1 failed check or other error, 2 usage/config error,
/// 3 numerical abort.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace gnlab::cli
