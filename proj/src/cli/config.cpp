#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "gnlab/cli.hpp"

namespace gnlab::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"generator", {"width", "depth", "activation", "latent_dim", "tanh_output"}},
      {"discriminator", {"width", "depth", "activation", "softplus_beta"}},
      {"train",
       {"batch_size", "n_dis", "steps", "lr_g", "lr_d", "beta1", "beta2", "lr_decay", "seed", "ema_decay", "loss",
        "lipschitz_every", "lipschitz_samples"}},
      {"data", {"real", "fake", "idx"}},
      {"constraint", {"mode", "lambda", "clip", "power_iters"}},
      {"analysis",
       {"surface_range", "surface_resolution", "surface_steps", "samples", "prefix_pairs", "audit_nets",
        "audit_inputs", "gradcheck_samples", "gradcheck_threshold"}},
  };
  return keys;
}

using Entry = RawConfig::Entry;

std::size_t to_size(const Entry& e) {
  std::size_t v = 0;
  const char* end = e.value.data() + e.value.size();
  const auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected a non-negative integer, got '" + e.value + "'", e.line);
  return v;
}

std::uint64_t to_u64(const Entry& e) {
  std::uint64_t v = 0;
  const char* end = e.value.data() + e.value.size();
  const auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected an unsigned integer, got '" + e.value + "'", e.line);
  return v;
}

double to_double(const std::string& text, std::size_t line) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected a number, got '" + text + "'", line);
  return v;
}

double to_double(const Entry& e) { return to_double(e.value, e.line); }

bool to_bool(const Entry& e) {
  if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "no" || e.value == "0") return false;
  throw ConfigError("expected true/false, got '" + e.value + "'", e.line);
}

std::vector<double> to_numbers(const std::string& text, std::size_t line) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(to_double(tok, line));
  return out;
}

template <typename F>
auto wrap(const Entry& e, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what(), e.line);
  }
}

}  // namespace

RawConfig parse_raw_config(std::istream& in) {
  RawConfig raw;
  std::string line;
  std::string section;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", number);
      section = trim(line.substr(1, line.size() - 2));
      if (!known_keys().count(section)) throw ConfigError("unknown section [" + section + "]", number);
      raw.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", number);
    if (section.empty()) throw ConfigError("key outside of any section", number);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", number);
    if (!known_keys().at(section).count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]", number);
    if (value.empty()) throw ConfigError("empty value for '" + key + "'", number);
    auto& entries = raw.sections[section];
    if (entries.count(key)) throw ConfigError("duplicate key '" + key + "'", number);
    entries[key] = {value, number};
  }
  return raw;
}

data::Mixture2D parse_mixture(const std::string& text) {
  std::vector<data::Gaussian2D> comps;
  std::vector<double> weights;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, '|')) {
    const std::vector<double> v = to_numbers(part, 0);
    if (v.size() != 6) throw ContractError("mixture component needs 'w mx my sxx sxy syy', got '" + trim(part) + "'");
    data::Gaussian2D g;
    g.mean[0] = v[1];
    g.mean[1] = v[2];
    g.cov[0][0] = v[3];
    g.cov[0][1] = g.cov[1][0] = v[4];
    g.cov[1][1] = v[5];
    weights.push_back(v[0]);
    comps.push_back(g);
  }
  return data::Mixture2D(std::move(comps), std::move(weights));
}

Config build_config(const RawConfig& raw) {
  Config cfg;
  auto section = [&](const char* name) -> const std::map<std::string, Entry>* {
    const auto it = raw.sections.find(name);
    return it == raw.sections.end() ? nullptr : &it->second;
  };
  auto each = [&](const char* name, auto&& fn) {
    if (const auto* s = section(name)) {
      for (const auto& [key, entry] : *s) wrap(entry, [&] { fn(key, entry); });
    }
  };

  auto mlp_key = [](MlpConfig& m, const std::string& key, const Entry& e) {
    if (key == "width") m.width = to_size(e);
    else if (key == "depth") m.depth = to_size(e);
    else if (key == "activation") m.activation.kind = nn::parse_activation(e.value);
    else if (key == "softplus_beta") m.activation.beta = to_double(e);
  };
  each("generator", [&](const std::string& key, const Entry& e) {
    if (key == "latent_dim") cfg.train.latent_dim = to_size(e);
    else if (key == "tanh_output") cfg.train.generator_tanh = to_bool(e);
    else mlp_key(cfg.generator, key, e);
  });
  each("discriminator", [&](const std::string& key, const Entry& e) { mlp_key(cfg.discriminator, key, e); });

  bool lr_d_set = false;
  each("train", [&](const std::string& key, const Entry& e) {
    auto& t = cfg.train;
    if (key == "batch_size") t.batch_size = to_size(e);
    else if (key == "n_dis") t.n_dis = to_size(e);
    else if (key == "steps") t.steps = to_size(e);
    else if (key == "lr_g") t.lr_g = to_double(e);
    else if (key == "lr_d") {
      t.lr_d = to_double(e);
      lr_d_set = true;
    }
    else if (key == "beta1") t.adam.beta1 = to_double(e);
    else if (key == "beta2") t.adam.beta2 = to_double(e);
    else if (key == "lr_decay") t.lr_decay = to_bool(e);
    else if (key == "seed") t.seed = to_u64(e);
    else if (key == "ema_decay") t.ema_decay = e.value == "none" ? std::nullopt : std::optional<double>(to_double(e));
    else if (key == "loss") t.loss = gan::parse_loss(e.value);
    else if (key == "lipschitz_every") t.lipschitz_every = to_size(e);
    else if (key == "lipschitz_samples") t.lipschitz_samples = to_size(e);
  });
  if (!lr_d_set) cfg.train.lr_d = 2.0 * cfg.train.lr_g;

  each("data", [&](const std::string& key, const Entry& e) {
    if (key == "real") cfg.data.real = parse_mixture(e.value);
    else if (key == "fake") cfg.data.fake = parse_mixture(e.value);
    else if (key == "idx") cfg.data.idx_path = e.value;
  });
  if (cfg.data.real && cfg.data.idx_path) {
    const std::size_t line = section("data")->at("idx").line;
    throw ConfigError("[data] takes either 'real' or 'idx', not both", line);
  }

  // mode first so lambda / clip / power_iters refine the chosen variant
  if (const auto* s = section("constraint"); s && s->count("mode")) {
    const Entry& e = s->at("mode");
    cfg.constraint = wrap(e, [&] { return constraint::parse_mode(e.value); });
  }
  each("constraint", [&](const std::string& key, const Entry& e) {
    if (key == "lambda") {
      auto* gp = std::get_if<constraint::Gp>(&cfg.constraint);
      if (!gp) throw ConfigError("'lambda' only applies to gradient-penalty modes", e.line);
      gp->lambda = to_double(e);
    } else if (key == "clip") {
      auto* c = std::get_if<constraint::Clip>(&cfg.constraint);
      if (!c) throw ConfigError("'clip' only applies to mode = clip", e.line);
      c->c = to_double(e);
    } else if (key == "power_iters") {
      auto* sn = std::get_if<constraint::Sn>(&cfg.constraint);
      if (!sn) throw ConfigError("'power_iters' only applies to mode = sn", e.line);
      sn->power_iters = static_cast<int>(to_size(e));
    }
    if (key != "mode") constraint::validate(cfg.constraint);
  });

  each("analysis", [&](const std::string& key, const Entry& e) {
    auto& a = cfg.analysis;
    if (key == "surface_range") {
      const auto v = to_numbers(e.value, e.line);
      if (v.size() != 4) throw ConfigError("surface_range needs 'x_min x_max y_min y_max'", e.line);
      a.surface_x_min = v[0];
      a.surface_x_max = v[1];
      a.surface_y_min = v[2];
      a.surface_y_max = v[3];
    } else if (key == "surface_resolution") a.surface_resolution = to_size(e);
    else if (key == "surface_steps") a.surface_steps = to_size(e);
    else if (key == "samples") a.lipschitz_samples = to_size(e);
    else if (key == "prefix_pairs") a.prefix_pairs = to_size(e);
    else if (key == "audit_nets") a.audit_nets = to_size(e);
    else if (key == "audit_inputs") a.audit_inputs = to_size(e);
    else if (key == "gradcheck_samples") a.gradcheck_samples = to_size(e);
    else if (key == "gradcheck_threshold") a.gradcheck_threshold = to_double(e);
  });
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0);
  return build_config(parse_raw_config(in));
}

nn::NetworkSpec generator_spec(const Config& cfg, std::size_t data_dim) {
  return nn::NetworkSpec::mlp(cfg.train.latent_dim, cfg.generator.width, cfg.generator.depth, data_dim,
                              cfg.generator.activation);
}

nn::NetworkSpec discriminator_spec(const Config& cfg, std::size_t data_dim) {
  return nn::NetworkSpec::mlp(data_dim, cfg.discriminator.width, cfg.discriminator.depth, 1,
                              cfg.discriminator.activation);
}

}  // namespace gnlab::cli
