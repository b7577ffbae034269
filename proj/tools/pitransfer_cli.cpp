#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pitransfer/dimension.hpp"
#include "pitransfer/experiments.hpp"

namespace fs = std::filesystem;
using namespace pitransfer;
namespace ex = pitransfer::experiments;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

/// Flat `key = value` file with optional `[section]` headers. Keys are global
/// regardless of section, except that `[vehicles]` lines are vehicle specs.
struct ConfigFile {
  std::map<std::string, std::string> values;
  std::string vehicle_lines;

  static ConfigFile read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    ConfigFile cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw UsageError(path.string() + ":" + std::to_string(lineno) + ": bad section header");
        section = trim(std::string_view(t).substr(1, t.size() - 2));
        continue;
      }
      if (section == "vehicles") {
        cfg.vehicle_lines += t + "\n";
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
      cfg.values[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }
    return cfg;
  }
};

struct RunConfig {
  std::string source = "kinematic";
  std::string scheme = "pi";
  std::uint64_t seed = 42;
  std::string out;
  std::string data = "data";
  std::string vehicles_file;
  std::string vehicles_filter;
  int rounds = gbt::GbtConfig{}.n_rounds;
  int depth = gbt::GbtConfig{}.max_depth;
  double lr = gbt::GbtConfig{}.learning_rate;
  int min_leaf = gbt::GbtConfig{}.min_samples_leaf;
  double subsample = gbt::GbtConfig{}.subsample;
  int threads = 1;
  double train_fraction = 0.8;
  std::string fractions = "0.05,0.1,0.2,0.4,0.8,1.0";
  int repeats = 5;
  std::string target = "large";
  std::string output = "Y";
  std::string vehicle = "large";
  bool generate = false;
  std::string config_file;
  std::string vehicle_lines;
};

/// Option whose default shows up in --help.
template <class T>
CLI::Option* opt(CLI::App* cmd, const std::string& name, T& target, const std::string& help) {
  return cmd->add_option(name, target, help)->capture_default_str();
}

template <class T>
void apply_file_value(const ConfigFile& file, const std::string& key, CLI::App* cmd, T& target) {
  auto it = file.values.find(key);
  if (it == file.values.end()) return;
  const CLI::Option* o = cmd->get_option_no_throw("--" + key);
  if (o && o->count() > 0) return;
  std::stringstream ss(it->second);
  if constexpr (std::is_same_v<T, std::string>) {
    target = it->second;
  } else if constexpr (std::is_same_v<T, bool>) {
    target = it->second == "true" || it->second == "1" || it->second == "yes";
  } else {
    ss >> target;
    if (!ss || !(ss >> std::ws).eof()) throw UsageError("config key '" + key + "' has bad value '" + it->second + "'");
  }
}

void apply_config_file(RunConfig& cfg, CLI::App* cmd) {
  if (cfg.config_file.empty()) return;
  const ConfigFile file = ConfigFile::read(cfg.config_file);
  static const std::vector<std::string> known = {
      "source", "scheme", "seed", "out", "data", "vehicles", "rounds", "depth", "lr", "min-leaf",
      "subsample", "threads", "train-fraction", "fractions", "repeats", "target", "output", "vehicle", "gen", "only"};
  for (const auto& [k, v] : file.values)
    if (std::find(known.begin(), known.end(), k) == known.end()) throw UsageError("unknown config key '" + k + "'");
  apply_file_value(file, "source", cmd, cfg.source);
  apply_file_value(file, "scheme", cmd, cfg.scheme);
  apply_file_value(file, "seed", cmd, cfg.seed);
  apply_file_value(file, "out", cmd, cfg.out);
  apply_file_value(file, "data", cmd, cfg.data);
  apply_file_value(file, "vehicles", cmd, cfg.vehicles_file);
  apply_file_value(file, "only", cmd, cfg.vehicles_filter);
  apply_file_value(file, "rounds", cmd, cfg.rounds);
  apply_file_value(file, "depth", cmd, cfg.depth);
  apply_file_value(file, "lr", cmd, cfg.lr);
  apply_file_value(file, "min-leaf", cmd, cfg.min_leaf);
  apply_file_value(file, "subsample", cmd, cfg.subsample);
  apply_file_value(file, "threads", cmd, cfg.threads);
  apply_file_value(file, "train-fraction", cmd, cfg.train_fraction);
  apply_file_value(file, "fractions", cmd, cfg.fractions);
  apply_file_value(file, "repeats", cmd, cfg.repeats);
  apply_file_value(file, "target", cmd, cfg.target);
  apply_file_value(file, "output", cmd, cfg.output);
  apply_file_value(file, "vehicle", cmd, cfg.vehicle);
  apply_file_value(file, "gen", cmd, cfg.generate);
  cfg.vehicle_lines = file.vehicle_lines;
}

VehicleRegistry registry_of(const RunConfig& cfg) {
  VehicleRegistry reg = VehicleRegistry::defaults();
  if (!cfg.vehicles_file.empty()) {
    std::ifstream in(cfg.vehicles_file);
    if (!in) throw UsageError("cannot open vehicles file " + cfg.vehicles_file);
    std::stringstream ss;
    ss << in.rdbuf();
    reg = VehicleRegistry::parse(ss.str());
  } else if (!cfg.vehicle_lines.empty()) {
    reg = VehicleRegistry::parse(cfg.vehicle_lines);
  }
  if (cfg.vehicles_filter.empty()) return reg;
  std::vector<VehicleSpec> chosen;
  for (const auto& name : split_list(cfg.vehicles_filter)) chosen.push_back(reg.at(name));
  return VehicleRegistry(std::move(chosen));
}

ex::ExperimentOptions experiment_options(const RunConfig& cfg) {
  ex::ExperimentOptions o;
  o.gbt.n_rounds = cfg.rounds;
  o.gbt.max_depth = cfg.depth;
  o.gbt.learning_rate = cfg.lr;
  o.gbt.min_samples_leaf = cfg.min_leaf;
  o.gbt.subsample = cfg.subsample;
  o.gbt.n_threads = cfg.threads;
  o.gbt.seed = cfg.seed;
  try {
    o.gbt.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  o.train_fraction = cfg.train_fraction;
  o.seed = cfg.seed;
  return o;
}

void validate(const RunConfig& cfg) {
  try {
    parse_source(cfg.source);
    parse_scheme(cfg.scheme);
    ex::parse_output(cfg.output);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (cfg.repeats < 1) throw UsageError("--repeats must be at least 1");
}

fs::path dataset_path(const RunConfig& cfg, const std::string& vehicle) {
  return fs::path(cfg.data) / cfg.source / (vehicle + ".csv");
}

Dataset generate(const VehicleSpec& v, SourceKind source, std::uint64_t seed) {
  return source == SourceKind::kinematic ? kinematic_grid(v) : surrogate_grid(v, seed);
}

/// Loads each vehicle's dataset, generating and saving it first with --gen.
std::vector<Dataset> obtain_datasets(const RunConfig& cfg) {
  const SourceKind source = parse_source(cfg.source);
  std::vector<Dataset> out;
  const VehicleRegistry registry = registry_of(cfg);
  for (const auto& v : registry.vehicles()) {
    const fs::path path = dataset_path(cfg, v.name);
    if (cfg.generate) {
      out.push_back(generate(v, source, cfg.seed));
      save_dataset(out.back(), path);
    } else {
      if (!fs::exists(path))
        throw std::runtime_error("missing dataset " + path.string() + " (run `gen` first or pass --gen)");
      out.push_back(load_dataset(path));
      if (out.back().source != source)
        throw std::runtime_error(path.string() + " holds " + std::string(to_string(out.back().source)) + " data");
    }
  }
  return out;
}

fs::path report_root(const RunConfig& cfg) { return cfg.out.empty() ? fs::path("reports") : fs::path(cfg.out); }

void print_written(const std::vector<fs::path>& files) {
  for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
}

int cmd_gen(const RunConfig& cfg) {
  const SourceKind source = parse_source(cfg.source);
  RunConfig c = cfg;
  if (!cfg.out.empty()) c.data = cfg.out;
  const VehicleRegistry registry = registry_of(c);
  for (const auto& v : registry.vehicles()) {
    const Dataset d = generate(v, source, c.seed);
    const fs::path path = dataset_path(c, v.name);
    save_dataset(d, path);
    std::cout << v.name << ": " << d.size() << " records -> " << path.string() << "\n";
  }
  return 0;
}

int cmd_pi(const std::string& set, const std::string& vars_file, const std::string& repeated) {
  std::vector<VariableDecl> vars;
  if (!vars_file.empty()) {
    std::ifstream in(vars_file);
    if (!in) throw UsageError("cannot open variables file " + vars_file);
    std::stringstream ss;
    ss << in.rdbuf();
    vars = parse_variable_decls(ss.str());
  } else if (set == "kinematic") {
    vars = kinematic_variables();
  } else if (set == "dynamic") {
    vars = dynamic_variables();
  } else {
    throw UsageError("--set must be kinematic or dynamic (or pass --vars FILE)");
  }
  const DimensionMatrix m = build_dimension_matrix(vars);
  const auto rep = split_list(repeated);
  const PiBasis basis = rep.empty() ? nullspace_pi_basis(m) : repeated_vars_pi_basis(m, rep);
  std::cout << "variables N = " << m.cols() << ", rank P = " << m.rank() << ", groups N - P = "
            << m.cols() - m.rank() << "\n";
  std::cout << (rep.empty() ? "method: nullspace\n" : "method: repeated variables {" + repeated + "}\n");
  for (std::size_t g = 0; g < basis.size(); ++g)
    std::cout << basis.groups()[g].name << " = " << basis.monomial(g) << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const auto datasets = obtain_datasets(cfg);
  const Scheme scheme = parse_scheme(cfg.scheme);
  const auto opts = experiment_options(cfg);
  const Dataset* data = nullptr;
  for (const auto& d : datasets)
    if (d.records.front().vehicle.name == cfg.vehicle) data = &d;
  if (!data) throw UsageError("no dataset for vehicle '" + cfg.vehicle + "'");
  auto [train, test] = split(*data, opts.train_fraction, ex::split_seed(opts.seed, cfg.vehicle));
  Pipeline pipeline(scheme, data->source, opts.pipeline);
  pipeline.fit(train.records);
  const auto models = gbt::fit_multi(pipeline.inputs(train.records), pipeline.targets(train.records), opts.gbt);
  const fs::path dir = (cfg.out.empty() ? fs::path("models") : fs::path(cfg.out)) / cfg.source / cfg.scheme;
  fs::create_directories(dir);
  for (int k = 0; k < 3; ++k) {
    const fs::path path = dir / (cfg.vehicle + "." + std::string(ex::output_name(k)) + ".gbt");
    std::ofstream out(path);
    models[static_cast<std::size_t>(k)].save(out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
    std::cout << "wrote " << path.string() << "\n";
  }
  std::vector<FinalPose> predicted;
  const auto x = pipeline.inputs(test.records);
  std::array<std::vector<double>, 3> cols;
  for (std::size_t k = 0; k < 3; ++k) cols[k] = models[k].predict(x);
  std::vector<FinalPose> actual;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::array<double, 3> p{cols[0][i], cols[1][i], cols[2][i]};
    predicted.push_back(pipeline.inverse_targets(p, test.records[i]));
    actual.push_back(test.records[i].outcome);
  }
  const ex::Mae m = ex::mae(actual, predicted);
  std::cout << "test MAE X " << format_double(m.x) << " Y " << format_double(m.y) << " theta "
            << format_double(m.theta) << "\n";
  return 0;
}

int cmd_matrix(const RunConfig& cfg) {
  const auto datasets = obtain_datasets(cfg);
  const Scheme scheme = parse_scheme(cfg.scheme);
  const auto report = ex::run_matrix(datasets, scheme, experiment_options(cfg));
  if (auto leaks = ex::audit_leakage(report); !leaks.empty()) {
    for (const auto& l : leaks) std::cerr << "leakage: " << l << "\n";
    throw std::runtime_error("leakage audit failed");
  }
  print_written(ex::emit_report(report, report_root(cfg) / cfg.source / cfg.scheme));
  std::cout << ex::matrix_markdown(report);
  return 0;
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    try {
      out.push_back(parse_double(item));
    } catch (const std::invalid_argument&) {
      throw UsageError("bad fraction '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--fractions is empty");
  return out;
}

int cmd_curve(const RunConfig& cfg) {
  RunConfig c = cfg;
  const auto datasets = obtain_datasets(c);
  const Dataset* data = nullptr;
  for (const auto& d : datasets)
    if (d.records.front().vehicle.name == cfg.vehicle) data = &d;
  if (!data) throw UsageError("no dataset for vehicle '" + cfg.vehicle + "'");
  const auto fractions = parse_fractions(cfg.fractions);
  const auto curve =
      ex::learning_curve(*data, parse_scheme(cfg.scheme), fractions, cfg.repeats, experiment_options(cfg));
  const fs::path csv = report_root(cfg) / cfg.source / cfg.scheme / "curves" / (cfg.vehicle + ".csv");
  print_written(ex::emit_report(curve, csv));
  std::cout << ex::curve_markdown(curve);
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  const auto datasets = obtain_datasets(cfg);
  const auto report = ex::comparative_study(datasets, cfg.target, ex::parse_output(cfg.output), experiment_options(cfg));
  print_written(ex::emit_report(report, report_root(cfg) / cfg.source));
  std::cout << ex::comparative_markdown(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dimensionless transfer learning for braking maneuvers of car-like vehicles"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* cmd) {
    opt(cmd, "--config", cfg.config_file, "Config file of key = value lines with optional [sections]");
    opt(cmd, "--source", cfg.source, "Data source: kinematic | surrogate")
        ->check(CLI::IsMember({"kinematic", "surrogate"}));
    opt(cmd, "--seed", cfg.seed, "Seed for surrogate noise, splits and learner");
    opt(cmd, "--vehicles", cfg.vehicles_file, "Vehicle list file (lines: name, l, Nf, Nr)");
    opt(cmd, "--only", cfg.vehicles_filter, "Comma-separated subset of registered vehicles");
  };
  auto add_data = [&](CLI::App* cmd) {
    opt(cmd, "--data", cfg.data, "Dataset directory (<data>/<source>/<vehicle>.csv)");
    cmd->add_flag("--gen", cfg.generate, "Generate (and save) datasets instead of loading them");
  };
  auto add_learner = [&](CLI::App* cmd) {
    opt(cmd, "--scheme", cfg.scheme, "Preprocessing: baseline | normalized | pca2 | pca3 | augmented | pi | pi-aug | pi-fillers");
    opt(cmd, "--rounds", cfg.rounds, "Boosting rounds");
    opt(cmd, "--depth", cfg.depth, "Maximum tree depth");
    opt(cmd, "--lr", cfg.lr, "Learning rate");
    opt(cmd, "--min-leaf", cfg.min_leaf, "Minimum samples per leaf");
    opt(cmd, "--subsample", cfg.subsample, "Row subsample ratio per round");
    opt(cmd, "--threads", cfg.threads, "Split-search threads (results do not depend on it)");
    opt(cmd, "--train-fraction", cfg.train_fraction, "Train share of each vehicle's dataset");
  };

  auto* gen = app.add_subcommand("gen", "Simulate the input grid for every vehicle and write CSV datasets");
  add_common(gen);
  opt(gen, "--data", cfg.data, "Dataset directory (<data>/<source>/<vehicle>.csv)");
  opt(gen, "--out", cfg.out, "Alias for --data");

  std::string pi_set = "kinematic", pi_vars, pi_repeated;
  auto* pi = app.add_subcommand("pi", "Print a pi-group basis for a variable set");
  opt(pi, "--set", pi_set, "Built-in variable set: kinematic | dynamic");
  opt(pi, "--vars", pi_vars, "Variable declaration file (lines: name = \"M^p L^q T^r\")");
  opt(pi, "--repeated", pi_repeated, "Comma-separated repeated variables; empty = nullspace basis");

  auto* train = app.add_subcommand("train", "Train one vehicle's models and save them as text");
  add_common(train);
  add_data(train);
  add_learner(train);
  opt(train, "--vehicle", cfg.vehicle, "Vehicle to train on");
  opt(train, "--out", cfg.out, "Model directory root (default models)");

  auto* matrix = app.add_subcommand("matrix", "Self / cross / shared MAE matrix");
  add_common(matrix);
  add_data(matrix);
  add_learner(matrix);
  opt(matrix, "--out", cfg.out, "Report root (default reports)");

  auto* curve = app.add_subcommand("curve", "Self-prediction learning curve");
  add_common(curve);
  add_data(curve);
  add_learner(curve);
  opt(curve, "--vehicle", cfg.vehicle, "Vehicle whose self-prediction is measured");
  opt(curve, "--fractions", cfg.fractions, "Comma-separated training fractions in (0, 1]");
  opt(curve, "--repeats", cfg.repeats, "Seeded subsets per fraction");
  opt(curve, "--out", cfg.out, "Report root (default reports)");

  auto* compare = app.add_subcommand("compare", "Every scheme against every training source for one output");
  add_common(compare);
  add_data(compare);
  add_learner(compare);
  opt(compare, "--target", cfg.target, "Target vehicle");
  opt(compare, "--output", cfg.output, "Output: X | Y | theta");
  opt(compare, "--out", cfg.out, "Report root (default reports)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    if (cmd != pi) {
      apply_config_file(cfg, cmd);
      validate(cfg);
    }
    if (cmd == gen) return cmd_gen(cfg);
    if (cmd == pi) return cmd_pi(pi_set, pi_vars, pi_repeated);
    if (cmd == train) return cmd_train(cfg);
    if (cmd == matrix) return cmd_matrix(cfg);
    if (cmd == curve) return cmd_curve(cfg);
    if (cmd == compare) return cmd_compare(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
