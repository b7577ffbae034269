#include "pitransfer/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace pitransfer::experiments {

std::string_view to_string(CellKind k) {
  switch (k) {
    case CellKind::self: return "self";
    case CellKind::cross: return "cross";
    case CellKind::shared: return "shared";
  }
  return "?";
}

Mae mae(std::span<const FinalPose> actual, std::span<const FinalPose> predicted) {
  if (actual.size() != predicted.size()) throw ExperimentError("MAE inputs differ in length");
  if (actual.empty()) throw ExperimentError("MAE of an empty set");
  Mae m;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    m.x += std::abs(actual[i].X - predicted[i].X);
    m.y += std::abs(actual[i].Y - predicted[i].Y);
    m.theta += std::abs(actual[i].theta - predicted[i].theta);
  }
  const auto n = static_cast<double>(actual.size());
  return {m.x / n, m.y / n, m.theta / n};
}

std::uint64_t split_seed(std::uint64_t seed, std::string_view vehicle) {
  return record_seed(seed, vehicle, 0x591175eedULL);
}

int parse_output(std::string_view text) {
  if (text == "X" || text == "x") return 0;
  if (text == "Y" || text == "y") return 1;
  if (text == "theta" || text == "THETA") return 2;
  throw ExperimentError("unknown output '" + std::string(text) + "' (expected X, Y or theta)");
}

std::string_view output_name(int output) {
  switch (output) {
    case 0: return "X";
    case 1: return "Y";
    case 2: return "theta";
  }
  throw ExperimentError("output index must be 0, 1 or 2");
}

namespace {

struct TrainedModel {
  Pipeline pipeline;
  std::vector<gbt::Ensemble> ensembles;  // one per trained output
  std::vector<int> outputs;
};

TrainedModel train_model(std::span<const ManeuverRecord> records, Scheme scheme, SourceKind source,
                   const ExperimentOptions& opts, std::vector<int> outputs = {0, 1, 2}) {
  TrainedModel m{Pipeline(scheme, source, opts.pipeline), {}, outputs};
  m.pipeline.fit(records);
  const FeatureMatrix x = m.pipeline.inputs(records);
  const FeatureMatrix y = m.pipeline.targets(records);
  if (outputs.size() == 3) {
    auto fitted = gbt::fit_multi(x, y, opts.gbt);
    m.ensembles.assign(fitted.begin(), fitted.end());
  } else {
    for (int out : outputs) {
      gbt::GbtConfig c = opts.gbt;
      c.seed = opts.gbt.seed + static_cast<std::uint64_t>(out);
      m.ensembles.push_back(gbt::fit(x, y.column(static_cast<std::size_t>(out)), c));
    }
  }
  return m;
}

// Physical-unit poses; outputs that were not trained are left at zero.
std::vector<FinalPose> predict_poses(const TrainedModel& m, std::span<const ManeuverRecord> records) {
  const FeatureMatrix x = m.pipeline.inputs(records);
  std::vector<std::vector<double>> per_output;
  for (const auto& e : m.ensembles) per_output.push_back(e.predict(x));
  std::vector<FinalPose> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::array<double, 3> pred{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < m.outputs.size(); ++k) pred[static_cast<std::size_t>(m.outputs[k])] = per_output[k][i];
    out.push_back(m.pipeline.inverse_targets(pred, records[i]));
  }
  return out;
}

std::vector<FinalPose> actual_poses(std::span<const ManeuverRecord> records) {
  std::vector<FinalPose> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.outcome);
  return out;
}

std::vector<RecordKey> keys_of(std::span<const ManeuverRecord> records) {
  std::vector<RecordKey> keys;
  keys.reserve(records.size());
  for (const auto& r : records) keys.push_back(RecordKey::of(r));
  return keys;
}

void check_vehicles(std::span<const Dataset> per_vehicle, SourceKind& source, std::vector<std::string>& names) {
  if (per_vehicle.empty()) throw ExperimentError("no datasets given");
  source = per_vehicle.front().source;
  for (const auto& d : per_vehicle) {
    if (d.empty()) throw ExperimentError("missing dataset: a vehicle has no records");
    if (d.source != source) throw ExperimentError("datasets mix kinematic and surrogate sources");
    const std::string& name = d.records.front().vehicle.name;
    for (const auto& r : d.records)
      if (r.vehicle.name != name) throw ExperimentError("dataset mixes vehicles '" + name + "' and '" + r.vehicle.name + "'");
    if (std::find(names.begin(), names.end(), name) != names.end())
      throw ExperimentError("vehicle '" + name + "' given twice");
    names.push_back(name);
  }
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string config_lines(const ExperimentOptions& o) {
  std::ostringstream s;
  s << "- learner: gradient-boosted trees, rounds " << o.gbt.n_rounds << ", learning rate "
    << format_double(o.gbt.learning_rate) << ", max depth " << o.gbt.max_depth << ", min samples/leaf "
    << o.gbt.min_samples_leaf << ", subsample " << format_double(o.gbt.subsample) << ", seed " << o.gbt.seed
    << "\n";
  s << "- one learner configuration shared by every preprocessing scheme\n";
  s << "- train fraction " << format_double(o.train_fraction) << ", split seed " << o.seed << "\n";
  s << "- pi10 cap " << format_double(o.pipeline.pi10_cap) << "\n";
  return s.str();
}

std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExperimentError("cannot write " + path.string());
  out << text;
  if (!out) throw ExperimentError("write failed for " + path.string());
  return path;
}

}  // namespace

const PredictionCell& ExperimentReport::cell(std::string_view model, std::string_view data) const {
  for (const auto& c : cells)
    if (c.model_vehicle == model && c.data_vehicle == data) return c;
  throw ExperimentError("no cell for model '" + std::string(model) + "' on data '" + std::string(data) + "'");
}

KindSummary summarize(std::span<const PredictionCell> cells) {
  KindSummary s;
  std::array<int, 3> counts{0, 0, 0};
  for (const auto& c : cells) {
    Mae* target = c.kind == CellKind::self ? &s.self : c.kind == CellKind::cross ? &s.cross : &s.shared;
    target->x += c.mae.x;
    target->y += c.mae.y;
    target->theta += c.mae.theta;
    ++counts[static_cast<std::size_t>(c.kind)];
  }
  auto finish = [](Mae& m, int n) {
    if (n == 0) return;
    m.x /= n;
    m.y /= n;
    m.theta /= n;
  };
  finish(s.self, counts[0]);
  finish(s.cross, counts[1]);
  finish(s.shared, counts[2]);
  return s;
}

ExperimentReport run_matrix(std::span<const Dataset> per_vehicle, Scheme scheme, const ExperimentOptions& opts) {
  ExperimentReport report;
  report.scheme = scheme;
  report.options = opts;
  check_vehicles(per_vehicle, report.source, report.vehicles);

  std::vector<Dataset> trains;
  std::vector<Dataset> tests;
  for (std::size_t v = 0; v < per_vehicle.size(); ++v) {
    auto [train, test] = split(per_vehicle[v], opts.train_fraction, split_seed(opts.seed, report.vehicles[v]));
    trains.push_back(std::move(train));
    tests.push_back(std::move(test));
    report.tests.push_back({report.vehicles[v], keys_of(tests.back().records)});
  }
  const Dataset merged = merge(trains);

  std::vector<std::vector<FinalPose>> actual;
  for (const auto& t : tests) actual.push_back(actual_poses(t.records));

  auto score_model = [&](const std::string& model_name, const Dataset& train_set) {
    const TrainedModel model = train_model(train_set.records, scheme, report.source, opts);
    report.models.push_back({model_name, keys_of(train_set.records)});
    for (std::size_t d = 0; d < tests.size(); ++d) {
      const auto predicted = predict_poses(model, tests[d].records);
      CellKind kind = model_name == kMergedModel           ? CellKind::shared
                      : model_name == report.vehicles[d] ? CellKind::self
                                                         : CellKind::cross;
      report.cells.push_back({model_name, report.vehicles[d], mae(actual[d], predicted), kind});
    }
  };
  for (std::size_t v = 0; v < trains.size(); ++v) score_model(report.vehicles[v], trains[v]);
  score_model(std::string(kMergedModel), merged);

  report.summary = summarize(report.cells);
  return report;
}

std::vector<std::string> audit_leakage(const ExperimentReport& report) {
  std::vector<std::string> problems;
  auto find_model = [&](const std::string& name) -> const TrainingProvenance* {
    for (const auto& m : report.models)
      if (m.model == name) return &m;
    return nullptr;
  };
  auto find_test = [&](const std::string& name) -> const TestProvenance* {
    for (const auto& t : report.tests)
      if (t.vehicle == name) return &t;
    return nullptr;
  };
  for (const auto& cell : report.cells) {
    const std::string where = "cell " + cell.model_vehicle + " -> " + cell.data_vehicle;
    const auto* model = find_model(cell.model_vehicle);
    const auto* test = find_test(cell.data_vehicle);
    if (!model || !test) {
      problems.push_back(where + ": missing provenance");
      continue;
    }
    std::set<RecordKey> train_keys(model->train_keys.begin(), model->train_keys.end());
    std::size_t leaked = 0;
    for (const auto& k : test->test_keys) leaked += train_keys.count(k);
    if (leaked) problems.push_back(where + ": " + std::to_string(leaked) + " test records appear in training");

    std::set<std::string> train_vehicles;
    for (const auto& k : model->train_keys) train_vehicles.insert(k.vehicle);
    switch (cell.kind) {
      case CellKind::self:
        if (train_vehicles != std::set<std::string>{cell.data_vehicle})
          problems.push_back(where + ": self cell trained on other vehicles' data");
        break;
      case CellKind::cross:
        if (train_vehicles.count(cell.data_vehicle))
          problems.push_back(where + ": cross cell trained on the test vehicle's data");
        break;
      case CellKind::shared:
        if (train_vehicles != std::set<std::string>(report.vehicles.begin(), report.vehicles.end()))
          problems.push_back(where + ": shared cell does not cover every vehicle");
        break;
    }
  }
  return problems;
}

LearningCurve learning_curve(const Dataset& vehicle_data, Scheme scheme, std::span<const double> fractions,
                             int repeats, const ExperimentOptions& opts) {
  if (repeats < 1) throw ExperimentError("repeats must be at least 1");
  if (vehicle_data.empty()) throw ExperimentError("missing dataset");
  LearningCurve curve;
  curve.scheme = scheme;
  curve.source = vehicle_data.source;
  curve.vehicle = vehicle_data.records.front().vehicle.name;
  curve.repeats = repeats;
  curve.options = opts;

  const auto [train, test] = split(vehicle_data, opts.train_fraction, split_seed(opts.seed, curve.vehicle));
  const auto actual = actual_poses(test.records);
  const std::size_t min_rows = 2 * static_cast<std::size_t>(opts.gbt.min_samples_leaf);

  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const double f = fractions[fi];
    if (!(f > 0.0 && f <= 1.0)) throw ExperimentError("learning-curve fractions must lie in (0, 1]");
    const auto n_rows = static_cast<std::size_t>(std::llround(f * static_cast<double>(train.size())));
    if (n_rows < min_rows || n_rows == 0)
      throw ExperimentError("fraction " + format_double(f) + " leaves " + std::to_string(n_rows) +
                            " training rows; at least " + std::to_string(min_rows) + " are needed");
    Mae total;
    for (int rep = 0; rep < repeats; ++rep) {
      std::vector<ManeuverRecord> subset;
      if (n_rows == train.size()) {
        subset = train.records;
      } else {
        std::vector<std::size_t> idx(train.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 rng(record_seed(opts.seed, curve.vehicle, (fi << 16) + static_cast<std::uint64_t>(rep) + 1));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(n_rows);
        std::sort(idx.begin(), idx.end());
        for (auto i : idx) subset.push_back(train.records[i]);
      }
      const TrainedModel model = train_model(subset, scheme, curve.source, opts);
      const Mae m = mae(actual, predict_poses(model, test.records));
      total.x += m.x;
      total.y += m.y;
      total.theta += m.theta;
    }
    curve.points.push_back({f, n_rows, {total.x / repeats, total.y / repeats, total.theta / repeats}});
  }
  return curve;
}

double ComparativeReport::at(Scheme scheme, std::string_view training_source) const {
  for (const auto& e : entries)
    if (e.scheme == scheme && e.training_source == training_source) return e.mae;
  throw ExperimentError("no comparative entry for " + std::string(pitransfer::to_string(scheme)) + " / " +
                        std::string(training_source));
}

double ComparativeReport::transfer_mae(Scheme scheme) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& src : training_sources) {
    if (src == "own" || src == "merged") continue;
    sum += at(scheme, src);
    ++n;
  }
  if (n == 0) throw ExperimentError("no transfer sources in the comparative study");
  return sum / n;
}

ComparativeReport comparative_study(std::span<const Dataset> per_vehicle, std::string_view target_vehicle,
                                    int output, const ExperimentOptions& opts, std::span<const Scheme> schemes) {
  output_name(output);
  ComparativeReport report;
  report.target_vehicle = target_vehicle;
  report.output = output;
  report.options = opts;
  std::vector<std::string> names;
  check_vehicles(per_vehicle, report.source, names);
  const auto target_it = std::find(names.begin(), names.end(), target_vehicle);
  if (target_it == names.end()) throw ExperimentError("target vehicle '" + std::string(target_vehicle) + "' has no dataset");
  const auto target = static_cast<std::size_t>(target_it - names.begin());

  std::vector<Dataset> trains;
  Dataset test;
  for (std::size_t v = 0; v < per_vehicle.size(); ++v) {
    auto [tr, te] = split(per_vehicle[v], opts.train_fraction, split_seed(opts.seed, names[v]));
    trains.push_back(std::move(tr));
    if (v == target) test = std::move(te);
  }
  std::vector<std::pair<std::string, Dataset>> sources;
  sources.emplace_back("own", trains[target]);
  for (std::size_t v = 0; v < trains.size(); ++v)
    if (v != target) sources.emplace_back(names[v], trains[v]);
  sources.emplace_back("merged", merge(trains));
  for (const auto& s : sources) report.training_sources.push_back(s.first);

  const auto actual = actual_poses(test.records);
  for (Scheme scheme : schemes) {
    for (const auto& [label, train_set] : sources) {
      const TrainedModel model = train_model(train_set.records, scheme, report.source, opts, {output});
      const auto predicted = predict_poses(model, test.records);
      double sum = 0.0;
      for (std::size_t i = 0; i < actual.size(); ++i) {
        const double a = output == 0 ? actual[i].X : output == 1 ? actual[i].Y : actual[i].theta;
        const double p = output == 0 ? predicted[i].X : output == 1 ? predicted[i].Y : predicted[i].theta;
        sum += std::abs(a - p);
      }
      report.entries.push_back({scheme, label, sum / static_cast<double>(actual.size())});
    }
  }
  return report;
}

std::string matrix_csv(const ExperimentReport& r) {
  std::ostringstream s;
  s << "model,data,kind,mae_x,mae_y,mae_theta\n";
  for (const auto& c : r.cells)
    s << c.model_vehicle << ',' << c.data_vehicle << ',' << to_string(c.kind) << ',' << format_double(c.mae.x)
      << ',' << format_double(c.mae.y) << ',' << format_double(c.mae.theta) << '\n';
  const std::pair<const char*, const Mae*> rows[] = {
      {"self", &r.summary.self}, {"cross", &r.summary.cross}, {"shared", &r.summary.shared}};
  for (const auto& [kind, m] : rows)
    s << "summary,mean," << kind << ',' << format_double(m->x) << ',' << format_double(m->y) << ','
      << format_double(m->theta) << '\n';
  return s.str();
}

std::string matrix_markdown(const ExperimentReport& r) {
  std::ostringstream s;
  s << "# MAE matrix: scheme `" << pitransfer::to_string(r.scheme) << "`, source `" << to_string(r.source)
    << "`\n\n";
  s << "X and Y in metres, theta in radians. Bold cells are self-predictions; the " << kMergedModel
    << " row is the shared database.\n\n";
  s << "| Model |";
  for (const auto& v : r.vehicles) s << " Data " << v << " |";
  s << "\n|---|";
  for (std::size_t i = 0; i < r.vehicles.size(); ++i) s << "---|";
  s << '\n';
  std::vector<std::string> models = r.vehicles;
  models.emplace_back(kMergedModel);
  for (const auto& m : models) {
    s << "| " << m << " |";
    for (const auto& d : r.vehicles) {
      const auto& c = r.cell(m, d);
      const std::string text =
          "X: " + fixed4(c.mae.x) + "<br>Y: " + fixed4(c.mae.y) + "<br>theta: " + fixed4(c.mae.theta);
      if (c.kind == CellKind::self)
        s << " **" << "X: " << fixed4(c.mae.x) << "**<br>**Y: " << fixed4(c.mae.y) << "**<br>**theta: "
          << fixed4(c.mae.theta) << "** |";
      else
        s << ' ' << text << " |";
    }
    s << '\n';
  }
  s << "\n## Mean MAE by prediction type\n\n| Type | X | Y | theta |\n|---|---|---|---|\n";
  const std::pair<const char*, const Mae*> rows[] = {
      {"self", &r.summary.self}, {"cross", &r.summary.cross}, {"shared", &r.summary.shared}};
  for (const auto& [kind, m] : rows)
    s << "| " << kind << " | " << fixed4(m->x) << " | " << fixed4(m->y) << " | " << fixed4(m->theta) << " |\n";
  s << "\n## Configuration\n\n" << config_lines(r.options);
  return s.str();
}

std::string curve_csv(const LearningCurve& c) {
  std::ostringstream s;
  s << "fraction,mae_x,mae_y,mae_theta\n";
  for (const auto& p : c.points)
    s << format_double(p.fraction) << ',' << format_double(p.mae.x) << ',' << format_double(p.mae.y) << ','
      << format_double(p.mae.theta) << '\n';
  return s.str();
}

std::string curve_markdown(const LearningCurve& c) {
  std::ostringstream s;
  s << "# Learning curve: scheme `" << pitransfer::to_string(c.scheme) << "`, source `" << to_string(c.source)
    << "`, vehicle `" << c.vehicle << "`\n\n";
  s << "Self-prediction MAE, mean of " << c.repeats << " seeded training subsets per fraction.\n\n";
  s << "| Fraction | Train rows | X | Y | theta |\n|---|---|---|---|---|\n";
  for (const auto& p : c.points)
    s << "| " << format_double(p.fraction) << " | " << p.train_rows << " | " << fixed4(p.mae.x) << " | "
      << fixed4(p.mae.y) << " | " << fixed4(p.mae.theta) << " |\n";
  s << "\n## Configuration\n\n" << config_lines(c.options);
  return s.str();
}

std::string comparative_csv(const ComparativeReport& r) {
  std::ostringstream s;
  s << "scheme";
  for (const auto& src : r.training_sources) s << ",mae_" << src;
  s << '\n';
  std::vector<Scheme> seen;
  for (const auto& e : r.entries)
    if (std::find(seen.begin(), seen.end(), e.scheme) == seen.end()) seen.push_back(e.scheme);
  for (Scheme scheme : seen) {
    s << pitransfer::to_string(scheme);
    for (const auto& src : r.training_sources) s << ',' << format_double(r.at(scheme, src));
    s << '\n';
  }
  return s.str();
}

std::string comparative_markdown(const ComparativeReport& r) {
  std::ostringstream s;
  s << "# Preprocessing comparison: " << output_name(r.output) << " of vehicle `" << r.target_vehicle
    << "`, source `" << to_string(r.source) << "`\n\n";
  s << "MAE on the target vehicle's test split by training source. Sources other than `own` and `merged` are "
       "transfer tasks.\n\n| Scheme |";
  for (const auto& src : r.training_sources) s << ' ' << src << " |";
  s << "\n|---|";
  for (std::size_t i = 0; i < r.training_sources.size(); ++i) s << "---|";
  s << '\n';
  std::vector<Scheme> seen;
  for (const auto& e : r.entries)
    if (std::find(seen.begin(), seen.end(), e.scheme) == seen.end()) seen.push_back(e.scheme);
  for (Scheme scheme : seen) {
    s << "| " << pitransfer::to_string(scheme) << " |";
    for (const auto& src : r.training_sources) s << ' ' << fixed4(r.at(scheme, src)) << " |";
    s << '\n';
  }
  s << "\n## Configuration\n\n" << config_lines(r.options);
  return s.str();
}

std::vector<std::filesystem::path> emit_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  return {write_text(dir / "matrix.csv", matrix_csv(r)), write_text(dir / "matrix.md", matrix_markdown(r))};
}

std::vector<std::filesystem::path> emit_report(const LearningCurve& c, const std::filesystem::path& csv_path) {
  auto md = csv_path;
  md.replace_extension(".md");
  return {write_text(csv_path, curve_csv(c)), write_text(md, curve_markdown(c))};
}

std::vector<std::filesystem::path> emit_report(const ComparativeReport& r, const std::filesystem::path& dir) {
  return {write_text(dir / "comparative.csv", comparative_csv(r)),
          write_text(dir / "comparative.md", comparative_markdown(r))};
}

}  // namespace pitransfer::experiments
