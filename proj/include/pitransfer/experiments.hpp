#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pitransfer/dataset.hpp"
#include "pitransfer/features.hpp"
#include "pitransfer/gbt.hpp"

namespace pitransfer::experiments {

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kMergedModel = "MERGED";

enum class CellKind { self, cross, shared };
std::string_view to_string(CellKind k);

/// Mean absolute error per output, in metres / radians.
struct Mae {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  double mean() const { return (x + y + theta) / 3.0; }
  double component(int output) const { return output == 0 ? x : output == 1 ? y : theta; }
  friend bool operator==(const Mae&, const Mae&) = default;
};

Mae mae(std::span<const FinalPose> actual, std::span<const FinalPose> predicted);

struct ExperimentOptions {
  gbt::GbtConfig gbt;
  double train_fraction = 0.8;
  std::uint64_t seed = 42;  // drives the train/test splits
  PipelineOptions pipeline;
};

/// Split seed of one vehicle's dataset; shared by every study so that the
/// same test records are held out everywhere.
std::uint64_t split_seed(std::uint64_t seed, std::string_view vehicle);

struct PredictionCell {
  std::string model_vehicle;  // vehicle name or MERGED
  std::string data_vehicle;
  Mae mae;
  CellKind kind = CellKind::self;
};

struct KindSummary {
  Mae self;
  Mae cross;
  Mae shared;
};

/// Record identities a model was trained on, kept for the leakage audit.
struct TrainingProvenance {
  std::string model;
  std::vector<RecordKey> train_keys;
};

struct TestProvenance {
  std::string vehicle;
  std::vector<RecordKey> test_keys;
};

struct ExperimentReport {
  Scheme scheme = Scheme::baseline;
  SourceKind source = SourceKind::kinematic;
  std::vector<std::string> vehicles;
  std::vector<PredictionCell> cells;  // model-major: each vehicle model, then MERGED
  KindSummary summary;
  ExperimentOptions options;
  std::vector<TrainingProvenance> models;
  std::vector<TestProvenance> tests;

  const PredictionCell& cell(std::string_view model, std::string_view data) const;
};

KindSummary summarize(std::span<const PredictionCell> cells);

/// Trains one model per vehicle and one on the union of all training splits,
/// and scores every vehicle's test split on every model.
ExperimentReport run_matrix(std::span<const Dataset> per_vehicle, Scheme scheme, const ExperimentOptions& opts);

/// Empty when no test record reaches any training set and every cell's
/// training data matches its kind. Otherwise one message per violation.
std::vector<std::string> audit_leakage(const ExperimentReport& report);

struct CurvePoint {
  double fraction = 0.0;
  std::size_t train_rows = 0;
  Mae mae;
};

struct LearningCurve {
  Scheme scheme = Scheme::baseline;
  SourceKind source = SourceKind::kinematic;
  std::string vehicle;
  int repeats = 1;
  std::vector<CurvePoint> points;
  ExperimentOptions options;
};

/// Self-prediction MAE against training-set size. Each repeat draws a seeded
/// subset of the vehicle's training split; the test split never changes.
LearningCurve learning_curve(const Dataset& vehicle_data, Scheme scheme, std::span<const double> fractions,
                             int repeats, const ExperimentOptions& opts);

struct ComparativeEntry {
  Scheme scheme = Scheme::baseline;
  std::string training_source;  // "own", another vehicle's name, or "merged"
  double mae = 0.0;
};

struct ComparativeReport {
  SourceKind source = SourceKind::kinematic;
  std::string target_vehicle;
  int output = 1;  // 0 = X, 1 = Y, 2 = theta
  std::vector<std::string> training_sources;
  std::vector<ComparativeEntry> entries;  // scheme-major
  ExperimentOptions options;

  double at(Scheme scheme, std::string_view training_source) const;
  /// Mean MAE over the sources that exclude the target vehicle's own data
  /// and the merged set, i.e. the single-other-vehicle transfer tasks.
  double transfer_mae(Scheme scheme) const;
};

/// Every scheme against every training source for one output of one vehicle.
ComparativeReport comparative_study(std::span<const Dataset> per_vehicle, std::string_view target_vehicle,
                                    int output, const ExperimentOptions& opts,
                                    std::span<const Scheme> schemes = all_schemes());

int parse_output(std::string_view text);
std::string_view output_name(int output);

/// Writes matrix.csv and matrix.md into `dir`.
std::vector<std::filesystem::path> emit_report(const ExperimentReport& r, const std::filesystem::path& dir);
/// Writes `<stem>.csv` and `<stem>.md`.
std::vector<std::filesystem::path> emit_report(const LearningCurve& c, const std::filesystem::path& csv_path);
/// Writes comparative.csv and comparative.md into `dir`.
std::vector<std::filesystem::path> emit_report(const ComparativeReport& r, const std::filesystem::path& dir);

std::string matrix_csv(const ExperimentReport& r);
std::string matrix_markdown(const ExperimentReport& r);
std::string curve_csv(const LearningCurve& c);
std::string curve_markdown(const LearningCurve& c);
std::string comparative_csv(const ComparativeReport& r);
std::string comparative_markdown(const ComparativeReport& r);

}  // namespace pitransfer::experiments
