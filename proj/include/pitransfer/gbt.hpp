#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "pitransfer/features.hpp"

namespace pitransfer::gbt {

class GbtError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GbtConfig {
  int n_rounds = 300;
  double learning_rate = 0.1;
  int max_depth = 4;
  int min_samples_leaf = 5;
  double subsample = 1.0;
  std::uint64_t seed = 0;
  /// Worker threads for the split search. Results do not depend on it.
  int n_threads = 1;

  void validate() const;
  friend bool operator==(const GbtConfig&, const GbtConfig&) = default;
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  RegressionTree() = default;
  explicit RegressionTree(std::vector<Node> nodes);

  /// Rows with x[feature] <= threshold descend left.
  double predict(std::span<const double> row) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;
  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::vector<Node> nodes_;
};

/// prediction = base_score + learning_rate * sum of tree outputs
class Ensemble {
 public:
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
  GbtConfig config;
  std::size_t n_features = 0;

  double predict_row(std::span<const double> row) const;
  std::vector<double> predict(const FeatureMatrix& x) const;

  void save(std::ostream& out) const;
  static Ensemble load(std::istream& in);
  friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

/// Training loss (sum of squared residuals) before the first round and after
/// each round.
struct FitTrace {
  std::vector<double> training_loss;
};

Ensemble fit(const FeatureMatrix& x, std::span<const double> y, const GbtConfig& cfg,
             FitTrace* trace = nullptr);

inline std::vector<double> predict(const Ensemble& e, const FeatureMatrix& x) { return e.predict(x); }

/// One ensemble per target column, seeded seed, seed+1, seed+2.
std::array<Ensemble, 3> fit_multi(const FeatureMatrix& x, const FeatureMatrix& y, const GbtConfig& cfg);

}  // namespace pitransfer::gbt
