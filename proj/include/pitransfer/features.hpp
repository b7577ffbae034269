#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pitransfer/dataset.hpp"
#include "pitransfer/dimension.hpp"

namespace pitransfer {

class FeatureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix with named columns.
struct FeatureMatrix {
  std::vector<std::string> column_names;
  std::size_t rows = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  explicit FeatureMatrix(std::vector<std::string> names) : column_names(std::move(names)) {}
  FeatureMatrix(std::vector<std::string> names, std::size_t n_rows)
      : column_names(std::move(names)), rows(n_rows), data(n_rows * column_names.size(), 0.0) {}

  std::size_t cols() const { return column_names.size(); }
  double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols(), cols()}; }
  std::vector<double> column(std::size_t j) const;
  void push_row(std::span<const double> values);
  void check_finite() const;
};

enum class Scheme { baseline, normalized, pca2, pca3, augmented, pi, pi_augmented, pi_fillers };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view text);
const std::array<Scheme, 8>& all_schemes();
bool is_pi_scheme(Scheme s);

inline constexpr double kDefaultPi10Cap = 1e3;

/// Dimensional inputs: [v_i, a, delta, l] (kinematic) or
/// [mu, v_i, g, a, delta, Nf, Nr, l] (surrogate).
std::vector<double> baseline_features(const ManeuverRecord& r);
std::vector<std::string> baseline_feature_names(SourceKind s);

/// Dimensional inputs plus the yaw rate v_i tan(delta) / l.
std::vector<double> augmented_features(const ManeuverRecord& r);

/// [a l / v_i^2, delta] or [a l / v_i^2, delta, Nf/Nr, mu, g l / v_i^2].
std::vector<double> pi_features(const ManeuverRecord& r);
std::vector<std::string> pi_feature_names(SourceKind s);

/// Kinematic: adds v_i^2 tan(delta) / (a l). Surrogate: adds the longitudinal
/// grip ratio Nr mu g / ((Nf + Nr) |a|) and the lateral grip ratio
/// g mu l / (v_i^2 tan(delta)), the latter clipped to +-pi10_cap.
std::vector<double> pi_augmented_features(const ManeuverRecord& r, double pi10_cap = kDefaultPi10Cap);

/// pi_features followed by the dimensional fillers v_i and l.
std::vector<double> pi_fillers_features(const ManeuverRecord& r);

std::array<double, 3> raw_targets(const ManeuverRecord& r);
/// [X/l, Y/l, theta].
std::array<double, 3> pi_targets(const ManeuverRecord& r);

/// Pi basis used for the kinematic (repeated l, v_i) and surrogate
/// (repeated l, v_i, Nf; force ratio written Nf/Nr) studies.
const PiBasis& kinematic_study_basis();
const PiBasis& dynamic_study_basis();

/// Per-column division by the largest training magnitude.
class Normalizer {
 public:
  static Normalizer fit(const FeatureMatrix& train);
  FeatureMatrix apply(const FeatureMatrix& x) const;
  const std::vector<double>& divisors() const { return divisors_; }

 private:
  std::vector<double> divisors_;
};

/// Standardized PCA keeping the top-k components of the covariance.
class PcaModel {
 public:
  static PcaModel fit(const FeatureMatrix& train, std::size_t k);

  FeatureMatrix apply(const FeatureMatrix& x) const;
  /// Maps projected rows back to the original feature space.
  FeatureMatrix reconstruct(const FeatureMatrix& projected) const;

  std::size_t components() const { return k_; }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  double explained_variance_ratio() const;
  /// Loading of input column j on component c.
  double loading(std::size_t j, std::size_t c) const { return loadings_[j * k_ + c]; }

 private:
  std::size_t n_in_ = 0;
  std::size_t k_ = 0;
  std::vector<std::string> names_;
  std::vector<double> mean_, scale_;
  std::vector<double> loadings_;    // n_in x k, row-major
  std::vector<double> eigenvalues_; // all, descending
};

struct PipelineOptions {
  double pi10_cap = kDefaultPi10Cap;
};

/// Record -> learner matrices for one preprocessing scheme, and predictions
/// back to physical pose.
class Pipeline {
 public:
  Pipeline(Scheme scheme, SourceKind source, PipelineOptions opts = {});

  Scheme scheme() const { return scheme_; }
  SourceKind source() const { return source_; }
  bool needs_fit() const;
  bool fitted() const { return !needs_fit() || normalizer_ || pca_; }

  void fit(std::span<const ManeuverRecord> train);

  FeatureMatrix inputs(std::span<const ManeuverRecord> records) const;
  FeatureMatrix targets(std::span<const ManeuverRecord> records) const;
  std::vector<std::string> input_names() const;

  FinalPose inverse_targets(std::span<const double> prediction, const ManeuverRecord& context) const;

  const std::optional<PcaModel>& pca() const { return pca_; }
  const std::optional<Normalizer>& normalizer() const { return normalizer_; }

 private:
  std::vector<double> raw_inputs(const ManeuverRecord& r) const;
  FeatureMatrix raw_input_matrix(std::span<const ManeuverRecord> records) const;
  void check_source(const ManeuverRecord& r) const;

  Scheme scheme_;
  SourceKind source_;
  PipelineOptions opts_;
  std::optional<Normalizer> normalizer_;
  std::optional<PcaModel> pca_;
};

/// Physical pose from a 3-vector prediction; pi schemes rescale by the test
/// record's wheelbase, other schemes pass through.
FinalPose inverse_targets(Scheme scheme, std::span<const double> prediction, const ManeuverRecord& context);

}  // namespace pitransfer
