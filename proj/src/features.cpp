#include "pitransfer/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace pitransfer {

std::vector<double> FeatureMatrix::column(std::size_t j) const {
  std::vector<double> out(rows);
  for (std::size_t i = 0; i < rows; ++i) out[i] = at(i, j);
  return out;
}

void FeatureMatrix::push_row(std::span<const double> values) {
  if (values.size() != cols())
    throw FeatureError("row has " + std::to_string(values.size()) + " values, matrix has " +
                       std::to_string(cols()) + " columns");
  data.insert(data.end(), values.begin(), values.end());
  ++rows;
}

void FeatureMatrix::check_finite() const {
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i]))
      throw FeatureError("non-finite value in column '" + column_names[i % cols()] + "'");
}

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::baseline: return "baseline";
    case Scheme::normalized: return "normalized";
    case Scheme::pca2: return "pca2";
    case Scheme::pca3: return "pca3";
    case Scheme::augmented: return "augmented";
    case Scheme::pi: return "pi";
    case Scheme::pi_augmented: return "pi-aug";
    case Scheme::pi_fillers: return "pi-fillers";
  }
  return "?";
}

Scheme parse_scheme(std::string_view text) {
  for (Scheme s : all_schemes())
    if (to_string(s) == text) return s;
  throw FeatureError("unknown scheme '" + std::string(text) +
                     "' (expected baseline|normalized|pca2|pca3|augmented|pi|pi-aug|pi-fillers)");
}

const std::array<Scheme, 8>& all_schemes() {
  static const std::array<Scheme, 8> schemes{Scheme::baseline, Scheme::normalized, Scheme::pca2,
                                             Scheme::pca3,     Scheme::augmented,  Scheme::pi,
                                             Scheme::pi_augmented, Scheme::pi_fillers};
  return schemes;
}

bool is_pi_scheme(Scheme s) {
  return s == Scheme::pi || s == Scheme::pi_augmented || s == Scheme::pi_fillers;
}

namespace {

struct StudyBasis {
  PiBasis basis;
  std::vector<std::size_t> input_groups;
  std::array<std::size_t, 3> target_groups;
};

StudyBasis make_kinematic() {
  auto m = build_dimension_matrix(kinematic_variables());
  PiBasis b = repeated_vars_pi_basis(m, {"l", "v_i"});
  StudyBasis s{b, {b.group_index("a"), b.group_index("delta")},
               {b.group_index("X"), b.group_index("Y"), b.group_index("theta")}};
  return s;
}

StudyBasis make_dynamic() {
  auto m = build_dimension_matrix(dynamic_variables());
  // The repeated-variable method yields Nr/Nf; the study uses Nf/Nr.
  PiBasis b = repeated_vars_pi_basis(m, {"l", "v_i", "N_f"}).with_inverted("N_r");
  StudyBasis s{b,
               {b.group_index("a"), b.group_index("delta"), b.group_index("N_r"), b.group_index("mu"),
                b.group_index("g")},
               {b.group_index("X"), b.group_index("Y"), b.group_index("theta")}};
  return s;
}

const StudyBasis& kinematic_study() {
  static const StudyBasis s = make_kinematic();
  return s;
}

const StudyBasis& dynamic_study() {
  static const StudyBasis s = make_dynamic();
  return s;
}

// Values aligned with kinematic_variables() / dynamic_variables().
std::vector<double> basis_values(const ManeuverRecord& r) {
  const auto& in = r.inputs;
  const auto& v = r.vehicle;
  if (r.source == SourceKind::kinematic)
    return {r.outcome.X, r.outcome.Y, r.outcome.theta, in.v_i, in.a, in.delta, v.wheelbase_l};
  return {r.outcome.X, r.outcome.Y,  r.outcome.theta,   in.mu,           in.v_i, in.g,
          in.a,        in.delta,     v.front_normal_Nf, v.rear_normal_Nr, v.wheelbase_l};
}

const StudyBasis& study_for(SourceKind s) {
  return s == SourceKind::kinematic ? kinematic_study() : dynamic_study();
}

}  // namespace

const PiBasis& kinematic_study_basis() { return kinematic_study().basis; }
const PiBasis& dynamic_study_basis() { return dynamic_study().basis; }

std::vector<double> baseline_features(const ManeuverRecord& r) {
  const auto& in = r.inputs;
  const auto& v = r.vehicle;
  if (r.source == SourceKind::kinematic) return {in.v_i, in.a, in.delta, v.wheelbase_l};
  return {in.mu, in.v_i, in.g, in.a, in.delta, v.front_normal_Nf, v.rear_normal_Nr, v.wheelbase_l};
}

std::vector<std::string> baseline_feature_names(SourceKind s) {
  if (s == SourceKind::kinematic) return {"v_i", "a", "delta", "l"};
  return {"mu", "v_i", "g", "a", "delta", "Nf", "Nr", "l"};
}

std::vector<double> augmented_features(const ManeuverRecord& r) {
  auto f = baseline_features(r);
  f.push_back(r.inputs.v_i * std::tan(r.inputs.delta) / r.vehicle.wheelbase_l);
  return f;
}

std::vector<double> pi_features(const ManeuverRecord& r) {
  const auto& study = study_for(r.source);
  const auto values = basis_values(r);
  std::vector<double> out;
  out.reserve(study.input_groups.size());
  for (auto g : study.input_groups) out.push_back(study.basis.evaluate(g, values));
  return out;
}

std::vector<std::string> pi_feature_names(SourceKind s) {
  if (s == SourceKind::kinematic) return {"a*l/v_i^2", "delta"};
  return {"a*l/v_i^2", "delta", "Nf/Nr", "mu", "g*l/v_i^2"};
}

std::vector<double> pi_augmented_features(const ManeuverRecord& r, double pi10_cap) {
  const auto& in = r.inputs;
  const auto& v = r.vehicle;
  if (in.a == 0.0) throw FeatureError("augmented pi features need a nonzero acceleration");
  auto f = pi_features(r);
  const double tan_delta = std::tan(in.delta);
  if (r.source == SourceKind::kinematic) {
    f.push_back(in.v_i * in.v_i * tan_delta / (in.a * v.wheelbase_l));
    return f;
  }
  f.push_back(v.rear_normal_Nr * in.mu * in.g / ((v.front_normal_Nf + v.rear_normal_Nr) * std::abs(in.a)));
  double lateral = pi10_cap;
  if (tan_delta != 0.0) {
    lateral = in.g * in.mu * v.wheelbase_l / (in.v_i * in.v_i * tan_delta);
    if (std::abs(lateral) > pi10_cap) lateral = std::copysign(pi10_cap, lateral);
  }
  f.push_back(lateral);
  return f;
}

std::vector<double> pi_fillers_features(const ManeuverRecord& r) {
  auto f = pi_features(r);
  f.push_back(r.inputs.v_i);
  f.push_back(r.vehicle.wheelbase_l);
  return f;
}

std::array<double, 3> raw_targets(const ManeuverRecord& r) {
  return {r.outcome.X, r.outcome.Y, r.outcome.theta};
}

std::array<double, 3> pi_targets(const ManeuverRecord& r) {
  const auto& study = study_for(r.source);
  const auto values = basis_values(r);
  return {study.basis.evaluate(study.target_groups[0], values),
          study.basis.evaluate(study.target_groups[1], values),
          study.basis.evaluate(study.target_groups[2], values)};
}

Normalizer Normalizer::fit(const FeatureMatrix& train) {
  if (train.rows == 0) throw FeatureError("cannot fit a normalizer on an empty matrix");
  Normalizer n;
  n.divisors_.assign(train.cols(), 0.0);
  for (std::size_t i = 0; i < train.rows; ++i)
    for (std::size_t j = 0; j < train.cols(); ++j)
      n.divisors_[j] = std::max(n.divisors_[j], std::abs(train.at(i, j)));
  for (auto& d : n.divisors_)
    if (d == 0.0) d = 1.0;
  return n;
}

FeatureMatrix Normalizer::apply(const FeatureMatrix& x) const {
  if (x.cols() != divisors_.size()) throw FeatureError("normalizer column count mismatch");
  FeatureMatrix out = x;
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out.at(i, j) /= divisors_[j];
  return out;
}

PcaModel PcaModel::fit(const FeatureMatrix& train, std::size_t k) {
  const std::size_t n = train.rows;
  const std::size_t p = train.cols();
  if (k < 1 || k > p)
    throw FeatureError("PCA components must lie in [1, " + std::to_string(p) + "], got " + std::to_string(k));
  if (n <= p) throw FeatureError("PCA needs more rows than columns");

  PcaModel m;
  m.n_in_ = p;
  m.k_ = k;
  m.mean_.assign(p, 0.0);
  m.scale_.assign(p, 1.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += train.at(i, j);
    m.mean_[j] = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = train.at(i, j) - m.mean_[j];
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    m.scale_[j] = sd > 0.0 ? sd : 1.0;
  }

  Eigen::MatrixXd z(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) z(i, j) = (train.at(i, j) - m.mean_[j]) / m.scale_[j];
  const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw FeatureError("PCA eigendecomposition failed");

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return solver.eigenvalues()(static_cast<Eigen::Index>(a)) > solver.eigenvalues()(static_cast<Eigen::Index>(b));
  });
  for (auto c : order) m.eigenvalues_.push_back(std::max(0.0, solver.eigenvalues()(static_cast<Eigen::Index>(c))));

  m.loadings_.assign(p * k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    Eigen::VectorXd vec = solver.eigenvectors().col(static_cast<Eigen::Index>(order[c]));
    Eigen::Index biggest = 0;
    for (Eigen::Index j = 1; j < vec.size(); ++j)
      if (std::abs(vec(j)) > std::abs(vec(biggest))) biggest = j;
    if (vec(biggest) < 0.0) vec = -vec;
    for (std::size_t j = 0; j < p; ++j) m.loadings_[j * k + c] = vec(static_cast<Eigen::Index>(j));
  }
  for (std::size_t c = 0; c < k; ++c) m.names_.push_back("pc" + std::to_string(c + 1));
  return m;
}

FeatureMatrix PcaModel::apply(const FeatureMatrix& x) const {
  if (x.cols() != n_in_) throw FeatureError("PCA column count mismatch");
  FeatureMatrix out(names_, x.rows);
  std::vector<double> z(n_in_);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < n_in_; ++j) z[j] = (x.at(i, j) - mean_[j]) / scale_[j];
    for (std::size_t c = 0; c < k_; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_in_; ++j) s += loadings_[j * k_ + c] * z[j];
      out.at(i, c) = s;
    }
  }
  return out;
}

FeatureMatrix PcaModel::reconstruct(const FeatureMatrix& projected) const {
  if (projected.cols() != k_) throw FeatureError("projected column count mismatch");
  std::vector<std::string> names;
  for (std::size_t j = 0; j < n_in_; ++j) names.push_back("x" + std::to_string(j));
  FeatureMatrix out(std::move(names), projected.rows);
  for (std::size_t i = 0; i < projected.rows; ++i)
    for (std::size_t j = 0; j < n_in_; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < k_; ++c) s += loadings_[j * k_ + c] * projected.at(i, c);
      out.at(i, j) = mean_[j] + scale_[j] * s;
    }
  return out;
}

double PcaModel::explained_variance_ratio() const {
  const double total = std::accumulate(eigenvalues_.begin(), eigenvalues_.end(), 0.0);
  if (total <= 0.0) return 1.0;
  const double kept = std::accumulate(eigenvalues_.begin(), eigenvalues_.begin() + static_cast<long>(k_), 0.0);
  return kept / total;
}

Pipeline::Pipeline(Scheme scheme, SourceKind source, PipelineOptions opts)
    : scheme_(scheme), source_(source), opts_(opts) {}

bool Pipeline::needs_fit() const {
  return scheme_ == Scheme::normalized || scheme_ == Scheme::pca2 || scheme_ == Scheme::pca3;
}

void Pipeline::check_source(const ManeuverRecord& r) const {
  if (r.source != source_)
    throw FeatureError("record source " + std::string(to_string(r.source)) + " does not match pipeline source " +
                       std::string(to_string(source_)));
}

std::vector<double> Pipeline::raw_inputs(const ManeuverRecord& r) const {
  check_source(r);
  switch (scheme_) {
    case Scheme::baseline:
    case Scheme::normalized:
    case Scheme::pca2:
    case Scheme::pca3: return baseline_features(r);
    case Scheme::augmented: return augmented_features(r);
    case Scheme::pi: return pi_features(r);
    case Scheme::pi_augmented: return pi_augmented_features(r, opts_.pi10_cap);
    case Scheme::pi_fillers: return pi_fillers_features(r);
  }
  return {};
}

std::vector<std::string> Pipeline::input_names() const {
  std::vector<std::string> names;
  switch (scheme_) {
    case Scheme::baseline:
    case Scheme::normalized: return baseline_feature_names(source_);
    case Scheme::pca2: return {"pc1", "pc2"};
    case Scheme::pca3: return {"pc1", "pc2", "pc3"};
    case Scheme::augmented:
      names = baseline_feature_names(source_);
      names.push_back("v_i*tan(delta)/l");
      return names;
    case Scheme::pi: return pi_feature_names(source_);
    case Scheme::pi_augmented:
      names = pi_feature_names(source_);
      if (source_ == SourceKind::kinematic) {
        names.push_back("v_i^2*tan(delta)/(a*l)");
      } else {
        names.push_back("Nr*mu*g/((Nf+Nr)*|a|)");
        names.push_back("g*mu*l/(v_i^2*tan(delta))");
      }
      return names;
    case Scheme::pi_fillers:
      names = pi_feature_names(source_);
      names.push_back("v_i");
      names.push_back("l");
      return names;
  }
  return names;
}

FeatureMatrix Pipeline::raw_input_matrix(std::span<const ManeuverRecord> records) const {
  std::vector<std::string> names = (scheme_ == Scheme::pca2 || scheme_ == Scheme::pca3 || scheme_ == Scheme::normalized)
                                       ? baseline_feature_names(source_)
                                       : input_names();
  FeatureMatrix x(std::move(names));
  x.data.reserve(records.size() * x.cols());
  for (const auto& r : records) x.push_row(raw_inputs(r));
  return x;
}

void Pipeline::fit(std::span<const ManeuverRecord> train) {
  if (!needs_fit()) return;
  if (train.empty()) throw FeatureError("cannot fit a pipeline on no records");
  const FeatureMatrix x = raw_input_matrix(train);
  if (scheme_ == Scheme::normalized) normalizer_ = Normalizer::fit(x);
  if (scheme_ == Scheme::pca2) pca_ = PcaModel::fit(x, 2);
  if (scheme_ == Scheme::pca3) pca_ = PcaModel::fit(x, 3);
}

FeatureMatrix Pipeline::inputs(std::span<const ManeuverRecord> records) const {
  if (!fitted()) throw FeatureError("pipeline '" + std::string(to_string(scheme_)) + "' used before fit");
  FeatureMatrix x = raw_input_matrix(records);
  if (normalizer_) x = normalizer_->apply(x);
  if (pca_) x = pca_->apply(x);
  x.check_finite();
  return x;
}

FeatureMatrix Pipeline::targets(std::span<const ManeuverRecord> records) const {
  FeatureMatrix y(is_pi_scheme(scheme_) ? std::vector<std::string>{"X/l", "Y/l", "theta"}
                                        : std::vector<std::string>{"X", "Y", "theta"});
  y.data.reserve(records.size() * 3);
  for (const auto& r : records) {
    check_source(r);
    const auto t = is_pi_scheme(scheme_) ? pi_targets(r) : raw_targets(r);
    y.push_row(t);
  }
  return y;
}

FinalPose Pipeline::inverse_targets(std::span<const double> prediction, const ManeuverRecord& context) const {
  return pitransfer::inverse_targets(scheme_, prediction, context);
}

FinalPose inverse_targets(Scheme scheme, std::span<const double> prediction, const ManeuverRecord& context) {
  if (prediction.size() != 3) throw FeatureError("pose prediction needs 3 values");
  if (!is_pi_scheme(scheme)) return {prediction[0], prediction[1], prediction[2]};
  if (!(context.vehicle.wheelbase_l > 0.0)) throw FeatureError("context record lacks a wheelbase");
  const PiBasis& basis = context.source == SourceKind::kinematic ? kinematic_study_basis() : dynamic_study_basis();
  const auto phys = inverse_transform_outputs(
      basis, {{"X", prediction[0]}, {"Y", prediction[1]}, {"theta", prediction[2]}},
      {{"l", context.vehicle.wheelbase_l}});
  return {phys.at("X"), phys.at("Y"), phys.at("theta")};
}

}  // namespace pitransfer
