#include "pitransfer/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "pitransfer/numeric_text.hpp"

namespace pitransfer::gbt {

void GbtConfig::validate() const {
  if (n_rounds < 1) throw GbtError("n_rounds must be at least 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw GbtError("learning_rate must lie in (0, 1]");
  if (max_depth < 1) throw GbtError("max_depth must be at least 1");
  if (min_samples_leaf < 1) throw GbtError("min_samples_leaf must be at least 1");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw GbtError("subsample must lie in (0, 1]");
  if (n_threads < 1) throw GbtError("n_threads must be at least 1");
}

RegressionTree::RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw GbtError("a tree needs at least one node");
  const int n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_)
    if (!node.is_leaf() && (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n))
      throw GbtError("tree node points outside the node list");
}

double RegressionTree::predict(std::span<const double> row) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& node = nodes_[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                              : node.right);
  }
  return nodes_[i].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

double Ensemble::predict_row(std::span<const double> row) const {
  if (row.size() != n_features)
    throw GbtError("row has " + std::to_string(row.size()) + " features, model expects " +
                   std::to_string(n_features));
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(row);
  return base_score + config.learning_rate * sum;
}

std::vector<double> Ensemble::predict(const FeatureMatrix& x) const {
  if (x.cols() != n_features)
    throw GbtError("matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                   std::to_string(n_features));
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict_row(x.row(i));
  return out;
}

namespace {

constexpr double kMinRelativeGain = 1e-12;

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& cols, const std::vector<double>& residual,
              const GbtConfig& cfg)
      : cols_(cols), residual_(residual), cfg_(cfg), goes_left_(residual.size(), 0) {}

  // `lists[f]` holds the in-sample rows sorted by feature f.
  RegressionTree build(std::vector<std::vector<int>>& lists) {
    lists_ = &lists;
    nodes_.clear();
    scratch_.resize(lists.front().size());
    grow(0, lists.front().size(), 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  int grow(std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const std::size_t count = end - begin;
    const auto& rows0 = (*lists_)[0];
    double sum = 0.0;
    double ss = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const double r = residual_[static_cast<std::size_t>(rows0[k])];
      sum += r;
      ss += r * r;
    }
    const double leaf_value = sum / static_cast<double>(count);
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
    if (depth >= cfg_.max_depth || count < 2 * min_leaf || ss == 0.0) {
      nodes_[static_cast<std::size_t>(id)].value = leaf_value;
      return id;
    }

    const Split best = best_split(begin, end, sum);
    if (best.feature < 0 || !(best.gain > kMinRelativeGain * ss)) {
      nodes_[static_cast<std::size_t>(id)].value = leaf_value;
      return id;
    }

    const auto& xs = cols_[static_cast<std::size_t>(best.feature)];
    const auto& split_rows = (*lists_)[static_cast<std::size_t>(best.feature)];
    std::size_t n_left = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const int row = split_rows[k];
      const bool left = xs[static_cast<std::size_t>(row)] <= best.threshold;
      goes_left_[static_cast<std::size_t>(row)] = left;
      n_left += left;
    }
    for (auto& list : *lists_) stable_partition(list, begin, end);

    const std::size_t mid = begin + n_left;
    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.value = leaf_value;
    node.left = left;
    node.right = right;
    return id;
  }

  Split scan_feature(int f, std::size_t begin, std::size_t end, double sum) const {
    const auto& xs = cols_[static_cast<std::size_t>(f)];
    const auto& rows = (*lists_)[static_cast<std::size_t>(f)];
    const std::size_t count = end - begin;
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
    const double parent = sum * sum / static_cast<double>(count);
    Split best;
    double left_sum = 0.0;
    for (std::size_t k = begin; k + 1 < end; ++k) {
      left_sum += residual_[static_cast<std::size_t>(rows[k])];
      const std::size_t n_left = k - begin + 1;
      const std::size_t n_right = count - n_left;
      if (n_left < min_leaf) continue;
      if (n_right < min_leaf) break;
      const double x_here = xs[static_cast<std::size_t>(rows[k])];
      const double x_next = xs[static_cast<std::size_t>(rows[k + 1])];
      if (!(x_here < x_next)) continue;
      const double right_sum = sum - left_sum;
      const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                          right_sum * right_sum / static_cast<double>(n_right) - parent;
      if (gain > best.gain) {
        double threshold = x_here + (x_next - x_here) / 2.0;
        if (!(threshold < x_next)) threshold = x_here;
        best = {gain, f, threshold};
      }
    }
    return best;
  }

  Split best_split(std::size_t begin, std::size_t end, double sum) const {
    const int p = static_cast<int>(cols_.size());
    std::vector<Split> per_feature(static_cast<std::size_t>(p));
    const int workers = std::min(cfg_.n_threads, p);
    if (workers > 1 && end - begin >= 256) {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          for (int f = w; f < p; f += workers)
            per_feature[static_cast<std::size_t>(f)] = scan_feature(f, begin, end, sum);
        });
      for (auto& t : pool) t.join();
    } else {
      for (int f = 0; f < p; ++f) per_feature[static_cast<std::size_t>(f)] = scan_feature(f, begin, end, sum);
    }
    // Lowest feature index wins ties; within a feature the lowest threshold.
    Split best;
    for (const auto& s : per_feature)
      if (s.feature >= 0 && s.gain > best.gain) best = s;
    return best;
  }

  void stable_partition(std::vector<int>& list, std::size_t begin, std::size_t end) {
    std::size_t lo = begin;
    std::size_t hi = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const int row = list[k];
      if (goes_left_[static_cast<std::size_t>(row)])
        list[lo++] = row;
      else
        scratch_[hi++] = row;
    }
    std::copy(scratch_.begin(), scratch_.begin() + static_cast<long>(hi), list.begin() + static_cast<long>(lo));
  }

  const std::vector<std::vector<double>>& cols_;
  const std::vector<double>& residual_;
  const GbtConfig& cfg_;
  std::vector<char> goes_left_;
  std::vector<int> scratch_;
  std::vector<std::vector<int>>* lists_ = nullptr;
  std::vector<RegressionTree::Node> nodes_;
};

}  // namespace

Ensemble fit(const FeatureMatrix& x, std::span<const double> y, const GbtConfig& cfg, FitTrace* trace) {
  cfg.validate();
  const std::size_t n = x.rows;
  const std::size_t p = x.cols();
  if (n == 0 || p == 0) throw GbtError("cannot fit on empty data");
  if (y.size() != n) throw GbtError("feature rows and target length differ");
  if (n < 2 * static_cast<std::size_t>(cfg.min_samples_leaf))
    throw GbtError("need at least 2 * min_samples_leaf rows");
  for (double v : y)
    if (!std::isfinite(v)) throw GbtError("non-finite target value");
  for (double v : x.data)
    if (!std::isfinite(v)) throw GbtError("non-finite feature value");

  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < p; ++f) cols[f][i] = x.at(i, f);

  // Presort each feature. Equal keys fall back to the whole row and then the
  // target, so rows that compare equal are interchangeable and the scan order
  // does not depend on the input row order.
  auto row_less = [&](int a, int b) {
    for (std::size_t f = 0; f < p; ++f) {
      const double xa = cols[f][static_cast<std::size_t>(a)];
      const double xb = cols[f][static_cast<std::size_t>(b)];
      if (xa != xb) return xa < xb;
    }
    return y[static_cast<std::size_t>(a)] < y[static_cast<std::size_t>(b)];
  };
  std::vector<std::vector<int>> order(p, std::vector<int>(n));
  for (std::size_t f = 0; f < p; ++f) {
    std::iota(order[f].begin(), order[f].end(), 0);
    const auto& xs = cols[f];
    std::sort(order[f].begin(), order[f].end(), [&](int a, int b) {
      const double xa = xs[static_cast<std::size_t>(a)];
      const double xb = xs[static_cast<std::size_t>(b)];
      if (xa != xb) return xa < xb;
      return row_less(a, b);
    });
  }

  Ensemble e;
  e.config = cfg;
  e.n_features = p;
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  if (*ymin == *ymax) {
    e.base_score = *ymin;
  } else {
    double sum = 0.0;
    for (int row : order[0]) sum += y[static_cast<std::size_t>(row)];
    e.base_score = sum / static_cast<double>(n);
  }

  std::vector<double> pred(n, e.base_score);
  std::vector<double> residual(n);
  auto refresh = [&] {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = y[i] - pred[i];
      loss += residual[i] * residual[i];
    }
    return loss;
  };
  const double initial_loss = refresh();
  if (trace) trace->training_loss.assign(1, initial_loss);

  const auto n_sample = std::max<std::size_t>(
      2 * static_cast<std::size_t>(cfg.min_samples_leaf),
      static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n))));
  std::mt19937_64 rng(cfg.seed);
  std::vector<int> pool(n);
  std::vector<char> in_sample(n, 1);
  std::vector<std::vector<int>> lists(p);
  TreeBuilder builder(cols, residual, cfg);

  e.trees.reserve(static_cast<std::size_t>(cfg.n_rounds));
  for (int round = 0; round < cfg.n_rounds; ++round) {
    if (n_sample < n) {
      std::iota(pool.begin(), pool.end(), 0);
      std::fill(in_sample.begin(), in_sample.end(), 0);
      for (std::size_t k = 0; k < n_sample; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, n - 1);
        std::swap(pool[k], pool[pick(rng)]);
        in_sample[static_cast<std::size_t>(pool[k])] = 1;
      }
    }
    for (std::size_t f = 0; f < p; ++f) {
      lists[f].clear();
      for (int row : order[f])
        if (in_sample[static_cast<std::size_t>(row)]) lists[f].push_back(row);
    }
    RegressionTree tree = builder.build(lists);
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> row(x.data.data() + i * p, p);
      pred[i] += cfg.learning_rate * tree.predict(row);
    }
    const double loss = refresh();
    if (trace) trace->training_loss.push_back(loss);
    e.trees.push_back(std::move(tree));
  }
  return e;
}

std::array<Ensemble, 3> fit_multi(const FeatureMatrix& x, const FeatureMatrix& y, const GbtConfig& cfg) {
  if (y.cols() != 3) throw GbtError("fit_multi expects exactly 3 target columns");
  std::array<Ensemble, 3> out;
  for (std::size_t k = 0; k < 3; ++k) {
    GbtConfig c = cfg;
    c.seed = cfg.seed + k;
    const auto target = y.column(k);
    out[k] = fit(x, target, c);
  }
  return out;
}

namespace {
constexpr const char* kMagic = "pitransfer-gbt";
constexpr int kFormatVersion = 1;

std::string expect_word(std::istream& in, const char* word) {
  std::string got;
  if (!(in >> got) || got != word) throw GbtError(std::string("model file: expected '") + word + "', got '" + got + "'");
  return got;
}

double read_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw GbtError("model file: unexpected end of input");
  try {
    return parse_double(tok);
  } catch (const std::invalid_argument& err) {
    throw GbtError(std::string("model file: ") + err.what());
  }
}

template <typename Int>
Int read_int(std::istream& in) {
  long long v = 0;
  if (!(in >> v)) throw GbtError("model file: expected an integer");
  return static_cast<Int>(v);
}
}  // namespace

void Ensemble::save(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "n_features " << n_features << '\n';
  out << "base_score " << format_double(base_score) << '\n';
  out << "config n_rounds " << config.n_rounds << " learning_rate " << format_double(config.learning_rate)
      << " max_depth " << config.max_depth << " min_samples_leaf " << config.min_samples_leaf << " subsample "
      << format_double(config.subsample) << " seed " << config.seed << '\n';
  out << "trees " << trees.size() << '\n';
  for (const auto& t : trees) {
    out << "tree " << t.nodes().size() << '\n';
    for (const auto& node : t.nodes()) {
      if (node.is_leaf())
        out << "leaf " << format_double(node.value) << '\n';
      else
        out << "split " << node.feature << ' ' << format_double(node.threshold) << ' ' << node.left << ' '
            << node.right << ' ' << format_double(node.value) << '\n';
    }
  }
  out << "end\n";
}

Ensemble Ensemble::load(std::istream& in) {
  Ensemble e;
  expect_word(in, kMagic);
  if (read_int<int>(in) != kFormatVersion) throw GbtError("model file: unsupported format version");
  expect_word(in, "n_features");
  e.n_features = read_int<std::size_t>(in);
  expect_word(in, "base_score");
  e.base_score = read_double(in);
  expect_word(in, "config");
  expect_word(in, "n_rounds");
  e.config.n_rounds = read_int<int>(in);
  expect_word(in, "learning_rate");
  e.config.learning_rate = read_double(in);
  expect_word(in, "max_depth");
  e.config.max_depth = read_int<int>(in);
  expect_word(in, "min_samples_leaf");
  e.config.min_samples_leaf = read_int<int>(in);
  expect_word(in, "subsample");
  e.config.subsample = read_double(in);
  expect_word(in, "seed");
  e.config.seed = read_int<std::uint64_t>(in);
  expect_word(in, "trees");
  const auto n_trees = read_int<std::size_t>(in);
  e.trees.reserve(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    expect_word(in, "tree");
    const auto n_nodes = read_int<std::size_t>(in);
    std::vector<RegressionTree::Node> nodes(n_nodes);
    for (auto& node : nodes) {
      std::string kind;
      in >> kind;
      if (kind == "leaf") {
        node.value = read_double(in);
      } else if (kind == "split") {
        node.feature = read_int<int>(in);
        node.threshold = read_double(in);
        node.left = read_int<int>(in);
        node.right = read_int<int>(in);
        node.value = read_double(in);
        if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= e.n_features)
          throw GbtError("model file: split feature out of range");
      } else {
        throw GbtError("model file: unknown node kind '" + kind + "'");
      }
    }
    e.trees.emplace_back(std::move(nodes));
  }
  expect_word(in, "end");
  e.config.validate();
  return e;
}

}  // namespace pitransfer::gbt
