#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pitransfer/gbt.hpp"

using namespace pitransfer;
using namespace pitransfer::gbt;

namespace {

FeatureMatrix random_matrix(std::size_t n, std::size_t p, std::uint64_t seed) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < p; ++j) names.push_back("f" + std::to_string(j));
  FeatureMatrix x(names, n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : x.data) v = u(rng);
  return x;
}

std::vector<double> smooth_target(const FeatureMatrix& x) {
  std::vector<double> y(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) y[i] = std::sin(2.0 * x.at(i, 0)) + x.at(i, 1) * x.at(i, 1);
  return y;
}

double mean_abs_error(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("config validation") {
  GbtConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), GbtError);
  c = {};
  c.subsample = 1.5;
  CHECK_THROWS_AS(c.validate(), GbtError);
  c = {};
  c.max_depth = 0;
  CHECK_THROWS_AS(c.validate(), GbtError);
}

TEST_CASE("constant target is reproduced exactly") {
  const auto x = random_matrix(40, 3, 1);
  const std::vector<double> y(40, 0.7312);
  const Ensemble e = fit(x, y, {});
  for (double p : e.predict(x)) CHECK(p == 0.7312);
  for (const auto& t : e.trees) CHECK(t.leaf_count() == 1);
}

TEST_CASE("single stump matches a brute-force split search") {
  const auto x = random_matrix(60, 2, 5);
  const auto y = smooth_target(x);
  GbtConfig c;
  c.n_rounds = 1;
  c.max_depth = 1;
  c.min_samples_leaf = 1;
  c.learning_rate = 1.0;
  const Ensemble e = fit(x, y, c);

  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 60.0;
  double best = std::numeric_limits<double>::infinity();
  int best_f = -1;
  double best_t = 0.0;
  for (int f = 0; f < 2; ++f) {
    auto vals = x.column(static_cast<std::size_t>(f));
    std::sort(vals.begin(), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double t = 0.5 * (vals[k] + vals[k + 1]);
      double sl = 0, sr = 0, nl = 0, nr = 0;
      for (std::size_t i = 0; i < 60; ++i) {
        const double r = y[i] - mean;
        if (x.at(i, static_cast<std::size_t>(f)) <= t) sl += r, ++nl;
        else sr += r, ++nr;
      }
      double sse = 0;
      for (std::size_t i = 0; i < 60; ++i) {
        const double r = y[i] - mean;
        const double m = x.at(i, static_cast<std::size_t>(f)) <= t ? sl / nl : sr / nr;
        sse += (r - m) * (r - m);
      }
      if (sse < best - 1e-12) best = sse, best_f = f, best_t = t;
    }
  }
  const auto& root = e.trees.at(0).nodes().at(0);
  CHECK(root.feature == best_f);
  CHECK(root.threshold == doctest::Approx(best_t).epsilon(1e-12));
  std::vector<double> pred = e.predict(x);
  double sse = 0;
  for (std::size_t i = 0; i < 60; ++i) sse += (y[i] - pred[i]) * (y[i] - pred[i]);
  CHECK(sse == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("learns the identity") {
  FeatureMatrix x({"x"});
  std::vector<double> y;
  for (int i = 0; i < 200; ++i) {
    const double v = i / 199.0;
    x.push_row(std::vector<double>{v});
    y.push_back(v);
  }
  const Ensemble e = fit(x, y, {});
  CHECK(mean_abs_error(e.predict(x), y) <= 1e-2);
}

TEST_CASE("deep ensembles interpolate distinct points") {
  const auto x = random_matrix(30, 2, 2);
  const auto y = smooth_target(x);
  GbtConfig c;
  c.min_samples_leaf = 1;
  c.max_depth = 8;
  c.learning_rate = 0.5;
  c.n_rounds = 200;
  CHECK(mean_abs_error(fit(x, y, c).predict(x), y) <= 1e-6);
}

TEST_CASE("training loss never increases") {
  const auto x = random_matrix(300, 3, 3);
  const auto y = smooth_target(x);
  FitTrace trace;
  GbtConfig c;
  c.n_rounds = 100;
  fit(x, y, c, &trace);
  REQUIRE(trace.training_loss.size() == 101);
  for (std::size_t k = 1; k < trace.training_loss.size(); ++k)
    CHECK(trace.training_loss[k] <= trace.training_loss[k - 1] * (1.0 + 1e-12));
  CHECK(trace.training_loss.back() < 0.05 * trace.training_loss.front());
}

TEST_CASE("row order does not change the model") {
  const auto x = random_matrix(150, 3, 4);
  const auto y = smooth_target(x);
  std::vector<std::size_t> perm(150);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(11));
  FeatureMatrix xp(x.column_names);
  std::vector<double> yp;
  for (auto i : perm) {
    xp.push_row(x.row(i));
    yp.push_back(y[i]);
  }
  GbtConfig c;
  c.n_rounds = 50;
  const Ensemble a = fit(x, y, c);
  const Ensemble b = fit(xp, yp, c);
  CHECK(a == b);
}

TEST_CASE("thread count does not change the model") {
  const auto x = random_matrix(400, 4, 6);
  const auto y = smooth_target(x);
  GbtConfig c;
  c.n_rounds = 40;
  c.subsample = 0.7;
  c.seed = 17;
  const Ensemble one = fit(x, y, c);
  c.n_threads = 4;
  Ensemble four = fit(x, y, c);
  four.config.n_threads = 1;
  CHECK(one == four);
  CHECK(one.predict(x) == four.predict(x));
}

TEST_CASE("subsampling is seeded") {
  const auto x = random_matrix(200, 2, 7);
  const auto y = smooth_target(x);
  GbtConfig c;
  c.n_rounds = 30;
  c.subsample = 0.5;
  c.seed = 1;
  const Ensemble a = fit(x, y, c);
  CHECK(a == fit(x, y, c));
  c.seed = 2;
  CHECK(!(a == fit(x, y, c)));
}

TEST_CASE("serialization round trip") {
  const auto x = random_matrix(120, 3, 8);
  const auto y = smooth_target(x);
  GbtConfig c;
  c.n_rounds = 25;
  c.seed = 99;
  const Ensemble e = fit(x, y, c);
  std::stringstream ss;
  e.save(ss);
  const Ensemble back = Ensemble::load(ss);
  CHECK(back == e);
  CHECK(back.predict(x) == e.predict(x));

  std::stringstream bad("pitransfer-gbt 7\n");
  CHECK_THROWS_AS(Ensemble::load(bad), GbtError);
  std::stringstream junk("something else");
  CHECK_THROWS_AS(Ensemble::load(junk), GbtError);
}

TEST_CASE("shape and input errors") {
  const auto x = random_matrix(20, 2, 9);
  std::vector<double> y(19, 1.0);
  CHECK_THROWS_AS(fit(x, y, {}), GbtError);
  y.assign(20, 1.0);
  y[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit(x, y, {}), GbtError);
  y[3] = 1.0;
  GbtConfig c;
  c.min_samples_leaf = 11;
  CHECK_THROWS_AS(fit(x, y, c), GbtError);
  const Ensemble e = fit(x, std::vector<double>(20, 2.0), {});
  CHECK_THROWS_AS(e.predict(random_matrix(3, 3, 1)), GbtError);
  CHECK_THROWS_AS(e.predict_row(std::vector<double>{1.0}), GbtError);
}

TEST_CASE("fit_multi equals three single fits") {
  const auto x = random_matrix(100, 2, 10);
  FeatureMatrix y({"a", "b", "c"});
  for (std::size_t i = 0; i < x.rows; ++i)
    y.push_row(std::vector<double>{x.at(i, 0), x.at(i, 1) * 2.0, x.at(i, 0) * x.at(i, 1)});
  GbtConfig c;
  c.n_rounds = 20;
  c.subsample = 0.8;
  c.seed = 5;
  const auto multi = fit_multi(x, y, c);
  for (std::size_t k = 0; k < 3; ++k) {
    GbtConfig ck = c;
    ck.seed = c.seed + k;
    CHECK(multi[k] == fit(x, y.column(k), ck));
  }
  CHECK_THROWS_AS(fit_multi(x, FeatureMatrix({"a"}, 100), c), GbtError);
}
