#include <doctest.h>

#include <cmath>
#include <random>

#include "pitransfer/features.hpp"

using namespace pitransfer;

namespace {

const VehicleSpec kSmall{"small", 0.345, 37.77, 28.84};
const VehicleSpec kLong{"long", 0.853, 22.74, 52.89};
const VehicleSpec kLarge{"large", 0.475, 71.12, 71.12};

ManeuverRecord kin(const VehicleSpec& v, double vi, double a, double delta, FinalPose out = {}) {
  return {v, {vi, a, delta}, out, SourceKind::kinematic};
}

ManeuverRecord dyn(const VehicleSpec& v, double mu, double vi, double a, double delta, FinalPose out = {}) {
  return {v, {vi, a, delta, mu, 9.81}, out, SourceKind::surrogate};
}

FeatureMatrix matrix(std::initializer_list<std::vector<double>> rows) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < rows.begin()->size(); ++j) names.push_back("c" + std::to_string(j));
  FeatureMatrix m(names);
  for (const auto& r : rows) m.push_row(r);
  return m;
}

}  // namespace

TEST_CASE("scheme names") {
  for (Scheme s : all_schemes()) CHECK(parse_scheme(to_string(s)) == s);
  CHECK(to_string(Scheme::pi_augmented) == "pi-aug");
  CHECK_THROWS_AS(parse_scheme("pca4"), FeatureError);
  CHECK(is_pi_scheme(Scheme::pi_fillers));
  CHECK(!is_pi_scheme(Scheme::augmented));
}

TEST_CASE("baseline features") {
  CHECK(baseline_features(kin(kSmall, 1.0, -0.981, 0.0)) == std::vector<double>{1.0, -0.981, 0.0, 0.345});
  CHECK(baseline_features(dyn(kSmall, 0.4, 1.0, -0.981, 0.0)).size() == 8);
  const auto t = raw_targets(kin(kSmall, 1.0, -1.0, 0.0, {0.5, 0.1, 0.2}));
  CHECK(t == std::array<double, 3>{0.5, 0.1, 0.2});
}

TEST_CASE("pi features") {
  const auto p = pi_features(kin(kLong, 2.0, -1.962, 0.3));
  CHECK(p[0] == doctest::Approx(-1.962 * 0.853 / 4.0).epsilon(1e-15));
  CHECK(p[0] == doctest::Approx(-0.4184).epsilon(1e-4));
  CHECK(p[1] == 0.3);
  CHECK(pi_targets(kin(kLong, 2.0, -1.0, 0.0, {0.0, 0.0, 0.0}))[0] == 0.0);

  // equal (a l / v^2, delta) on different vehicles
  const auto a = pi_features(kin(kSmall, 2.0, -0.5 * 4.0 / 0.345, 0.4));
  const auto b = pi_features(kin(kLarge, 3.0, -0.5 * 9.0 / 0.475, 0.4));
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-15));
  CHECK(a[1] == b[1]);

  const auto d = pi_features(dyn(kSmall, 0.4, 2.0, -1.0, 0.2));
  REQUIRE(d.size() == 5);
  CHECK(d[2] == doctest::Approx(37.77 / 28.84).epsilon(1e-15));
  CHECK(d[3] == 0.4);
  CHECK(d[4] == doctest::Approx(9.81 * 0.345 / 4.0).epsilon(1e-15));
}

TEST_CASE("augmented pi features") {
  CHECK(pi_augmented_features(kin(kSmall, 2.0, -1.0, 0.0))[2] == 0.0);
  const auto r = kin(kLong, 2.5, -1.7, 0.35);
  const auto p = pi_augmented_features(r);
  CHECK(p[2] == doctest::Approx(2.5 * 2.5 * std::tan(0.35) / (-1.7 * 0.853)).epsilon(1e-14));
  CHECK(p[2] * p[0] == doctest::Approx(std::tan(0.35)).epsilon(1e-14));

  const auto d = pi_augmented_features(dyn(kLarge, 0.4, 2.0, -0.981 * 2.0, 0.3927));
  REQUIRE(d.size() == 7);
  CHECK(d[5] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d[6] == doctest::Approx(9.81 * 0.4 * 0.475 / (4.0 * std::tan(0.3927))).epsilon(1e-14));
  CHECK(pi_augmented_features(dyn(kLarge, 0.4, 2.0, -1.0, 0.0))[6] == kDefaultPi10Cap);
  CHECK(pi_augmented_features(dyn(kLarge, 0.4, 2.0, -1.0, 0.0), 50.0)[6] == 50.0);
  CHECK_THROWS_AS(pi_augmented_features(kin(kSmall, 1.0, 0.0, 0.1)), FeatureError);
}

TEST_CASE("pi fillers and augmented dimensional features") {
  const auto f = pi_fillers_features(kin(kSmall, 1.5, -2.0, 0.1));
  REQUIRE(f.size() == 4);
  CHECK(f[2] == 1.5);
  CHECK(f[3] == 0.345);
  const auto p = pi_features(kin(kSmall, 1.5, -2.0, 0.1));
  CHECK(std::vector<double>(f.begin(), f.begin() + 2) == p);

  const auto aug = augmented_features(kin(kSmall, 1.5, -2.0, 0.1));
  REQUIRE(aug.size() == 5);
  CHECK(aug[4] * 0.345 / 1.5 == doctest::Approx(std::tan(0.1)).epsilon(1e-14));
  CHECK(augmented_features(kin(kSmall, 1.5, -2.0, 0.0))[4] == 0.0);
}

TEST_CASE("features are invariant under unit rescaling") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    const double lam = u(rng), tau = u(rng), mass = u(rng);
    const double force = mass * lam / (tau * tau);
    ManeuverRecord r = dyn({"v", u(rng), u(rng) * 10, u(rng) * 10}, 0.4, u(rng), -u(rng), 0.3);
    r.outcome = {u(rng), u(rng), 0.5};
    ManeuverRecord s = r;
    s.vehicle.wheelbase_l *= lam;
    s.vehicle.front_normal_Nf *= force;
    s.vehicle.rear_normal_Nr *= force;
    s.inputs.v_i *= lam / tau;
    s.inputs.a *= lam / (tau * tau);
    s.inputs.g *= lam / (tau * tau);
    s.outcome.X *= lam;
    s.outcome.Y *= lam;
    const auto a = pi_augmented_features(r), b = pi_augmented_features(s);
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(b[j] == doctest::Approx(a[j]).epsilon(1e-10));
    const auto ta = pi_targets(r), tb = pi_targets(s);
    for (std::size_t j = 0; j < 3; ++j) CHECK(tb[j] == doctest::Approx(ta[j]).epsilon(1e-10));
  }
}

TEST_CASE("normalizer") {
  const auto n = Normalizer::fit(matrix({{1.0, 0.0}, {-2.0, 0.0}, {0.5, 0.0}}));
  const auto out = n.apply(matrix({{1.0, 0.0}, {-2.0, 0.0}, {0.5, 0.0}, {4.0, 3.0}}));
  CHECK(out.column(0) == std::vector<double>{0.5, -1.0, 0.25, 2.0});
  CHECK(out.column(1) == std::vector<double>{0.0, 0.0, 0.0, 3.0});
  CHECK_THROWS_AS(Normalizer::fit(FeatureMatrix({"a"})), FeatureError);
}

TEST_CASE("pca") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.0, 1.0);
  FeatureMatrix x({"a", "b", "c"});
  for (int i = 0; i < 200; ++i) {
    const double s = z(rng);
    x.push_row(std::vector<double>{s + 0.1 * z(rng), 2.0 * s + z(rng), 5.0 + z(rng)});
  }
  const auto full = PcaModel::fit(x, 3);
  const auto back = full.reconstruct(full.apply(x));
  double sq = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) sq += (back.data[i] - x.data[i]) * (back.data[i] - x.data[i]);
  CHECK(std::sqrt(sq / static_cast<double>(x.data.size())) <= 1e-10);
  CHECK(full.explained_variance_ratio() == doctest::Approx(1.0).epsilon(1e-12));
  const auto& ev = full.eigenvalues();
  CHECK(ev[0] >= ev[1]);
  CHECK(ev[1] >= ev[2]);

  FeatureMatrix line({"a", "b"});
  for (int i = 0; i < 20; ++i) line.push_row(std::vector<double>{double(i), 3.0 * i + 1.0});
  const auto one = PcaModel::fit(line, 1);
  CHECK(one.explained_variance_ratio() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(one.loading(0, 0) > 0.0);

  CHECK_THROWS_AS(PcaModel::fit(x, 0), FeatureError);
  CHECK_THROWS_AS(PcaModel::fit(x, 4), FeatureError);
  CHECK_THROWS_AS(PcaModel::fit(matrix({{1.0, 2.0}, {2.0, 1.0}}), 1), FeatureError);
}

TEST_CASE("pipelines") {
  std::vector<ManeuverRecord> train;
  for (int i = 1; i <= 30; ++i) train.push_back(kin(i % 2 ? kSmall : kLarge, 0.1 * i, -0.5 * (i % 5 + 1), 0.02 * i, {0.1 * i, 0.01 * i, 0.001 * i}));

  Pipeline pca(Scheme::pca2, SourceKind::kinematic);
  CHECK(pca.needs_fit());
  CHECK_THROWS_AS(pca.inputs(train), FeatureError);
  pca.fit(train);
  CHECK(pca.inputs(train).cols() == 2);
  CHECK(Pipeline(Scheme::pca3, SourceKind::kinematic).needs_fit());

  Pipeline base(Scheme::baseline, SourceKind::kinematic);
  CHECK(!base.needs_fit());
  CHECK(base.inputs(train).cols() == 4);
  CHECK(Pipeline(Scheme::augmented, SourceKind::kinematic).inputs(train).cols() == 5);
  CHECK(Pipeline(Scheme::pi_augmented, SourceKind::kinematic).inputs(train).cols() == 3);
  CHECK(Pipeline(Scheme::pi_fillers, SourceKind::kinematic).inputs(train).cols() == 4);
  CHECK(Pipeline(Scheme::pi_augmented, SourceKind::surrogate).input_names().size() == 7);

  std::vector<ManeuverRecord> wrong{dyn(kSmall, 0.4, 1.0, -1.0, 0.0)};
  CHECK_THROWS_AS(base.inputs(wrong), FeatureError);

  Pipeline pi(Scheme::pi, SourceKind::kinematic);
  const auto t = pi.targets(train);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::array<double, 3> pred{t.at(i, 0), t.at(i, 1), t.at(i, 2)};
    const FinalPose back = pi.inverse_targets(pred, train[i]);
    CHECK(back.X == doctest::Approx(train[i].outcome.X).epsilon(1e-14));
    CHECK(back.Y == doctest::Approx(train[i].outcome.Y).epsilon(1e-14));
    CHECK(back.theta == doctest::Approx(train[i].outcome.theta).epsilon(1e-14));
  }
}

TEST_CASE("inverse targets") {
  const std::array<double, 3> pred{2.0, 1.0, 0.3};
  const FinalPose p = inverse_targets(Scheme::pi, pred, kin(kLarge, 1.0, -1.0, 0.0));
  CHECK(p.X == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(p.Y == doctest::Approx(0.475).epsilon(1e-15));
  CHECK(p.theta == 0.3);
  CHECK(inverse_targets(Scheme::baseline, pred, kin(kLarge, 1.0, -1.0, 0.0)) == FinalPose{2.0, 1.0, 0.3});
  CHECK_THROWS_AS(inverse_targets(Scheme::pi, std::vector<double>{1.0}, kin(kLarge, 1.0, -1.0, 0.0)), FeatureError);
}
