#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pitransfer/experiments.hpp"

using namespace pitransfer;
using namespace pitransfer::experiments;

namespace {

// Every 10th grid point keeps the study quick while covering the whole grid.
std::vector<Dataset> thinned_kinematic() {
  const auto reg = VehicleRegistry::defaults();
  std::vector<Dataset> out;
  for (const auto& v : reg.vehicles()) {
    Dataset full = kinematic_grid(v);
    Dataset d = full;
    d.records.clear();
    for (std::size_t i = 0; i < full.size(); i += 10) d.records.push_back(full.records[i]);
    out.push_back(std::move(d));
  }
  return out;
}

ExperimentOptions quick_options() {
  ExperimentOptions o;
  o.gbt.n_rounds = 30;
  o.seed = 7;
  return o;
}

const std::vector<Dataset>& data() {
  static const auto d = thinned_kinematic();
  return d;
}

const ExperimentReport& pi_report() {
  static const auto r = run_matrix(data(), Scheme::pi, quick_options());
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("mean absolute error") {
  const std::vector<FinalPose> actual{{0, 0, 0}, {1, 1, 1}};
  const std::vector<FinalPose> pred{{1, 0, 0}, {1, 3, 0.5}};
  const Mae m = mae(actual, pred);
  CHECK(m.x == 0.5);
  CHECK(m.y == 1.0);
  CHECK(m.theta == 0.25);
  CHECK(m.mean() == doctest::Approx(1.75 / 3.0));
  CHECK(m.component(2) == 0.25);
  CHECK_THROWS_AS(mae(actual, std::vector<FinalPose>{{}}), ExperimentError);
  CHECK_THROWS_AS(mae(std::vector<FinalPose>{}, std::vector<FinalPose>{}), ExperimentError);
}

TEST_CASE("output names") {
  CHECK(parse_output("X") == 0);
  CHECK(parse_output("y") == 1);
  CHECK(parse_output("theta") == 2);
  CHECK(output_name(1) == "Y");
  CHECK_THROWS(parse_output("z"));
}

TEST_CASE("matrix layout and summary") {
  const auto& r = pi_report();
  REQUIRE(r.cells.size() == 12);
  CHECK(r.vehicles == std::vector<std::string>{"small", "long", "large"});
  int counts[3] = {0, 0, 0};
  for (const auto& c : r.cells) {
    ++counts[static_cast<int>(c.kind)];
    if (c.model_vehicle == kMergedModel) CHECK(c.kind == CellKind::shared);
    else if (c.model_vehicle == c.data_vehicle) CHECK(c.kind == CellKind::self);
    else CHECK(c.kind == CellKind::cross);
  }
  CHECK(counts[0] == 3);
  CHECK(counts[1] == 6);
  CHECK(counts[2] == 3);

  Mae sums[3];
  for (const auto& c : r.cells) {
    auto& s = sums[static_cast<int>(c.kind)];
    s.x += c.mae.x;
    s.y += c.mae.y;
    s.theta += c.mae.theta;
  }
  const Mae* got[3] = {&r.summary.self, &r.summary.cross, &r.summary.shared};
  for (int k = 0; k < 3; ++k) {
    CHECK(got[k]->x == doctest::Approx(sums[k].x / counts[k]).epsilon(1e-14));
    CHECK(got[k]->y == doctest::Approx(sums[k].y / counts[k]).epsilon(1e-14));
    CHECK(got[k]->theta == doctest::Approx(sums[k].theta / counts[k]).epsilon(1e-14));
  }
  CHECK(&r.cell("long", "small") != nullptr);
  CHECK_THROWS(r.cell("nobody", "small"));
}

TEST_CASE("leakage audit") {
  const auto& r = pi_report();
  CHECK(audit_leakage(r).empty());

  std::set<RecordKey> test_keys;
  for (const auto& t : r.tests) test_keys.insert(t.test_keys.begin(), t.test_keys.end());
  for (const auto& m : r.models)
    for (const auto& k : m.train_keys) CHECK(test_keys.count(k) == 0);

  ExperimentReport tampered = r;
  tampered.models.front().train_keys.push_back(tampered.tests.front().test_keys.front());
  CHECK(!audit_leakage(tampered).empty());

  ExperimentReport foreign = r;
  auto& self_model = foreign.models.front();
  const auto other = std::find_if(foreign.models.begin(), foreign.models.end(),
                                  [&](const TrainingProvenance& m) { return m.model != self_model.model; });
  self_model.train_keys.push_back(other->train_keys.front());
  CHECK(!audit_leakage(foreign).empty());
}

TEST_CASE("matrix runs are deterministic") {
  const auto again = run_matrix(data(), Scheme::pi, quick_options());
  CHECK(matrix_csv(again) == matrix_csv(pi_report()));
  CHECK(matrix_markdown(again) == matrix_markdown(pi_report()));
}

TEST_CASE("csv report format") {
  const std::string csv = matrix_csv(pi_report());
  CHECK(csv.rfind("model,data,kind,mae_x,mae_y,mae_theta\n", 0) == 0);
  CHECK(csv.find("summary,mean,shared,") != std::string::npos);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 1 + 12 + 3);
  CHECK(matrix_markdown(pi_report()).find("**") != std::string::npos);
}

TEST_CASE("learning curve at fraction one equals the self cell") {
  const std::vector<double> fractions{0.25, 1.0};
  const auto curve = learning_curve(data()[1], Scheme::pi, fractions, 2, quick_options());
  REQUIRE(curve.points.size() == 2);
  const auto& self = pi_report().cell("long", "long");
  CHECK(curve.points[1].mae.x == doctest::Approx(self.mae.x).epsilon(1e-14));
  CHECK(curve.points[1].mae.y == doctest::Approx(self.mae.y).epsilon(1e-14));
  CHECK(curve.points[1].mae.theta == doctest::Approx(self.mae.theta).epsilon(1e-14));
  CHECK(curve.points[0].train_rows < curve.points[1].train_rows);
  CHECK(curve_csv(curve).rfind("fraction,mae_x,mae_y,mae_theta\n", 0) == 0);

  const std::vector<double> bad{0.0};
  CHECK_THROWS_AS(learning_curve(data()[1], Scheme::pi, bad, 1, quick_options()), ExperimentError);
  const std::vector<double> tiny{0.001};
  CHECK_THROWS_AS(learning_curve(data()[1], Scheme::pi, tiny, 1, quick_options()), ExperimentError);
}

TEST_CASE("comparative study agrees with the matrix") {
  const std::vector<Scheme> schemes{Scheme::pi};
  const auto cmp = comparative_study(data(), "small", 1, quick_options(), schemes);
  CHECK(cmp.training_sources == std::vector<std::string>{"own", "long", "large", "merged"});
  REQUIRE(cmp.entries.size() == 4);
  const auto& r = pi_report();
  CHECK(cmp.at(Scheme::pi, "own") == doctest::Approx(r.cell("small", "small").mae.y).epsilon(1e-14));
  CHECK(cmp.at(Scheme::pi, "long") == doctest::Approx(r.cell("long", "small").mae.y).epsilon(1e-14));
  CHECK(cmp.at(Scheme::pi, "merged") == doctest::Approx(r.cell(kMergedModel, "small").mae.y).epsilon(1e-14));
  CHECK(cmp.transfer_mae(Scheme::pi) ==
        doctest::Approx((cmp.at(Scheme::pi, "long") + cmp.at(Scheme::pi, "large")) / 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(comparative_study(data(), "nobody", 1, quick_options(), schemes), ExperimentError);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(run_matrix(std::vector<Dataset>{}, Scheme::pi, quick_options()), ExperimentError);
  std::vector<Dataset> dup{data()[0], data()[0]};
  CHECK_THROWS_AS(run_matrix(dup, Scheme::pi, quick_options()), ExperimentError);
}

TEST_CASE("emitted reports are byte identical on re-emit") {
  const auto dir = std::filesystem::temp_directory_path() / "pitransfer_emit_test";
  std::filesystem::remove_all(dir);
  const auto first = emit_report(pi_report(), dir / "a");
  const auto second = emit_report(run_matrix(data(), Scheme::pi, quick_options()), dir / "b");
  REQUIRE(first.size() == 2);
  REQUIRE(second.size() == 2);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].filename() == second[i].filename());
    CHECK(slurp(first[i]) == slurp(second[i]));
    CHECK(!slurp(first[i]).empty());
  }
  std::filesystem::remove_all(dir);
}
