#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "emtl/bench.hpp"
#include "emtl/error.hpp"
#include "emtl/io.hpp"
#include "helpers.hpp"

using namespace emtl;
using namespace emtl::test;

namespace {

ExperimentConfig small_toy() {
  ExperimentConfig c = ExperimentConfig::defaults_for(DatasetChoice::toy);
  c.methods = {Method::naive, Method::em, Method::retrain, Method::gmlvq_transfer};
  c.n_grid = {4, 16};
  c.folds = 3;
  c.n_per_class = 40;
  c.test_per_class = 40;
  c.lvq.epochs = 20;
  c.measure_time = false;
  c.seed = 5;
  return c;
}

std::string report_text(const ExperimentReport& r) {
  std::ostringstream out;
  write_report_csv(r, out);
  return out.str();
}

LvqModel toy_prototypes() {
  LvqModel m;
  m.prototypes = mat(3, 2, {-1, 0, 0, 0, 1, 0});
  m.labels = {1, 2, 3};
  m.omegas = {mat(2, 2, {1, 0.2, -0.3, 0.8})};
  return m;
}

}  // namespace

TEST_CASE("method and dataset names") {
  for (const Method m : {Method::source, Method::source_loc, Method::naive, Method::naive_loc, Method::em,
                         Method::em_loc, Method::retrain, Method::retrain_loc, Method::gmlvq_transfer}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK(!parse_method("svm"));
  CHECK(parse_dataset("cigars") == DatasetChoice::cigars);
  CHECK(!parse_dataset("emg"));
}

TEST_CASE("protocol defaults per dataset") {
  const ExperimentConfig toy = ExperimentConfig::defaults_for(DatasetChoice::toy);
  CHECK(toy.n_grid == std::vector<int>{4, 8, 16, 32, 64});
  CHECK(toy.folds == 10);
  CHECK(toy.excluded_classes == std::vector<int>{3});
  const ExperimentConfig cigars = ExperimentConfig::defaults_for(DatasetChoice::cigars);
  CHECK(cigars.folds == 30);
  CHECK(std::find(cigars.n_grid.begin(), cigars.n_grid.end(), 12) != cigars.n_grid.end());
  CHECK(cigars.n_per_class == 1000);
}

TEST_CASE("config text parsing") {
  const ExperimentConfig c = parse_experiment_config(
      "# cigars run\n"
      "dataset = cigars\n"
      "methods = em_loc, retrain\n"
      "n_grid = 4,12\n"
      "folds = 3   # short\n"
      "exclude_classes = 2\n"
      "seed = 9\n"
      "sigma = 0.25\n"
      "epsilon = 1e-6\n"
      "relative_epsilon = false\n"
      "ridge = 0\n"
      "measure_time = false\n"
      "out = report.csv\n");
  CHECK(c.dataset == DatasetChoice::cigars);
  CHECK(c.methods == std::vector<Method>{Method::em_loc, Method::retrain});
  CHECK(c.n_grid == std::vector<int>{4, 12});
  CHECK(c.folds == 3);
  CHECK(c.excluded_classes == std::vector<int>{2});
  CHECK(c.seed == 9);
  CHECK(c.sigma == 0.25);
  CHECK(c.transfer.epsilon == 1e-6);
  CHECK(!c.transfer.relative_epsilon);
  CHECK(c.transfer.ridge == 0.0);
  CHECK(!c.measure_time);
  CHECK(c.output_path == "report.csv");
  CHECK(c.n_per_class == 1000);

  CHECK_THROWS_AS(parse_experiment_config("colour = blue\n"), Error);
  CHECK_THROWS_AS(parse_experiment_config("folds\n"), Error);
  CHECK_THROWS_AS(parse_experiment_config("methods = em, svm\n"), Error);
  CHECK_THROWS_AS(parse_experiment_config("folds = many\n"), Error);
}

TEST_CASE("config validation") {
  ExperimentConfig c = small_toy();
  c.n_grid = {8, 4};
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_toy();
  c.folds = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_toy();
  c.methods.clear();
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_toy();
  c.dataset = DatasetChoice::csv;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(run_experiment(c), Error);
}

TEST_CASE("identical configs give identical reports") {
  const ExperimentConfig c = small_toy();
  const ExperimentReport a = run_experiment(c);
  const ExperimentReport b = run_experiment(c);
  CHECK(report_text(a) == report_text(b));

  ExperimentConfig threaded = c;
  threaded.threads = 3;
  CHECK(report_text(run_experiment(threaded)) == report_text(a));

  for (std::size_t m = 0; m < a.methods.size(); ++m) {
    for (std::size_t i = 0; i < a.n_grid.size(); ++i) {
      const MethodStats& s = a.stats[m][i];
      CHECK(s.err_mean >= 0.0);
      CHECK(s.err_mean <= 1.0);
      CHECK(s.err_std >= 0.0);
      CHECK(s.folds + s.failures == c.folds);
      CHECK(s.time_mean == 0.0);
    }
  }
}

TEST_CASE("naive error does not depend on N") {
  const ExperimentReport r = run_experiment(small_toy());
  const auto m = static_cast<std::size_t>(
      std::find(r.methods.begin(), r.methods.end(), Method::naive) - r.methods.begin());
  for (int fold = 0; fold < 3; ++fold) {
    CHECK(r.fold_errors[m][0][static_cast<std::size_t>(fold)] == r.fold_errors[m][1][static_cast<std::size_t>(fold)]);
  }
}

TEST_CASE("timed runs record positive adaptation times") {
  ExperimentConfig c = small_toy();
  c.measure_time = true;
  c.methods = {Method::em, Method::retrain};
  c.n_grid = {8};
  const ExperimentReport r = run_experiment(c);
  CHECK(r.at(Method::em, 8).time_mean > 0.0);
  CHECK(r.at(Method::retrain, 8).time_mean > 0.0);
  CHECK_THROWS_AS(r.at(Method::naive, 8), Error);
  CHECK_THROWS_AS(r.at(Method::em, 9), Error);
}

TEST_CASE("method failures are counted per fold") {
  ExperimentConfig c = ExperimentConfig::defaults_for(DatasetChoice::custom);
  c.custom_source = toy_source_spec();
  c.custom_source.means.pop_back();
  c.custom_source.covariances.pop_back();
  c.custom_source.labels.pop_back();
  c.custom_target = toy_target_spec();
  c.methods = {Method::naive, Method::em};
  c.n_grid = {6};
  c.folds = 2;
  c.n_per_class = 20;
  c.lvq.epochs = 5;
  c.measure_time = false;
  const ExperimentReport r = run_experiment(c);
  CHECK(r.at(Method::naive, 6).failures == 0);
  CHECK(r.at(Method::naive, 6).folds == 2);
  CHECK(r.at(Method::em, 6).failures == 2);
  CHECK(r.at(Method::em, 6).folds == 0);
  CHECK(!r.failure_messages.empty());
  CHECK(std::isnan(r.fold_errors[1][0][0]));
}

TEST_CASE("report is written when an output path is set") {
  ExperimentConfig c = small_toy();
  c.methods = {Method::naive};
  c.n_grid = {4};
  c.output_path = (std::filesystem::temp_directory_path() / "emtl_test_bench_report.csv").string();
  const ExperimentReport r = run_experiment(c);
  const ExperimentReport back = read_report_csv(c.output_path);
  std::filesystem::remove(c.output_path);
  CHECK(back.methods == r.methods);
  CHECK(back.stats[0][0].err_mean == r.stats[0][0].err_mean);
}

TEST_CASE("CSV datasets run through the harness") {
  const auto dir = std::filesystem::temp_directory_path();
  ExperimentConfig c = ExperimentConfig::defaults_for(DatasetChoice::csv);
  c.source_csv = (dir / "emtl_test_bench_source.csv").string();
  c.target_csv = (dir / "emtl_test_bench_target.csv").string();
  write_dataset_csv(toy_source(30, 1), c.source_csv);
  write_dataset_csv(toy_target(30, 2), c.target_csv);
  c.methods = {Method::naive, Method::em};
  c.n_grid = {6, 12};
  c.folds = 2;
  c.lvq.epochs = 20;
  c.measure_time = false;
  const ExperimentReport r = run_experiment(c);
  std::filesystem::remove(c.source_csv);
  std::filesystem::remove(c.target_csv);
  CHECK(r.at(Method::em, 12).folds == 2);
  CHECK(r.at(Method::em, 12).err_mean < r.at(Method::naive, 12).err_mean);
}

TEST_CASE("composite GLVQ cost gradient matches central differences") {
  std::mt19937_64 rng(4);
  const LvqModel model = toy_prototypes();
  const Dataset target = toy_target(5, 3);
  const Sigmoid phi;
  for (int t = 0; t < 10; ++t) {
    const Matrix H = Matrix::Identity(2, 2) + random_matrix(2, 2, rng, 0.3);
    Matrix grad;
    const double cost = glvq_transfer_cost(model, target, H, phi, &grad);
    CHECK(cost == doctest::Approx(glvq_cost(model, Dataset{target.points * H.transpose(), target.labels})));
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < H.size(); ++i) {
      Matrix plus = H;
      Matrix minus = H;
      plus.data()[i] += h;
      minus.data()[i] -= h;
      const double numeric =
          (glvq_transfer_cost(model, target, plus, phi) - glvq_transfer_cost(model, target, minus, phi)) / (2 * h);
      CHECK(grad.data()[i] == doctest::Approx(numeric).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("GMLVQ transfer on aligned data keeps the source error") {
  const LvqModel model = toy_prototypes();
  const Dataset train = toy_source(30, 6);
  const Dataset test = toy_source(100, 7);
  const GmlvqTransferResult r = baseline_gmlvq_transfer(model, train, test);
  CHECK(std::abs(r.error - lvq_error(model, test)) <= 0.05);
  CHECK(baseline_naive(model, test) == lvq_error(model, test));
}
