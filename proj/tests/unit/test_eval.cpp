#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "ragaseq/eval.hpp"
#include "support/tempdir.hpp"

using namespace ragaseq;

namespace {

Dataset make_dataset(int ragas, int per_raga) {
  std::vector<ManifestEntry> entries;
  for (int r = 0; r < ragas; ++r)
    for (int i = 0; i < per_raga; ++i) {
      ManifestEntry e;
      e.id = "r" + std::to_string(r) + "_" + std::to_string(i);
      e.token_path = "/tmp/none.txt";
      e.tonic_hz = 140.0;
      e.raga = "raga" + std::to_string(100 + r);
      entries.push_back(e);
    }
  return Dataset(entries);
}

void check_partition(const std::vector<Fold>& folds, const Dataset& ds) {
  std::multiset<std::string> tested;
  for (const auto& f : folds) {
    validate_fold(f, ds);
    CHECK(f.train_ids.size() + f.test_ids.size() == ds.size());
    tested.insert(f.test_ids.begin(), f.test_ids.end());
  }
  CHECK(tested.size() == ds.size());
  CHECK(std::set<std::string>(tested.begin(), tested.end()).size() == ds.size());
}

}  // namespace

TEST_CASE("leave-one-out folds") {
  const auto ds = make_dataset(40, 12);
  const auto folds = loocv_splits(ds);
  CHECK(folds.size() == 12);
  for (const auto& f : folds) CHECK(f.test_ids.size() == 40);
  check_partition(folds, ds);

  CHECK(loocv_splits(make_dataset(5, 4)).size() == 4);
  std::vector<ManifestEntry> uneven(make_dataset(2, 3).entries());
  uneven.pop_back();
  CHECK_THROWS_AS(loocv_splits(Dataset(uneven)), Error);
}

TEST_CASE("stratified k-fold") {
  const auto ds = make_dataset(10, 12);
  const auto folds = stratified_kfold(ds, 12, 5);
  CHECK(folds.size() == 12);
  for (const auto& f : folds) {
    std::map<int, int> per_class;
    for (const auto& id : f.test_ids) ++per_class[ds.class_of(ds.find(id))];
    CHECK(per_class.size() == 10);
    for (const auto& [c, n] : per_class) CHECK(n == 1);
  }
  check_partition(folds, ds);

  const auto five = stratified_kfold(make_dataset(3, 12), 5, 1);
  for (const auto& f : five) CHECK((f.test_ids.size() == 6 || f.test_ids.size() == 9));
  check_partition(five, make_dataset(3, 12));
  CHECK(stratified_kfold(ds, 4, 9)[2].test_ids == stratified_kfold(ds, 4, 9)[2].test_ids);
  CHECK_THROWS_AS(stratified_kfold(make_dataset(2, 3), 4, 0), Error);
}

TEST_CASE("hold-out split") {
  const auto ds = make_dataset(40, 12);
  const auto f = holdout_split(ds, 5, 3);
  CHECK(f.test_ids.size() == 200);
  CHECK(f.train_ids.size() == 280);
  validate_fold(f, ds);
  std::map<int, int> per_class;
  for (const auto& id : f.test_ids) ++per_class[ds.class_of(ds.find(id))];
  for (const auto& [c, n] : per_class) CHECK(n == 5);
  CHECK_THROWS_AS(holdout_split(make_dataset(2, 5), 5, 0), Error);
}

TEST_CASE("fold validation") {
  const auto ds = make_dataset(2, 2);
  CHECK_THROWS_AS(validate_fold({"x", {"r0_0"}, {"r0_0"}}, ds), Error);
  CHECK_THROWS_AS(validate_fold({"x", {"r0_0"}, {"nope"}}, ds), Error);
  CHECK_THROWS_AS(validate_fold({"x", {}, {"r0_0"}}, ds), Error);
}

TEST_CASE("confusion matrix bookkeeping") {
  ConfusionMatrix cm(3);
  cm.add(0, 0);
  cm.add(0, 1);
  cm.add(1, 1);
  cm.add(2, std::nullopt);
  CHECK(cm.total() == 4);
  CHECK(cm.correct() == 2);
  CHECK(cm.accuracy() == 0.5);
  CHECK(cm.abstained(2) == 1);
  CHECK(cm.count(0, 1) == 1);
  ConfusionMatrix other(3);
  other.add(2, 2);
  cm.merge(other);
  CHECK(cm.accuracy() == doctest::Approx(0.6));
  CHECK_THROWS_AS(cm.add(3, 0), Error);

  ragaseq::testing::TempDir dir("cm");
  const std::vector<std::string> labels{"a", "b", "c"};
  cm.write_csv(dir / "cm.csv", labels);
  std::ifstream in(dir / "cm.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "true\\pred,a,b,c,ABSTAIN");
  CHECK(row == "a,1,1,0,0");
}

TEST_CASE("precision at k") {
  CHECK(precision_at_k(std::vector<int>{1, 1, 1}, 1, 3) == 1.0);
  CHECK(precision_at_k(std::vector<int>{0, 2}, 1, 2) == 0.0);
  CHECK(precision_at_k(std::vector<int>{1, 0, 1, 0}, 1, 4) == 0.5);
  CHECK(precision_at_k(std::vector<int>{1, 0, 1, 0, 1}, 1, 2) == 0.5);
  CHECK_THROWS_AS(precision_at_k(std::vector<int>{1}, 1, 2), Error);
  CHECK(average_precision(std::vector<double>{1.0, 0.0}) == 0.5);
  CHECK(average_precision(std::vector<double>{0.3}) == 0.3);
  CHECK(average_precision(std::vector<double>(7, 0.25)) == doctest::Approx(0.25));
  CHECK_THROWS_AS(average_precision(std::vector<double>{}), Error);
}

TEST_CASE("mean and sample standard deviation") {
  const auto s = mean_std(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.stddev == doctest::Approx(1.2909944));
  CHECK(mean_std(std::vector<double>{5.0}).stddev == 0.0);
}
