#include <doctest.h>

#include <numeric>
#include <sstream>

#include "urbanfuse/error.hpp"
#include "urbanfuse/eval.hpp"

using namespace urbanfuse;

TEST_CASE("confusion matrix and per-class scores for a hand example") {
  const std::vector<std::size_t> y{0, 0, 0, 1, 1, 2};
  const std::vector<std::size_t> p{0, 0, 1, 1, 2, 2};
  const auto cm = confusion(y, p, 3, {"a", "b", "c"});
  CHECK(cm(0, 0) == 2);
  CHECK(cm(0, 1) == 1);
  CHECK(cm(1, 2) == 1);
  CHECK(cm.total() == 6);
  const auto r = f1_report(cm);
  // a: P 1, R 2/3; b: P 1/2, R 1/2; c: P 1/2, R 1.
  CHECK(r.per_class[0].f1 == doctest::Approx(0.8));
  CHECK(r.per_class[1].f1 == doctest::Approx(0.5));
  CHECK(r.per_class[2].f1 == doctest::Approx(2.0 / 3));
  CHECK(r.macro_f1 == doctest::Approx((0.8 + 0.5 + 2.0 / 3) / 3));
  CHECK(r.weighted_f1 == doctest::Approx((3 * 0.8 + 2 * 0.5 + 2.0 / 3) / 6));
  CHECK(r.accuracy == doctest::Approx(4.0 / 6));
  CHECK(r.micro_f1 == doctest::Approx(r.accuracy));
}

TEST_CASE("f1 edge cases") {
  CHECK(f1_score(0.0, 0.0) == 0.0);
  CHECK(f1_score(1.0, 1.0) == 1.0);
  CHECK(f1_score(0.5, 1.0) == doctest::Approx(2.0 / 3));
  ConfusionMatrix empty;
  empty.num_classes = 2;
  empty.counts.assign(4, 0);
  CHECK_THROWS_AS(f1_report(empty), Error);
  const std::vector<std::size_t> y{0, 3};
  CHECK_THROWS_AS(confusion(y, y, 3), Error);
}

TEST_CASE("classes without support are left out of the averages") {
  const std::vector<std::size_t> y{0, 0, 1, 1};
  const std::vector<std::size_t> p{0, 0, 1, 2};
  const auto r = f1_report(confusion(y, p, 3));
  CHECK(r.per_class[2].support == 0);
  CHECK(r.macro_f1 == doctest::Approx((1.0 + 2.0 / 3) / 2));
}

TEST_CASE("weighted f1 does not depend on class numbering") {
  const std::vector<std::size_t> y{0, 1, 2, 2, 1, 0, 0, 2, 1, 1};
  const std::vector<std::size_t> p{0, 2, 2, 1, 1, 0, 1, 2, 1, 0};
  const std::size_t perm[] = {2, 0, 1};
  std::vector<std::size_t> yp, pp;
  for (std::size_t i = 0; i < y.size(); ++i) {
    yp.push_back(perm[y[i]]);
    pp.push_back(perm[p[i]]);
  }
  const auto a = f1_report(confusion(y, p, 3));
  const auto b = f1_report(confusion(yp, pp, 3));
  CHECK(a.weighted_f1 == doctest::Approx(b.weighted_f1).epsilon(1e-15));
  CHECK(a.macro_f1 == doctest::Approx(b.macro_f1).epsilon(1e-15));
}

TEST_CASE("per-class table ranks classes by support") {
  const std::vector<std::size_t> y{0, 1, 1, 2, 2, 2};
  const std::vector<std::size_t> good{0, 1, 1, 2, 2, 2}, bad{1, 1, 0, 2, 0, 2};
  const std::vector<std::string> labels{"a", "b", "c"};
  const std::vector<std::pair<std::string, ConfusionMatrix>> results{
      {"good", confusion(y, good, 3, labels)}, {"bad", confusion(y, bad, 3, labels)}};
  const auto t = per_class_table(results);
  CHECK(t.class_labels == std::vector<std::string>{"c", "b", "a"});
  CHECK(t.columns == std::vector<std::string>{"good", "bad"});
  CHECK(t.f1.rows() == 3);
  CHECK(t.f1.cols() == 2);
  CHECK(t.f1(0, 0) == 1.0);
  CHECK(t.f1(0, 1) == doctest::Approx(0.8));
  CHECK(std::accumulate(t.support.begin(), t.support.end(), 0.0) == doctest::Approx(1.0));
  CHECK(t.support[0] == doctest::Approx(0.5));

  const auto top = per_class_table(results, 2);
  CHECK(top.class_labels == std::vector<std::string>{"c", "b"});

  auto mismatched = results;
  mismatched[1].second.class_labels = {"x", "y", "z"};
  CHECK_THROWS_AS(per_class_table(mismatched), Error);

  std::ostringstream csv;
  write_per_class_csv(csv, t);
  CHECK(csv.str().rfind("class,support,good,bad\n", 0) == 0);
}

TEST_CASE("holdout scorer") {
  const HoldoutScorer s({0, 1, 1, 0}, {"a", "b"});
  CHECK(s.size() == 4);
  CHECK(s.num_classes() == 2);
  const std::vector<std::size_t> p{0, 1, 0, 0};
  CHECK(s.score(p).accuracy == doctest::Approx(0.75));
  const Matrix proba(4, 2, {0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.5, 0.5});
  CHECK(s.score_proba(proba).accuracy == doctest::Approx(0.75));
  const std::vector<std::size_t> short_pred{0};
  CHECK_THROWS_AS(s.score(short_pred), Error);
}

TEST_CASE("report formats") {
  CHECK(format_metric(0.5) == "0.500000");
  const auto r = f1_report(confusion(std::vector<std::size_t>{0, 1}, std::vector<std::size_t>{0, 1}, 2));
  std::ostringstream csv;
  write_report_csv(csv, r, {"a", "b"});
  CHECK(csv.str().rfind("class,precision,recall,f1,support\n", 0) == 0);
  CHECK(format_report_text(r, {"a", "b"}).find("1.0000") != std::string::npos);
}
