#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "helpers.hpp"
#include "urbanfuse/core.hpp"
#include "urbanfuse/error.hpp"
#include "urbanfuse/rng.hpp"
#include "urbanfuse/synth.hpp"

using namespace urbanfuse;

namespace {

std::set<std::string> ids_of(const Dataset& d) {
  std::set<std::string> out;
  for (const auto& r : d.reports) out.insert(r.id);
  return out;
}

}  // namespace

TEST_CASE("split of 10 reports at 0.2 gives 8 train and 2 test, disjoint") {
  const auto d = uft::labelled(2, 2, 5);
  const auto s = split_dataset(d, 0.2, 7);
  CHECK(s.train.size() == 8);
  CHECK(s.test.size() == 2);
  const auto a = ids_of(s.train), b = ids_of(s.test);
  for (const auto& id : b) CHECK(a.count(id) == 0);
}

TEST_CASE("split is deterministic for a seed and varies across seeds") {
  const auto d = uft::labelled(4, 8, 12);
  const auto s1 = split_dataset(d, 0.2, 11);
  const auto s2 = split_dataset(d, 0.2, 11);
  CHECK(s1.train == s2.train);
  CHECK(s1.test == s2.test);
  bool differs = false;
  for (std::uint64_t seed = 12; seed < 20 && !differs; ++seed) differs = split_dataset(d, 0.2, seed).test != s1.test;
  CHECK(differs);
}

TEST_CASE("100 reports in 4 classes of 25: each class gives 5 to test") {
  const auto d = uft::labelled(2, 4, 25);
  const auto s = split_dataset(d, 0.2, 3);
  std::map<std::string, int> per_class;
  for (const auto& r : s.test.reports) ++per_class[r.issue_class];
  REQUIRE(per_class.size() == 4);
  for (const auto& [cls, n] : per_class) CHECK(n == 5);
}

TEST_CASE("split is a partition that keeps input order and stratifies") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    Dataset d;
    const std::size_t k = 2 + rng.below(6);
    d.taxonomy = uft::taxonomy(1, k);
    for (std::size_t i = 0; i < 40 + rng.below(80); ++i) {
      d.reports.push_back(uft::report("x" + std::to_string(i), "a b", "2019-01-01T00:00", 52.0, 4.0, "m0",
                                      "i" + std::to_string(rng.below(k))));
    }
    const double frac = 0.1 + 0.3 * rng.uniform01();
    const auto s = split_dataset(d, frac, rng.next_u64());
    CHECK(s.test.size() == static_cast<std::size_t>(std::llround(frac * static_cast<double>(d.size()))));
    auto all = ids_of(s.train);
    for (const auto& id : ids_of(s.test)) CHECK(all.insert(id).second);
    CHECK(all == ids_of(d));
    // Each half keeps the input order.
    for (const auto* half : {&s.train, &s.test}) {
      std::size_t last = 0;
      for (const auto& r : half->reports) {
        const std::size_t pos = std::stoul(r.id.substr(1));
        CHECK(pos >= last);
        last = pos;
      }
    }
    std::map<std::string, std::size_t> count;
    for (const auto& r : d.reports) ++count[r.issue_class];
    const auto train_ids = ids_of(s.train), test_ids = ids_of(s.test);
    for (const auto& [cls, n] : count) {
      if (static_cast<double>(n) < std::ceil(1.0 / frac)) continue;
      bool in_train = false, in_test = false;
      for (const auto& r : s.train.reports) in_train |= r.issue_class == cls;
      for (const auto& r : s.test.reports) in_test |= r.issue_class == cls;
      CHECK(in_train);
      CHECK(in_test);
    }
  }
}

TEST_CASE("singleton classes stay in train") {
  auto d = uft::labelled(1, 3, 10);
  d.taxonomy = uft::taxonomy(1, 4);
  d.reports.push_back(uft::report("lonely", "a b", "2019-01-01T00:00", 52.0, 4.0, "m0", "i3"));
  const auto s = split_dataset(d, 0.2, 1);
  CHECK(ids_of(s.train).count("lonely") == 1);
}

TEST_CASE("split rejects empty datasets and bad fractions") {
  Dataset empty;
  empty.taxonomy = uft::taxonomy(1, 1);
  CHECK_THROWS_AS(split_dataset(empty, 0.2, 1), Error);
  const auto d = uft::labelled(1, 2, 5);
  CHECK_THROWS_AS(split_dataset(d, 0.0, 1), Error);
  CHECK_THROWS_AS(split_dataset(d, 1.0, 1), Error);
}

TEST_CASE("validate_dataset flags range violations and duplicate ids") {
  auto d = uft::labelled(1, 2, 3);
  CHECK(validate_dataset(d).ok());
  d.reports[1].lat = 91.0;
  auto v = validate_dataset(d);
  CHECK(v.error_count() >= 1);
  CHECK(std::any_of(v.issues.begin(), v.issues.end(), [&](const ValidationIssue& i) {
    return i.severity == Severity::error && i.report_id == d.reports[1].id;
  }));

  auto dup = uft::labelled(1, 2, 3);
  dup.reports[2].id = dup.reports[0].id;
  v = validate_dataset(dup);
  CHECK(std::any_of(v.issues.begin(), v.issues.end(), [&](const ValidationIssue& i) {
    return i.severity == Severity::error && i.report_id == dup.reports[0].id;
  }));
}

TEST_CASE("validate_dataset flags unknown labels and reports with no usable modality") {
  auto d = uft::labelled(1, 2, 3);
  d.reports[0].issue_class = "nope";
  CHECK(validate_dataset(d).error_count() >= 1);
  auto e = uft::labelled(1, 2, 3);
  e.reports[0].text.clear();
  e.reports[0].image_ref.reset();
  const auto v = validate_dataset(e);
  CHECK(v.issues.size() >= 1);
  CHECK(v.issues.front().report_id == e.reports[0].id);
}

TEST_CASE("a clean synthetic dataset validates without errors") {
  SynthConfig c;
  c.num_reports = 300;
  CHECK(validate_dataset(generate(c).dataset).error_count() == 0);
}

TEST_CASE("taxonomy must be total, unique and cover every main class") {
  CHECK_THROWS_AS(LabelTaxonomy({"a", "b"}, {{"x", "a"}}), Error);
  CHECK_THROWS_AS(LabelTaxonomy({"a"}, {{"x", "a"}, {"x", "a"}}), Error);
  CHECK_THROWS_AS(LabelTaxonomy({"a"}, {{"x", "zzz"}}), Error);
  const LabelTaxonomy t({"a", "b"}, {{"x", "b"}, {"y", "a"}, {"z", "b"}});
  CHECK(t.main_of_issue(0) == 1);
  CHECK(t.main_name_of_issue("y") == "a");
  CHECK(*t.issue_index("z") == 2);
  CHECK_FALSE(t.main_index("q").has_value());
}

TEST_CASE("label indices follow taxonomy order") {
  const auto d = uft::labelled(2, 4, 2);
  const auto main = label_indices(d, LabelLevel::main);
  const auto issue = label_indices(d, LabelLevel::issue);
  CHECK(issue == std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3});
  CHECK(main == std::vector<int>{0, 0, 1, 1, 0, 0, 1, 1});
}

TEST_CASE("feature blocks reject non-finite values and bad probability rows") {
  const std::vector<std::string> ids{"a", "b"};
  CHECK_NOTHROW(FeatureBlock("x", BlockKind::raw, ids, Matrix(2, 2, 1.0), {"c0", "c1"}));
  Matrix bad(2, 2, 0.5);
  bad(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(FeatureBlock("x", BlockKind::raw, ids, bad, {"c0", "c1"}), Error);
  bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(FeatureBlock("x", BlockKind::raw, ids, bad, {"c0", "c1"}), Error);
  CHECK_THROWS_AS(FeatureBlock("x", BlockKind::raw, ids, Matrix(3, 2), {"c0", "c1"}), Error);
  CHECK_THROWS_AS(FeatureBlock("x", BlockKind::raw, ids, Matrix(2, 2), {"c0"}), Error);

  Matrix p(2, 2, 0.5);
  CHECK_NOTHROW(FeatureBlock("p", BlockKind::probability, ids, p, {"c0", "c1"}));
  p(0, 0) = 0.5 + 1e-8;
  CHECK_THROWS_AS(FeatureBlock("p", BlockKind::probability, ids, p, {"c0", "c1"}), Error);
  p(0, 0) = 1.2;
  p(0, 1) = -0.2;
  CHECK_THROWS_AS(FeatureBlock("p", BlockKind::probability, ids, p, {"c0", "c1"}), Error);
}

TEST_CASE("select_ids reorders rows and reports unknown ids") {
  Matrix m(3, 1);
  m(0, 0) = 1;
  m(1, 0) = 2;
  m(2, 0) = 3;
  const FeatureBlock b("x", BlockKind::raw, {"a", "b", "c"}, m, {"v"});
  const std::vector<std::string> want{"c", "a"};
  const auto s = b.select_ids(want);
  CHECK(s.report_ids() == want);
  CHECK(s.matrix()(0, 0) == 3);
  CHECK(s.matrix()(1, 0) == 1);
  const std::vector<std::string> missing{"zz"};
  try {
    (void)b.select_ids(missing);
    FAIL("expected an alignment error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::alignment);
  }
}

TEST_CASE("derived seeds are stable and label-sensitive") {
  CHECK(derive_seed(1, "split") == derive_seed(1, "split"));
  CHECK(derive_seed(1, "split") != derive_seed(1, "walks"));
  CHECK(derive_seed(1, "split") != derive_seed(2, "split"));
  CHECK(derive_seed(1, 3, 4) != derive_seed(1, 4, 3));
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("calendar helpers") {
  const auto t = LocalDateTime::parse("2018-12-25T09:05:00");
  CHECK(t.weekday() == 1);  // Tuesday
  CHECK(LocalDateTime::parse("1970-01-01").hour_key() == 0);
  CHECK(LocalDateTime::from_hour_key(t.hour_key()) == t.truncated_to_hour());
  CHECK(LocalDateTime::parse("2019-03-04 10:15").to_iso() == "2019-03-04T10:15:00");
  CHECK_THROWS_AS(LocalDateTime::parse("2019-03-04T10:15:00Z"), Error);
  CHECK_THROWS_AS(LocalDateTime::parse("2019-02-30"), Error);
}
