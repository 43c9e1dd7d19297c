#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "stagdid/io.hpp"
#include "stagdid/panel.hpp"

using namespace stagdid;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string("stagdid_test_") + name + ".csv";
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("validate accepts a minimal staggered panel") {
  Panel p;
  p.periods = 2;
  p.groups = {fixtures::group("a", {0, 1}, {0, 1}), fixtures::group("b", {0, 0}, {0, 0})};
  const auto rep = validate(p);
  CHECK(rep.ok());
  CHECK(rep.warnings.size() == 1);  // the observed switch between periods 1 and 2
  CHECK(rep.warnings[0].code == "initial_period_switch");
  CHECK(rep.cohort_table.at("a") == 2);
  CHECK(rep.cohort_table.at("b") == 0);
}

TEST_CASE("validate flags non-monotone treatment as an error") {
  Panel p;
  p.periods = 2;
  p.groups = {fixtures::group("a", {0, 1}, {1, 0}), fixtures::group("b", {0, 0}, {0, 0})};
  const auto rep = validate(p);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.errors[0].code == "non_monotone_treatment");
}

TEST_CASE("validate warns when a switch has no comparison group") {
  Panel p;
  p.periods = 3;
  p.groups = {fixtures::group("a", {0, 1, 2}, {0, 1, 1}),
              fixtures::group("b", {0, 1, 2}, {0, 1, 1})};
  const auto rep = validate(p);
  CHECK(rep.ok());
  bool found = false;
  for (const auto& w : rep.warnings)
    if (w.code == "no_comparison_group" && w.period == 2) found = true;
  CHECK(found);
}

TEST_CASE("validate rejects duplicate ids, bad lengths, nonpositive cells") {
  Panel p;
  p.periods = 2;
  p.groups = {fixtures::group("a", {0, 1}, {0, 0}), fixtures::group("a", {0, 1}, {0, 0})};
  CHECK_FALSE(validate(p).ok());

  Panel q;
  q.periods = 3;
  q.groups = {fixtures::group("a", {0, 1}, {0, 0}), fixtures::group("b", {0, 1, 2}, {0, 0, 0})};
  CHECK_FALSE(validate(q).ok());

  Panel r;
  r.periods = 2;
  r.groups = {fixtures::group("a", {0, 1}, {0, 0}, {1, 0}),
              fixtures::group("b", {0, 1}, {0, 0})};
  CHECK_FALSE(validate(r).ok());
}

TEST_CASE("cell counts on single switcher and all-never panels") {
  Panel p;
  p.periods = 2;
  p.groups = {fixtures::group("a", {0, 1}, {0, 1}, {3, 3}),
              fixtures::group("b", {0, 0}, {0, 0})};
  auto cc = cell_counts(p);
  CHECK(cc.n10[2] == 3.0);
  CHECK(cc.n_s == 3.0);

  Panel q;
  q.periods = 3;
  q.groups = {fixtures::group("a", {0, 0, 0}, {0, 0, 0}),
              fixtures::group("b", {0, 0, 0}, {0, 0, 0})};
  cc = cell_counts(q);
  CHECK(cc.n_s == 0.0);
  for (int t = 2; t <= 3; ++t) {
    CHECK(cc.n10[t] == 0.0);
    CHECK(cc.n00[t] == 2.0);
  }
}

TEST_CASE("cell counts on the three-group fixture, by hand") {
  const auto cc = cell_counts(fixtures::f1());
  CHECK(cc.n10[2] == 1.0);
  CHECK(cc.n00[2] == 2.0);
  CHECK(cc.n10[3] == 1.0);
  CHECK(cc.n00[3] == 1.0);
  CHECK(cc.n_s == 2.0);
  CHECK(cc.n1_10[1] == 1.0);  // B's period-1 cell, ahead of its switch at 2
  CHECK(cc.n1_00[1] == 2.0);
  CHECK(cc.n1_10[2] == 1.0);  // A's period-2 cell, ahead of its switch at 3
  CHECK(cc.n1_00[2] == 1.0);
  CHECK(cc.n1_11[1] == 0.0);
  CHECK(cc.n1_11[2] == 1.0);  // B treated at 2 and 3
  CHECK(cc.n1_10[3] == 0.0);  // nothing beyond the last period
}

TEST_CASE("cell counts are invariant to group order and sum to n_s") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Panel p = fixtures::random_panel(seed, 10, 5, true);
    auto cc = cell_counts(p);
    double total = 0.0;
    for (int t = 2; t <= p.periods; ++t) total += cc.n10[t];
    CHECK(total == cc.n_s);

    Panel shuffled = p;
    std::mt19937_64 rng(seed);
    std::shuffle(shuffled.groups.begin(), shuffled.groups.end(), rng);
    auto cc2 = cell_counts(shuffled);
    for (int t = 1; t <= p.periods; ++t) {
      CHECK(cc.n10[t] == cc2.n10[t]);
      CHECK(cc.n00[t] == cc2.n00[t]);
      CHECK(cc.n1_10[t] == cc2.n1_10[t]);
      CHECK(cc.n1_11[t] == cc2.n1_11[t]);
    }
  }
}

TEST_CASE("restrict_to_cohort selects switchers and comparisons") {
  const auto p = fixtures::f1();
  const auto sub = restrict_to_cohort(p, 3, ComparisonKind::kNeverTreated);
  REQUIRE(sub.groups.size() == 2);
  CHECK(sub.groups[0].id == "A");
  CHECK(sub.groups[1].id == "C");
  CHECK(sub.periods == 3);
  CHECK(validate(sub).ok());

  // A is untreated through period 2, so under not-yet-treated it joins C
  const auto sub2 = restrict_to_cohort(p, 2, ComparisonKind::kNotYetTreated);
  CHECK(sub2.groups.size() == 3);

  Panel no_cohort;
  no_cohort.periods = 3;
  no_cohort.groups = {fixtures::group("a", {0, 1, 2}, {0, 0, 1}),
                      fixtures::group("b", {0, 1, 2}, {0, 0, 0})};
  CHECK_THROWS_AS(restrict_to_cohort(no_cohort, 2, ComparisonKind::kNeverTreated), PanelError);

  Panel no_comparison;
  no_comparison.periods = 3;
  no_comparison.groups = {fixtures::group("a", {0, 1, 2}, {0, 0, 1}),
                          fixtures::group("b", {0, 1, 2}, {0, 1, 1})};
  CHECK_THROWS_AS(restrict_to_cohort(no_comparison, 3, ComparisonKind::kNeverTreated),
                  PanelError);
}

TEST_CASE("restricted cohort panels stay valid") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Panel p = fixtures::random_panel(seed, 14, 6);
    REQUIRE(validate(p).ok());
    for (int t = 2; t <= p.periods; ++t) {
      Panel sub;
      try {
        sub = restrict_to_cohort(p, t, ComparisonKind::kNeverTreated);
      } catch (const PanelError&) {
        continue;  // empty cohort at this period
      }
      CHECK(validate(sub).ok());
    }
  }
}

TEST_CASE("load_panel round-trips a well-formed file") {
  const auto path = write_temp("ok",
                               "group,time,n,y,d\n"
                               "1,1,2,0.5,0\n1,2,2,1.5,1\n1,3,2,2.5,1\n"
                               "2,1,1,0.0,0\n2,2,1,1.0,0\n2,3,1,2.0,0\n");
  const auto p = load_panel(path);
  std::remove(path.c_str());
  REQUIRE(p.periods == 3);
  REQUIRE(p.groups.size() == 2);
  CHECK(p.groups[0].id == "1");
  CHECK(p.groups[0].n[0] == 2);
  CHECK(p.groups[0].y[1] == 1.5);
  CHECK(p.groups[0].d[2] == 1);
  CHECK(validate(p).ok());
}

TEST_CASE("load_panel rejects malformed files") {
  auto expect_throw = [](const std::string& name, const std::string& content) {
    const auto path = write_temp(name, content);
    CHECK_THROWS_AS(load_panel(path), PanelError);
    std::remove(path.c_str());
  };
  // missing cell (unbalanced)
  expect_throw("missing", "group,time,n,y,d\n1,1,1,0,0\n1,2,1,1,0\n2,1,1,0,0\n");
  // non-binary treatment
  expect_throw("nonbin", "group,time,n,y,d\n1,1,1,0,0\n1,2,1,1,2\n2,1,1,0,0\n2,2,1,0,0\n");
  // duplicate row
  expect_throw("dup", "group,time,n,y,d\n1,1,1,0,0\n1,1,1,0,0\n");
  // nonpositive cell size
  expect_throw("badn", "group,time,n,y,d\n1,1,0,0,0\n1,2,1,1,0\n2,1,1,0,0\n2,2,1,0,0\n");
  // missing required column
  expect_throw("nocol", "group,time,n,y\n1,1,1,0\n");
}

TEST_CASE("load_panel pools unit-level rows when asked") {
  const auto path = write_temp("agg",
                               "group,time,n,y,d\n"
                               "1,1,1,1.0,0\n1,1,1,3.0,0\n1,2,1,5.0,1\n1,2,1,5.0,1\n"
                               "2,1,1,0.0,0\n2,2,1,0.0,0\n");
  LoadOptions opts;
  opts.aggregate_duplicates = true;
  const auto p = load_panel(path, opts);
  std::remove(path.c_str());
  CHECK(p.groups[0].n[0] == 2);
  CHECK(p.groups[0].y[0] == 2.0);  // size-weighted mean of 1 and 3
  CHECK(p.groups[0].d[1] == 1);
}

TEST_CASE("load_panel reads latent columns") {
  const auto path = write_temp("latent",
                               "group,time,n,y,d,d_true,s_true\n"
                               "1,1,1,0,0,0,0\n1,2,1,1,0,1,1\n1,3,1,2,1,1,0\n"
                               "2,1,1,0,0,0,0\n2,2,1,0,0,0,0\n2,3,1,0,0,0,0\n");
  const auto p = load_panel(path);
  std::remove(path.c_str());
  CHECK(p.groups[0].d_true[1] == 1.0);
  CHECK(p.groups[0].s_true[1] == 1.0);
  CHECK_FALSE(p.has_truth());  // effects are never read from disk
}

TEST_CASE("drop_initial_switchers removes only offending groups") {
  Panel p;
  p.periods = 3;
  p.groups = {fixtures::group("a", {0, 1, 2}, {0, 1, 1}),
              fixtures::group("b", {0, 1, 2}, {0, 0, 1}),
              fixtures::group("c", {0, 0, 0}, {0, 0, 0})};
  const auto out = drop_initial_switchers(p);
  REQUIRE(out.groups.size() == 2);
  CHECK(out.groups[0].id == "b");
}
