#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "fixtures.hpp"
#include "mmbs/error.hpp"
#include "mmbs/selection.hpp"
#include "oracles.hpp"

using namespace mmbs;
using fixture::sample;

namespace {

Dataset of(std::vector<Sample> s) { return Dataset::from_samples(std::move(s), {}, 2); }

// One category whose answers carry the given cumulative scores, split into
// samples of score at most 1.
Dataset single_category(const std::vector<std::pair<std::string, double>>& freq) {
  std::vector<Sample> s;
  for (const auto& [a, f] : freq) {
    for (double left = f; left > 0; left -= 1.0) {
      s.push_back(sample(static_cast<std::int64_t>(s.size()), "c", QType::Other, "c x ?", {{a, std::min(left, 1.0)}}));
    }
  }
  return of(std::move(s));
}

double rel(double a, long double b) {
  const long double d = std::abs(static_cast<long double>(a) - b);
  const long double m = std::max(std::abs(static_cast<long double>(a)), std::abs(b));
  return m == 0 ? 0.0 : static_cast<double>(d / m);
}

}  // namespace

TEST_CASE("frequencies sum every label score") {
  const auto d = of({sample(0, "is this", QType::YesNo, "is this x ?", {{"yes", 1.0}}),
                     sample(1, "is this", QType::YesNo, "is this x ?", {{"yes", 1.0}}),
                     sample(2, "is this", QType::YesNo, "is this x ?", {{"yes", 1.0}}),
                     sample(3, "is this", QType::YesNo, "is this x ?", {{"no", 0.6}}),
                     sample(4, "is it", QType::YesNo, "is it x ?", {{"yes", 1.0}, {"no", 0.3}})});
  const auto f = compute_frequencies(d);
  REQUIRE(f.categories.size() == 2);
  CHECK(f.categories[0].freq == std::vector<std::pair<std::string, double>>{{"yes", 3.0}, {"no", 0.6}});
  CHECK(f.categories[0].sample_count == 4);
  CHECK(f.categories[1].freq == std::vector<std::pair<std::string, double>>{{"yes", 1.0}, {"no", 0.3}});

  const auto one = compute_frequencies(single_category({{"a", 0.7}}));
  CHECK(one.categories[0].freq == std::vector<std::pair<std::string, double>>{{"a", 0.7}});
}

TEST_CASE("equal entropies give a correction of one half") {
  const auto d = of({sample(0, "a", QType::Other, "a x ?", {{"p", 1.0}}), sample(1, "a", QType::Other, "a x ?", {{"q", 1.0}}),
                     sample(2, "b", QType::Other, "b x ?", {{"r", 1.0}}), sample(3, "b", QType::Other, "b x ?", {{"s", 1.0}})});
  for (const auto& st : compute_stats(compute_frequencies(d), 0.4)) {
    CHECK(st.correction == 0.5);
    CHECK(st.proportion == 0.2);
  }
}

TEST_CASE("two-category worked example") {
  const auto d = of({sample(0, "a", QType::Other, "a x ?", {{"p", 1.0}}), sample(1, "a", QType::Other, "a x ?", {{"q", 1.0}}),
                     sample(2, "b", QType::Other, "b x ?", {{"r", 1.0}})});
  const auto st = compute_stats(compute_frequencies(d), 1.0);
  // 1 - sigmoid(ln2 / 2) = 1 / (1 + sqrt 2), evaluated independently at high precision.
  using hp = oracle::hp;
  const hp w1 = 1 / (1 + exp(boost::multiprecision::log(hp(2)) / 2));
  CHECK(std::abs(st[0].correction - static_cast<double>(w1)) < 1e-12);
  CHECK(std::abs(st[1].correction - static_cast<double>(1 - w1)) < 1e-12);
  CHECK(std::abs(st[0].correction - 0.4142) < 1e-4);
  CHECK(std::abs(st[1].correction - 0.5858) < 1e-4);
  CHECK(std::abs(st[0].entropy - std::log(2.0)) < 1e-15);
  CHECK(st[1].entropy == 0.0);
}

TEST_CASE("beta zero selects nothing") {
  GenConfig cfg;
  cfg.n_train = 2000;
  cfg.n_test = 10;
  const auto g = generate(cfg);
  const auto st = compute_stats(compute_frequencies(g.train), 0.0);
  for (const auto& s : st) {
    CHECK(s.proportion == 0.0);
    CHECK(s.z_unbiased == 0);
    CHECK(s.unbiased_answers.empty());
  }
  CHECK(select_unbiased(g.train, st).empty());
}

TEST_CASE("bottom-proportion answers and sample selection") {
  // A single category has W = 0.5, so beta = 1 gives P = 0.5.
  const auto d = single_category({{"a", 10}, {"b", 5}, {"c", 1}, {"d", 0.5}});
  const auto st = compute_stats(compute_frequencies(d), 1.0);
  REQUIRE(st.size() == 1);
  CHECK(st[0].proportion == 0.5);
  CHECK(st[0].z_unbiased == 2);
  CHECK(st[0].unbiased_answers == std::vector<std::string>{"d", "c"});
  std::set<std::int64_t> expect;
  for (const auto& x : d.samples()) {
    if (x.answers[0].text == "c" || x.answers[0].text == "d") expect.insert(x.id);
  }
  CHECK(expect.size() == 2);
  CHECK(select_unbiased(d, st) == expect);

  // Ties in frequency fall back to answer text.
  const auto t = single_category({{"y", 1}, {"x", 1}, {"z", 1}, {"w", 2}});
  CHECK(compute_stats(compute_frequencies(t), 1.0)[0].unbiased_answers == std::vector<std::string>{"x", "y"});

  // A multi-label sample is judged by its highest-score label.
  const auto m = of({sample(0, "c", QType::Other, "c x ?", {{"rare", 0.3}, {"common", 1.0}}),
                     sample(1, "c", QType::Other, "c x ?", {{"common", 1.0}}),
                     sample(2, "c", QType::Other, "c x ?", {{"common", 1.0}}),
                     sample(3, "c", QType::Other, "c x ?", {{"rare", 1.0}})});
  CHECK(select_unbiased(m, compute_stats(compute_frequencies(m), 0.5)) == std::set<std::int64_t>{3});
}

TEST_CASE("answer-count structure of the yes/no row of the statistics table") {
  // 209 answers at P = 18.52% give 39 unbiased answers. With one category
  // W = 0.5, so beta = 0.3704 yields that proportion.
  std::vector<std::pair<std::string, double>> freq;
  for (int i = 0; i < 209; ++i) freq.emplace_back("a" + std::to_string(1000 + i), 1.0 + i);
  const auto st = compute_stats(compute_frequencies(single_category(freq)), 0.3704)[0];
  CHECK(std::abs(st.proportion - 0.1852) < 1e-12);
  CHECK(st.z == 209);
  CHECK(st.z_unbiased == 39);
}

TEST_CASE("selection matches the brute-force oracle on random micro-corpora") {
  Rng rng = Rng::stream(2024, {Rng::key("micro")});
  for (int trial = 0; trial < 300; ++trial) {
    const auto samples = fixture::micro_corpus(rng);
    const double beta = rng.uniform();
    const auto d = of(samples);
    const auto expect = oracle::select(samples, beta);
    const auto table = compute_frequencies(d);
    const auto st = compute_stats(table, beta);
    REQUIRE(st.size() == expect.categories.size());
    for (std::size_t k = 0; k < st.size(); ++k) {
      const auto& e = expect.categories[k];
      REQUIRE(table.categories[k].category == e.category);
      REQUIRE(table.categories[k].freq == e.freq);
      REQUIRE(table.categories[k].sample_count == e.samples);
      CHECK(rel(st[k].entropy, e.entropy) < 1e-12);
      CHECK(std::abs(st[k].correction - static_cast<double>(e.correction)) < 1e-12);
      CHECK(std::abs(st[k].proportion - static_cast<double>(e.proportion)) < 1e-12);
      CHECK(std::set<std::string>(st[k].unbiased_answers.begin(), st[k].unbiased_answers.end()) == e.unbiased);
    }
    CHECK(select_unbiased(d, st) == expect.selected);
  }
}

TEST_CASE("selection properties on a generated corpus") {
  GenConfig cfg;
  cfg.n_train = 4000;
  cfg.n_test = 10;
  const auto g = generate(cfg);
  const auto table = compute_frequencies(g.train);

  std::set<std::int64_t> prev;
  std::vector<std::vector<std::string>> prev_lists(table.categories.size());
  for (double beta : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const auto st = compute_stats(table, beta);
    for (std::size_t k = 0; k < st.size(); ++k) {
      CHECK(st[k].correction > 0.0);
      CHECK(st[k].correction < 1.0);
      CHECK(st[k].proportion <= beta);
      CHECK(st[k].z_unbiased == (st[k].proportion > 0 ? static_cast<std::size_t>(std::ceil(st[k].proportion * st[k].z)) : 0));
      const std::set<std::string> now(st[k].unbiased_answers.begin(), st[k].unbiased_answers.end());
      for (const auto& a : prev_lists[k]) CHECK(now.contains(a));
      prev_lists[k] = st[k].unbiased_answers;
    }
    const auto sel = select_unbiased(g.train, st);
    CHECK(std::includes(sel.begin(), sel.end(), prev.begin(), prev.end()));
    prev = sel;

    for (const auto& a : st) {
      for (const auto& b : st) {
        if (a.entropy < b.entropy) CHECK(a.correction > b.correction);
      }
    }
  }
  // Yes/no categories concentrate on fewer answers and so get the larger corrections.
  const auto st = compute_stats(table, 0.4);
  double yes_no = 1, other = 0;
  for (const auto& s : st) {
    if (s.qtype == QType::YesNo) yes_no = std::min(yes_no, s.correction);
    if (s.qtype == QType::Other) other = std::max(other, s.correction);
  }
  CHECK(yes_no > other);
}

TEST_CASE("selection rejects bad input") {
  const auto d = of({sample(0, "a", QType::Other, "a x ?", {{"p", 1.0}}), sample(1, "b", QType::Other, "b x ?", {{"q", 0.0}})});
  CHECK_THROWS_AS(compute_stats(compute_frequencies(d), 0.4), DataError);
  const auto ok = single_category({{"a", 1}});
  CHECK_THROWS_AS(compute_stats(compute_frequencies(ok), 1.5), ConfigError);
  CHECK_THROWS_AS(compute_stats(compute_frequencies(ok), -0.1), ConfigError);
}

TEST_CASE("base-2 entropy rescales entropy but not the correction ordering") {
  GenConfig cfg;
  cfg.n_train = 2000;
  cfg.n_test = 10;
  const auto table = compute_frequencies(generate(cfg).train);
  const auto e = compute_stats(table, 0.4);
  const auto two = compute_stats(table, 0.4, EntropyBase::Two);
  for (std::size_t k = 0; k < e.size(); ++k) {
    CHECK(std::abs(two[k].entropy - e[k].entropy / std::log(2.0)) < 1e-12);
  }
}

TEST_CASE("audit report surfaces the ceil rule") {
  GenConfig cfg;
  cfg.n_train = 3000;
  cfg.n_test = 10;
  const auto g = generate(cfg);
  const auto r = audit_report(g.train, 0.4);
  CHECK(r["samples"] == 3000);
  std::size_t selected = 0;
  for (const auto& c : r["categories"]) {
    const double p = c["P"];
    const std::size_t z = c["z"];
    CHECK(c["z_unb"].get<std::size_t>() == static_cast<std::size_t>(std::ceil(p * static_cast<double>(z))));
    CHECK(c["unbiased_answers"].size() == c["z_unb"].get<std::size_t>());
    selected += c["selected"].get<std::size_t>();
  }
  CHECK(selected == r["selected"].get<std::size_t>());
  CHECK(r["by_qtype"]["yesno"]["categories"] == 4);
}
