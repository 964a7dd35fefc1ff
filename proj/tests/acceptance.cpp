// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exits non-zero when any criterion fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mmbs/error.hpp"
#include "mmbs/eval.hpp"
#include "mmbs/selection.hpp"
#include "mmbs/trainer.hpp"
#include "oracles.hpp"

using namespace mmbs;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kExact = 1e-12;          // closed forms and oracle agreement
constexpr double kWorkedExample = 1e-6;   // two-category correction factors
constexpr double kGradRel = 1e-4;         // finite differences
constexpr double kGradStep = 1e-5;
constexpr double kGradFloor = 1e-6;       // denominator floor of the relative error
constexpr std::size_t kGradCoords = 100;  // per tensor (all of them when smaller)
constexpr double kOodGain = 0.05;         // SR over baseline, out of distribution
constexpr double kIdBand = 0.02;          // |SR - baseline|, in distribution
constexpr double kStrategyMargin = 0.01;  // SR non-inferiority against S, R, B
constexpr int kSeeds = 5;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "    failed: " << what << "\n";
    }
  }
};

std::vector<std::pair<std::string, bool>> g_summary;

void report(int id, const std::string& title, Outcome& o, double seconds) {
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " (" << std::fixed
            << std::setprecision(1) << seconds << " s)\n"
            << o.detail.str() << std::flush;
  g_summary.emplace_back(title, o.pass);
}

template <typename F>
void criterion(int id, const std::string& title, F&& body) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(id, title, o, s);
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

double rel(double a, long double b) {
  const long double m = std::max(std::abs(static_cast<long double>(a)), std::abs(b));
  return m == 0 ? 0.0 : static_cast<double>(std::abs(static_cast<long double>(a) - b) / m);
}

int run_cli(const std::string& cwd, const std::string& args) {
  const std::string cmd = "cd " + cwd + " && " + MMBS_CLI + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

void selection_oracle(Outcome& o) {
  Rng rng = Rng::stream(1, {Rng::key("acceptance-micro")});
  std::size_t mismatches = 0, corpora = 0, selected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto samples = fixture::micro_corpus(rng);
    const double beta = trial % 10 == 0 ? 0.0 : (trial % 10 == 1 ? 1.0 : rng.uniform());
    const auto d = Dataset::from_samples(samples, {}, 2);
    const auto expect = oracle::select(samples, beta);
    const auto table = compute_frequencies(d);
    const auto st = compute_stats(table, beta);
    bool ok = st.size() == expect.categories.size();
    for (std::size_t k = 0; ok && k < st.size(); ++k) {
      const auto& e = expect.categories[k];
      ok = table.categories[k].category == e.category && table.categories[k].freq == e.freq &&
           table.categories[k].sample_count == e.samples && rel(st[k].entropy, e.entropy) <= kExact &&
           rel(st[k].correction, e.correction) <= kExact && rel(st[k].proportion, e.proportion) <= kExact &&
           std::set<std::string>(st[k].unbiased_answers.begin(), st[k].unbiased_answers.end()) == e.unbiased;
    }
    const auto sel = select_unbiased(d, st);
    ok = ok && sel == expect.selected;
    selected += sel.size();
    ++corpora;
    if (!ok) ++mismatches;
  }
  o.detail << "    " << corpora << " corpora, " << selected << " selected samples in total, " << mismatches
           << " mismatches\n";
  o.require(mismatches == 0, "selection differs from the brute-force oracle");
}

void closed_forms(Outcome& o) {
  using fixture::sample;
  const auto equal = Dataset::from_samples(
      {sample(0, "a", QType::Other, "a x ?", {{"p", 1.0}}), sample(1, "a", QType::Other, "a x ?", {{"q", 1.0}}),
       sample(2, "b", QType::Other, "b x ?", {{"r", 1.0}}), sample(3, "b", QType::Other, "b x ?", {{"s", 1.0}})},
      {}, 2);
  for (const auto& st : compute_stats(compute_frequencies(equal), 0.5)) o.require(st.correction == 0.5, "W = 0.5");

  const auto two = Dataset::from_samples(
      {sample(0, "a", QType::Other, "a x ?", {{"p", 1.0}}), sample(1, "a", QType::Other, "a x ?", {{"q", 1.0}}),
       sample(2, "b", QType::Other, "b x ?", {{"r", 1.0}})},
      {}, 2);
  const auto st = compute_stats(compute_frequencies(two), 0.4);
  const double w1 = 1.0 / (1.0 + std::numbers::sqrt2);
  o.detail << "    W = " << fmt(st[0].correction, 6) << " / " << fmt(st[1].correction, 6) << "\n";
  o.require(std::abs(st[0].correction - 0.4142) < 1e-4 && std::abs(st[0].correction - w1) < kWorkedExample,
            "W1 = 0.4142");
  o.require(std::abs(st[1].correction - 0.5858) < 1e-4 && std::abs(st[1].correction - (1 - w1)) < kWorkedExample,
            "W2 = 0.5858");

  const std::vector<double> a{0.6, -0.8, 0.1};
  for (std::size_t b : {1u, 4u, 127u}) {
    const std::vector<std::vector<double>> negs(b, std::vector<double>{1.2, -1.6, 0.2});
    const double l = contrastive_loss(a, {{3.0, -4.0, 0.5}}, negs);
    o.require(std::abs(l - std::log(1.0 + static_cast<double>(b))) <= kExact, "L_cl = ln(1+B), B = " + std::to_string(b));
  }
  o.require(std::abs(contrastive_loss(a, {{1.0, 2.0, 3.0}}, {})) <= kExact, "L_cl = 0 without negatives");
  for (std::size_t n : {1u, 4u, 500u}) {
    std::vector<double> targets(n);
    for (std::size_t i = 0; i < n; ++i) targets[i] = static_cast<double>(i % 4) / 3.0;
    o.require(std::abs(vqa_loss(std::vector<double>(n, 0.0), targets) - std::numbers::ln2) <= kExact,
              "L_vqa = ln 2 at zero logits");
  }
}

void gradients(Outcome& o) {
  GenConfig gc;
  gc.n_train = 400;
  gc.n_test = 10;
  gc.seed = 11;
  const auto d = generate(gc).train;
  const auto unbiased = select_unbiased(d, compute_stats(compute_frequencies(d), 0.6));

  ModelConfig mc;
  mc.vocab_size = d.token_vocab().size();
  std::size_t longest = 0;
  for (const auto& s : d.samples()) longest = std::max(longest, s.question.size());
  mc.max_len = longest;
  mc.d_emb = 16;
  mc.d_text = 100;
  mc.d_v = d.d_v();
  mc.d_vis = 100;
  mc.d_joint = 100;
  mc.n_answers = d.answer_vocab().size();
  mc.seed = 3;
  const Model model(mc, ModelParams::random(mc), d.token_vocab(), d.answer_vocab());

  // Eight samples: a mix of yes/no and other questions, biased and exempt.
  std::vector<const Sample*> picked;
  std::size_t exempt = 0, yesno = 0;
  for (const auto& s : d.samples()) {
    const bool ex = unbiased.contains(s.id);
    if ((ex && exempt < 3) || (!ex && s.qtype == QType::YesNo && yesno < 2) ||
        (!ex && s.qtype != QType::YesNo && picked.size() - exempt - yesno < 3)) {
      picked.push_back(&s);
      exempt += ex;
      yesno += !ex && s.qtype == QType::YesNo;
    }
    if (picked.size() == 8) break;
  }
  std::vector<Sample> chosen;
  for (const auto* s : picked) chosen.push_back(*s);
  const auto sub = Dataset::from_samples(chosen, {}, d.d_v());

  for (auto strategy : {Strategy::S, Strategy::R, Strategy::B, Strategy::SR}) {
    const auto assignments = assign_positives(sub, strategy, unbiased, 7, 0);
    std::vector<BatchItem> batch;
    for (std::size_t i = 0; i < sub.size(); ++i) {
      const auto& s = sub.samples()[i];
      BatchItem item{model.token_ids(s.question), s.visual, {}, {}};
      for (const auto& a : s.answers) item.targets.emplace_back(model.answer_id(a.text), a.score);
      for (const auto& q : assignments[i].positives) item.positives.push_back(model.token_ids(q));
      batch.push_back(std::move(item));
    }
    const auto res = backward(model.params(), batch, 1.0);
    const auto gc_res = oracle::check_gradient(
        model.params(), res.grad,
        [&](const ModelParams& p) { return backward(p, batch, 1.0, false).total; }, kGradCoords, 19, kGradStep,
        kGradFloor);
    o.detail << "    " << to_string(strategy) << ": " << gc_res.coords << " coordinates, max relative error "
             << std::scientific << std::setprecision(2) << gc_res.max_rel << std::fixed << " (" << exempt
             << " exempt samples)\n";
    o.require(gc_res.max_rel < kGradRel, std::string(to_string(strategy)) + " worst " + gc_res.worst);
  }
}

void determinism(Outcome& o) {
  const auto root = fixture::temp_dir("acceptance_determinism");
  const std::vector<std::string> steps{
      "gen --n-train 3000 --n-test 1000 --n-id-test 500 --seed 2 --out data",
      "train --data data/train.jsonl --epochs 3 --strategy sr --alpha 1 --beta 0.4 --seed 2 --out run",
      "eval --checkpoint run/final.ckpt --data data/test.jsonl --form original --out original.json",
      "eval --checkpoint run/final.ckpt --data data/test.jsonl --form shuffle --out shuffle.json",
  };
  for (const char* side : {"a", "b"}) {
    fs::create_directories(root / side);
    for (const auto& s : steps) o.require(run_cli((root / side).string(), s) == 0, std::string(side) + ": " + s);
  }
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const auto other = root / "b" / fs::relative(e.path(), root / "a");
    o.require(fs::exists(other) && fixture::slurp(e.path()) == fixture::slurp(other),
              "differs: " + fs::relative(e.path(), root / "a").string());
    ++compared;
  }
  o.detail << "    " << compared << " files compared byte for byte\n";
  o.require(compared >= 9, "expected datasets, checkpoints, manifest and reports");
}

void nesting(Outcome& o) {
  const auto d = generate(GenConfig{}).train;
  const auto table = compute_frequencies(d);
  std::set<std::int64_t> prev;
  o.detail << "    selected:";
  for (double beta : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const auto sel = select_unbiased(d, compute_stats(table, beta));
    o.detail << " " << sel.size();
    o.require(std::includes(sel.begin(), sel.end(), prev.begin(), prev.end()), "not nested at beta " + fmt(beta, 1));
    prev = sel;
  }
  o.detail << " of " << d.size() << "\n";
}

// ---------------------------------------------------------------------------
// Synthetic experiment shared by criteria 6 to 8.

struct RunResult {
  double ood = 0, id = 0;
  std::map<QuestionForm, double> forms;
  bool removal_gated = false;
};

struct Experiment {
  std::map<std::string, std::vector<RunResult>> runs;  // by method
  std::vector<std::string> log;
};

Experiment run_experiment() {
  Experiment ex;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    GenConfig gc;
    gc.n_id_test = 5000;
    gc.seed = static_cast<std::uint64_t>(seed);
    const auto g = generate(gc);
    auto run = [&](const std::string& name, Strategy strategy, double alpha) {
      TrainConfig tc;
      tc.strategy = strategy;
      tc.alpha = alpha;
      tc.beta = 0.4;
      tc.seed = static_cast<std::uint64_t>(seed);
      const auto start = std::chrono::steady_clock::now();
      const auto model = train(g.train, tc).model;
      RunResult r;
      EvalOptions opts;
      opts.shuffle_seed = tc.seed;
      r.ood = accuracy(model, g.test, opts).overall;
      r.id = accuracy(model, g.id_test, opts).overall;
      r.forms[QuestionForm::Original] = r.ood;
      opts.form = QuestionForm::Shuffling;
      r.forms[QuestionForm::Shuffling] = accuracy(model, g.test, opts).overall;
      opts.form = QuestionForm::Removal;
      try {
        accuracy(model, g.test, opts);
      } catch (const ConfigError&) {
        r.removal_gated = true;
      }
      opts.allow_test_categories = true;
      const auto rem = accuracy(model, g.test, opts);
      r.forms[QuestionForm::Removal] = rem.form == QuestionForm::Removal && rem.samples == g.test.size() ? rem.overall : -1;
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::ostringstream line;
      line << "    seed " << seed << " " << name << ": OOD " << fmt(r.ood) << "  ID " << fmt(r.id) << "  shuffle "
           << fmt(r.forms[QuestionForm::Shuffling]) << "  removal " << fmt(r.forms[QuestionForm::Removal]) << "  ("
           << fmt(s, 1) << " s)";
      std::cout << line.str() << "\n" << std::flush;
      ex.log.push_back(line.str());
      ex.runs[name].push_back(r);
    };
    run("baseline", Strategy::SR, 0.0);
    run("SR", Strategy::SR, 1.0);
    run("S", Strategy::S, 1.0);
    run("R", Strategy::R, 1.0);
    run("B", Strategy::B, 1.0);
  }
  return ex;
}

double mean(const std::vector<RunResult>& v, double RunResult::*field) {
  double s = 0;
  for (const auto& r : v) s += r.*field;
  return s / static_cast<double>(v.size());
}

}  // namespace

int main() {
  std::cout << "acceptance suite\n";
  criterion(1, "selection matches a brute-force oracle on 1000 micro-corpora", selection_oracle);
  criterion(2, "closed-form values of W, L_cl and L_vqa", closed_forms);
  criterion(3, "analytic gradients agree with central finite differences for S, R, B and SR", gradients);
  criterion(4, "gen, train and eval are bit-for-bit reproducible", determinism);
  criterion(5, "selected sample sets are nested in beta", nesting);

  std::cout << "running the synthetic experiment (" << kSeeds << " seeds x 5 methods)\n" << std::flush;
  const auto start = std::chrono::steady_clock::now();
  Experiment ex;
  std::string failure;
  try {
    ex = run_experiment();
  } catch (const std::exception& e) {
    failure = e.what();
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  criterion(6, "SR gains >= 5 points OOD over the baseline and stays within 2 points ID", [&](Outcome& o) {
    o.require(failure.empty(), "experiment aborted: " + failure);
    const auto& base = ex.runs.at("baseline");
    const auto& sr = ex.runs.at("SR");
    const double ood_gain = mean(sr, &RunResult::ood) - mean(base, &RunResult::ood);
    const double id_delta = mean(sr, &RunResult::id) - mean(base, &RunResult::id);
    o.detail << "    mean OOD: baseline " << fmt(mean(base, &RunResult::ood)) << ", SR " << fmt(mean(sr, &RunResult::ood))
             << " (gap " << std::showpos << fmt(100 * ood_gain, 2) << std::noshowpos << " points)\n"
             << "    mean ID:  baseline " << fmt(mean(base, &RunResult::id)) << ", SR " << fmt(mean(sr, &RunResult::id))
             << " (gap " << std::showpos << fmt(100 * id_delta, 2) << std::noshowpos << " points)\n"
             << "    experiment time " << fmt(elapsed, 0) << " s\n";
    o.require(ood_gain >= kOodGain, "OOD gain below 5 points");
    o.require(std::abs(id_delta) <= kIdBand, "ID accuracy moved by more than 2 points");
  });

  criterion(7, "SR is non-inferior to S, R and B out of distribution", [&](Outcome& o) {
    o.require(failure.empty(), "experiment aborted: " + failure);
    const double sr = mean(ex.runs.at("SR"), &RunResult::ood);
    for (const char* m : {"S", "R", "B"}) {
      const double other = mean(ex.runs.at(m), &RunResult::ood);
      o.detail << "    " << m << ": OOD " << fmt(other) << " ID " << fmt(mean(ex.runs.at(m), &RunResult::id))
               << " (SR - " << m << " = " << std::showpos << fmt(100 * (sr - other), 2) << std::noshowpos << " points)\n";
      o.require(sr >= other - kStrategyMargin, std::string("SR below ") + m);
    }
  });

  criterion(8, "all three question forms are reported and removal needs the category flag", [&](Outcome& o) {
    o.require(failure.empty(), "experiment aborted: " + failure);
    for (const auto& [name, runs] : ex.runs) {
      std::map<QuestionForm, double> m;
      for (const auto& r : runs) {
        o.require(r.removal_gated, name + ": removal ran without the flag");
        for (const auto& [f, v] : r.forms) {
          o.require(v >= 0.0 && v <= 1.0, name + ": missing " + std::string(to_string(f)) + " report");
          m[f] += v / static_cast<double>(runs.size());
        }
      }
      std::vector<std::pair<double, QuestionForm>> order;
      for (const auto& [f, v] : m) order.emplace_back(v, f);
      std::sort(order.rbegin(), order.rend());
      o.detail << "    " << name << ": original " << fmt(m[QuestionForm::Original]) << ", shuffle "
               << fmt(m[QuestionForm::Shuffling]) << ", removal " << fmt(m[QuestionForm::Removal]) << "; best form "
               << to_string(order.front().second) << "\n";
    }
  });

  std::size_t passed = 0;
  for (const auto& [t, ok] : g_summary) passed += ok;
  std::cout << passed << "/" << g_summary.size() << " criteria passed\n";
  return passed == g_summary.size() ? 0 : 1;
}
