// mmbs: generate, audit, train, eval and export-dist subcommands.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmbs/corpus.hpp"
#include "mmbs/error.hpp"
#include "mmbs/eval.hpp"
#include "mmbs/model.hpp"
#include "mmbs/selection.hpp"
#include "mmbs/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace mmbs;

namespace {

void write_json(const ordered_json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

ordered_json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

const std::map<std::string, EntropyBase> kEntropyBases = {{"e", EntropyBase::Natural}, {"2", EntropyBase::Two}};

// Fills options not given on the command line from `key = value` lines.
// Keys are flag names without the dashes; '_' and '-' are interchangeable.
void apply_config(CLI::App& sub, const std::optional<fs::path>& path) {
  if (!path) return;
  std::ifstream in(*path);
  if (!in) throw ConfigError("cannot read config file " + path->string());
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      s = s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
      if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
      return s;
    };
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path->string() + ": line " + std::to_string(n) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    for (auto& ch : key) ch = ch == '_' ? '-' : ch;
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") throw ConfigError(where + "unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    try {
      opt->add_result(trim(line.substr(eq + 1)));
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
}

void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string(flag) + " is required");
}

std::string epoch_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu.ckpt", epoch + 1);
  return buf;
}

// ---- gen ----

struct GenArgs {
  std::optional<fs::path> config;
  GenConfig cfg;
  fs::path out = "data";
};

void add_gen(CLI::App& app, GenArgs& a, std::function<void()>& run) {
  auto* sub = app.add_subcommand("gen", "Generate a biased train split and a prior-shifted test split");
  sub->add_option("--config", a.config, "Key-value config file; flags override it");
  auto& c = a.cfg;
  sub->add_option("--categories", c.n_categories, "Question categories")->capture_default_str();
  sub->add_option("--answers-per-cat", c.answers_per_category, "Answers per num/other category")->capture_default_str();
  sub->add_option("--subjects", c.n_subjects, "Distinct subjects")->capture_default_str();
  sub->add_option("--variants", c.variants_per_subject, "Visual variants per subject")->capture_default_str();
  sub->add_option("--bias", c.bias_strength, "Extra mass on the head answer")->capture_default_str();
  sub->add_option("--n-train", c.n_train, "Training samples")->capture_default_str();
  sub->add_option("--n-test", c.n_test, "Shifted-prior test samples")->capture_default_str();
  sub->add_option("--n-id-test", c.n_id_test, "Training-prior test samples (0: none)")->capture_default_str();
  sub->add_option("--label-noise", c.label_noise, "Probability of a resampled top answer")->capture_default_str();
  sub->add_option("--multi-label-rate", c.multi_label_rate, "Probability of a secondary label")->capture_default_str();
  sub->add_option("--d-v", c.d_v, "Visual feature dimension")->capture_default_str();
  sub->add_option("--prototype-scale", c.prototype_scale, "Std of concept prototypes")->capture_default_str();
  sub->add_option("--visual-noise", c.visual_noise, "Std of per-sample visual noise")->capture_default_str();
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--out", a.out, "Output directory")->capture_default_str();
  sub->callback([&a, &run, sub] {
    run = [&, sub] {
      apply_config(*sub, a.config);
      a.cfg.validate();
      const auto splits = generate(a.cfg);
      fs::create_directories(a.out);
      write_dataset(splits.train, a.out / "train.jsonl");
      write_dataset(splits.test, a.out / "test.jsonl");
      if (a.cfg.n_id_test > 0) write_dataset(splits.id_test, a.out / "test_id.jsonl");
      std::cout << "wrote " << splits.train.size() << " train / " << splits.test.size() << " test samples to "
                << a.out.string() << '\n';
    };
  });
}

// ---- audit ----

struct AuditArgs {
  std::optional<fs::path> config;
  fs::path data;
  double beta = 0.4;
  EntropyBase base = EntropyBase::Natural;
  std::optional<fs::path> out;
};

void add_audit(CLI::App& app, AuditArgs& a, std::function<void()>& run) {
  auto* sub = app.add_subcommand("audit", "Per-category entropy, correction and unbiased answers of a dataset");
  sub->add_option("--config", a.config, "Key-value config file; flags override it");
  sub->add_option("--data", a.data, "Dataset file");
  sub->add_option("--beta", a.beta, "Initial unbiased proportion")->capture_default_str();
  sub->add_option("--entropy-base", a.base, "Logarithm base: e or 2")
      ->transform(CLI::CheckedTransformer(kEntropyBases))
      ->default_str("e");
  sub->add_option("--out", a.out, "Report file (default: stdout)");
  sub->callback([&a, &run, sub] {
    run = [&, sub] {
      apply_config(*sub, a.config);
      require(a.data, "--data");
      const auto report = audit_report(read_dataset(a.data), a.beta, a.base);
      if (a.out) {
        write_json(report, *a.out);
      } else {
        std::cout << report.dump(2) << '\n';
      }
    };
  });
}

// ---- train ----

struct TrainArgs {
  std::optional<fs::path> config;
  TrainConfig cfg;
  std::string strategy = "sr";
  fs::path data;
  fs::path out = "run";
  std::optional<fs::path> select_on;
  bool epoch_checkpoints = true;
};

void add_train(CLI::App& app, TrainArgs& a, std::function<void()>& run) {
  auto* sub = app.add_subcommand("train", "Train the backbone with the classification and contrastive losses");
  sub->add_option("--config", a.config, "Key-value config file; flags override it");
  auto& c = a.cfg;
  sub->add_option("--data", a.data, "Training dataset file");
  sub->add_option("--out", a.out, "Run directory")->capture_default_str();
  sub->add_option("--strategy", a.strategy, "Positive construction: s, r, b or sr")->capture_default_str();
  sub->add_option("--alpha", c.alpha, "Weight of the contrastive loss (0: baseline)")->capture_default_str();
  sub->add_option("--beta", c.beta, "Initial unbiased proportion")->capture_default_str();
  sub->add_option("--epochs", c.epochs, "Epochs")->capture_default_str();
  sub->add_option("--batch-size", c.batch_size, "Batch size")->capture_default_str();
  sub->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--adam-beta1", c.adam_beta1)->capture_default_str();
  sub->add_option("--adam-beta2", c.adam_beta2)->capture_default_str();
  sub->add_option("--adam-eps", c.adam_eps)->capture_default_str();
  sub->add_option("--seed", c.seed, "Seed for init, batch order and question shuffles")->capture_default_str();
  sub->add_option("--shuffle-per-epoch", c.shuffle_per_epoch, "Redraw Shuffling positives every epoch")
      ->capture_default_str();
  sub->add_option("--entropy-base", c.entropy_base, "Logarithm base: e or 2")
      ->transform(CLI::CheckedTransformer(kEntropyBases))
      ->default_str("e");
  sub->add_option("--d-emb", c.d_emb)->capture_default_str();
  sub->add_option("--d-text", c.d_text)->capture_default_str();
  sub->add_option("--d-vis", c.d_vis)->capture_default_str();
  sub->add_option("--d-joint", c.d_joint)->capture_default_str();
  sub->add_option("--init-scale", c.init_scale)->capture_default_str();
  sub->add_option("--max-len", c.max_len, "Longest question (0: from the training set)")->capture_default_str();
  sub->add_option("--epoch-checkpoints", a.epoch_checkpoints, "Write a checkpoint after every epoch")
      ->capture_default_str();
  sub->add_option("--select-on", a.select_on,
                  "Also keep best.ckpt, the epoch with the highest accuracy on this dataset");
  sub->callback([&a, &run, sub] {
    run = [&, sub] {
      apply_config(*sub, a.config);
      require(a.data, "--data");
      a.cfg.strategy = parse_strategy(a.strategy);
      a.cfg.validate();
      const Dataset train_set = read_dataset(a.data);
      std::optional<Dataset> select_set;
      if (a.select_on) select_set = read_dataset(*a.select_on);
      fs::create_directories(a.out);

      auto meta_for = [&](std::size_t epoch) {
        ordered_json meta;
        meta["epoch"] = epoch + 1;
        meta["train_config"] = to_json(a.cfg);
        meta["data"] = a.data.string();
        meta["data_provenance"] = train_set.provenance();
        return meta;
      };
      std::optional<std::pair<std::size_t, double>> best;
      auto on_epoch = [&](const EpochStats& e, const Model& m) {
        std::fprintf(stderr, "epoch %zu  vqa %.6f  cl %.6f  total %.6f\n", e.epoch + 1, e.vqa, e.cl, e.total);
        if (a.epoch_checkpoints) save_checkpoint(m, meta_for(e.epoch), a.out / epoch_name(e.epoch));
        if (select_set) {
          const double acc = accuracy(m, *select_set, {}).overall;
          if (!best || acc > best->second) {
            best = {e.epoch, acc};
            auto meta = meta_for(e.epoch);
            meta["selected_on"] = a.select_on->string();
            meta["selection_accuracy"] = acc;
            save_checkpoint(m, meta, a.out / "best.ckpt");
          }
        }
      };
      const TrainResult r = train(train_set, a.cfg, on_epoch);
      save_checkpoint(r.model, meta_for(a.cfg.epochs - 1), a.out / "final.ckpt");

      auto manifest = run_manifest(a.cfg, r, train_set);
      manifest["data"] = a.data.string();
      if (best) {
        ordered_json sel;
        sel["data"] = a.select_on->string();
        sel["epoch"] = best->first + 1;
        sel["accuracy"] = best->second;
        manifest["selection"] = std::move(sel);
      }
      write_json(manifest, a.out / "manifest.json");
      std::cout << "wrote " << (a.out / "final.ckpt").string() << '\n';
    };
  });
}

// ---- eval ----

struct EvalArgs {
  std::optional<fs::path> config;
  fs::path checkpoint;
  fs::path data;
  std::string form = "original";
  bool allow_test_categories = false;
  std::optional<std::uint64_t> shuffle_seed;
  std::optional<fs::path> out;
};

void add_eval(CLI::App& app, EvalArgs& a, std::function<void()>& run) {
  auto* sub = app.add_subcommand("eval", "Accuracy of a checkpoint on a dataset under one question form");
  sub->add_option("--config", a.config, "Key-value config file; flags override it");
  sub->add_option("--checkpoint", a.checkpoint, "Checkpoint file");
  sub->add_option("--data", a.data, "Dataset file");
  sub->add_option("--form", a.form, "Question form: original, shuffle or removal")->capture_default_str();
  sub->add_flag("--allow-test-categories", a.allow_test_categories,
                "Permit the use of test-question categories (needed by removal)");
  sub->add_option("--shuffle-seed", a.shuffle_seed, "Seed of test-time shuffles (default: training seed)");
  sub->add_option("--out", a.out, "Report file (default: stdout)");
  sub->callback([&a, &run, sub] {
    run = [&, sub] {
      apply_config(*sub, a.config);
      require(a.checkpoint, "--checkpoint");
      require(a.data, "--data");
      EvalOptions opts;
      opts.form = parse_question_form(a.form);
      opts.allow_test_categories = a.allow_test_categories;
      const Checkpoint ck = load_checkpoint(a.checkpoint);
      if (a.shuffle_seed) {
        opts.shuffle_seed = *a.shuffle_seed;
      } else if (ck.meta.contains("train_config")) {
        opts.shuffle_seed = ck.meta["train_config"].value("seed", std::uint64_t{1});
      }
      const Dataset d = read_dataset(a.data);
      EvalReport report = accuracy(ck.model, d, opts);

      ordered_json prov;
      prov["checkpoint"] = a.checkpoint.string();
      prov["checkpoint_meta"] = ck.meta;
      prov["data"] = a.data.string();
      prov["data_provenance"] = d.provenance();
      prov["allow_test_categories"] = opts.allow_test_categories;
      prov["shuffle_seed"] = opts.shuffle_seed;
      report.provenance = std::move(prov);

      const auto j = to_json(report);
      if (a.out) {
        write_json(j, *a.out);
      } else {
        std::cout << j.dump(2) << '\n';
      }
      std::fprintf(stderr, "%s: overall %.4f  yesno %.4f  num %.4f  other %.4f  (n=%zu)\n",
                   std::string(to_string(report.form)).c_str(), report.overall, report.of(QType::YesNo).accuracy,
                   report.of(QType::Num).accuracy, report.of(QType::Other).accuracy, report.samples);
    };
  });
}

// ---- export-dist ----

struct ExportArgs {
  std::optional<fs::path> config;
  fs::path train;
  fs::path test;
  std::vector<std::string> reports;
  fs::path out = "dist";
};

void add_export(CLI::App& app, ExportArgs& a, std::function<void()>& run) {
  auto* sub = app.add_subcommand("export-dist", "Per-category answer distributions as tab-separated files");
  sub->add_option("--config", a.config, "Key-value config file; flags override it");
  sub->add_option("--train", a.train, "Training dataset file");
  sub->add_option("--test", a.test, "Test dataset file");
  sub->add_option("--report", a.reports, "Eval report, as name=path or path (repeatable)");
  sub->add_option("--out", a.out, "Output directory")->capture_default_str();
  sub->callback([&a, &run, sub] {
    run = [&, sub] {
      apply_config(*sub, a.config);
      require(a.train, "--train");
      require(a.test, "--test");
      std::vector<std::pair<std::string, EvalReport>> named;
      for (const auto& spec : a.reports) {
        const auto eq = spec.find('=');
        const fs::path path = eq == std::string::npos ? fs::path(spec) : fs::path(spec.substr(eq + 1));
        const std::string name = eq == std::string::npos ? path.stem().string() : spec.substr(0, eq);
        try {
          named.emplace_back(name, eval_report_from_json(read_json(path)));
        } catch (const nlohmann::json::exception& e) {
          throw DataError(path.string() + ": " + e.what());
        }
      }
      const auto files = export_distributions(named, read_dataset(a.train), read_dataset(a.test), a.out);
      std::cout << "wrote " << files.size() << " files to " << a.out.string() << '\n';
    };
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal bias suppression on a synthetic VQA benchmark"};
  app.require_subcommand(1);
  std::function<void()> run;
  GenArgs gen;
  AuditArgs audit;
  TrainArgs train_args;
  EvalArgs eval;
  ExportArgs exp;
  add_gen(app, gen, run);
  add_audit(app, audit, run);
  add_train(app, train_args, run);
  add_eval(app, eval, run);
  add_export(app, exp, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Config);
  }
  try {
    run();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
