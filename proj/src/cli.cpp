#include "rnf/cli.h"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "rnf/analysis.h"
#include "rnf/bench.h"
#include "rnf/config.h"
#include "rnf/errors.h"
#include "rnf/training.h"

namespace fs = std::filesystem;

namespace rnf {

namespace {

const std::vector<std::string> kKnownKeys = {
    // model
    "task", "filter", "window", "feature_maps", "activation", "dropout_embedding",
    "dropout_pooling", "dropout_rnn_input", "dropout_rnn_recurrent", "padding",
    "shared_encoder",
    // data
    "train", "dev", "test", "data", "treebank", "embeddings", "embedding_dim", "checkpoint",
    "vocab", "idf", "granularity",
    // training
    "max_epochs", "patience", "batch_size", "lr", "seed", "threads", "out",
    // analyze
    "ms", "match_mode",
    // bench
    "length", "workers", "repetitions", "warmup", "backward",
    // search
    "budget", "search_hidden_units", "search_windows", "search_dropout"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct Context {
  KeyValueConfig cfg;
  std::ostream& out;
  std::ostream& err;

  std::uint64_t seed() const { return cfg.get_u64("seed", 1); }
  std::size_t threads() const {
    const auto hw = std::max(1u, std::thread::hardware_concurrency());
    const auto n = cfg.get_size("threads", hw);
    if (n == 0) throw ConfigError("threads must be >= 1");
    return n;
  }
  fs::path out_dir() const {
    fs::path dir = cfg.get_string("out", "rnf_out");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());
    return dir;
  }
  fs::path path(const std::string& key) const {
    fs::path p = cfg.require_string(key);
    if (!fs::exists(p)) throw ConfigError(key + " file not found: " + p.string());
    return p;
  }
};

ModelConfig model_config(const KeyValueConfig& cfg) {
  ModelConfig mc;
  mc.task = parse_task(cfg.get_string("task", "sst2"));
  mc.filter.kind = parse_filter_kind(cfg.get_string("filter", "linear"));
  mc.filter.window = cfg.get_size("window", 3);
  mc.filter.feature_maps = cfg.get_size("feature_maps", 100);
  mc.filter.activation = parse_activation(cfg.get_string("activation", "relu"));
  mc.filter.validate();
  mc.dropout.embedding = cfg.get_double("dropout_embedding", 0.0);
  mc.dropout.pooling = cfg.get_double("dropout_pooling", 0.0);
  mc.dropout.rnn_input = cfg.get_double("dropout_rnn_input", 0.0);
  mc.dropout.rnn_recurrent = cfg.get_double("dropout_rnn_recurrent", 0.0);
  for (double r : {mc.dropout.embedding, mc.dropout.pooling, mc.dropout.rnn_input,
                   mc.dropout.rnn_recurrent}) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates must lie in [0, 1)");
  }
  const auto padding = cfg.get_string("padding", "symmetric");
  if (padding == "symmetric") {
    mc.padding = PaddingPolicy::Symmetric;
  } else if (padding == "reject") {
    mc.padding = PaddingPolicy::Reject;
  } else {
    throw ConfigError("padding must be symmetric or reject, got '" + padding + "'");
  }
  mc.shared_encoder = cfg.get_bool("shared_encoder", true);
  return mc;
}

TrainConfig train_config(const KeyValueConfig& cfg) {
  TrainConfig tc;
  tc.max_epochs = cfg.get_size("max_epochs", tc.max_epochs);
  tc.patience = cfg.get_size("patience", tc.patience);
  tc.batch_size = cfg.get_size("batch_size", tc.batch_size);
  tc.adam.lr = cfg.get_double("lr", tc.adam.lr);
  tc.seed = cfg.get_u64("seed", tc.seed);
  if (tc.max_epochs == 0 || tc.batch_size == 0) {
    throw ConfigError("max_epochs and batch_size must be positive");
  }
  if (!(tc.adam.lr > 0.0)) throw ConfigError("lr must be positive");
  return tc;
}

Granularity granularity_for(Task task) {
  return task == Task::Sst5 ? Granularity::FineGrained : Granularity::Binary;
}

Granularity parse_granularity(const std::string& text) {
  if (text == "fine") return Granularity::FineGrained;
  if (text == "binary") return Granularity::Binary;
  throw ConfigError("granularity must be fine or binary, got '" + text + "'");
}

Vocabulary build_vocab(const Context& ctx, const std::vector<std::string>& tokens) {
  if (ctx.cfg.has("embeddings")) {
    std::vector<std::string> warnings;
    auto vocab = load_embeddings(ctx.path("embeddings"), tokens, &warnings);
    for (const auto& w : warnings) ctx.err << "warning: " << w << '\n';
    return vocab;
  }
  const auto dim = ctx.cfg.get_size("embedding_dim", 50);
  if (dim == 0) throw ConfigError("embedding_dim must be positive");
  return Vocabulary::random(tokens, dim, ctx.seed());
}

void append_tokens(std::vector<std::string>& all, std::span<const SentenceExample> xs) {
  for (const auto& x : xs) all.insert(all.end(), x.tokens.begin(), x.tokens.end());
}

void append_tokens(std::vector<std::string>& all, std::span<const QaExample> xs) {
  for (const auto& x : xs) {
    all.insert(all.end(), x.question.begin(), x.question.end());
    all.insert(all.end(), x.answer.begin(), x.answer.end());
  }
}

void write_idf(const IdfTable& idf, const fs::path& path) {
  std::vector<std::pair<std::string, double>> sorted(idf.begin(), idf.end());
  std::sort(sorted.begin(), sorted.end());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[32];
  for (const auto& [token, value] : sorted) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out << token << '\t' << buf << '\n';
  }
}

IdfTable read_idf(const fs::path& path) {
  IdfTable idf;
  std::istringstream in(read_file(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(path.string() + ": expected token<TAB>idf", line_no);
    try {
      idf[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": bad idf value", line_no);
    }
  }
  return idf;
}

void write_metrics_csv(const fs::path& path,
                       const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "metric,value\n";
  for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
}

// ---------------------------------------------------------------------------
// Training pieces shared by train, analyze and search

struct SentenceData {
  std::vector<SentenceExample> train, dev, test;
};

SentenceData load_sentence_data(const Context& ctx, Granularity g) {
  SentenceData d;
  d.train = sentences_from_trees(load_treebank(ctx.path("train")), g);
  d.dev = sentences_from_trees(load_treebank(ctx.path("dev")), g);
  if (ctx.cfg.has("test")) d.test = sentences_from_trees(load_treebank(ctx.path("test")), g);
  if (d.train.empty() || d.dev.empty()) throw ConfigError("train and dev sets must not be empty");
  return d;
}

struct PairData {
  std::vector<QaExample> train, dev, test;
};

PairData load_pair_data(const Context& ctx) {
  PairData d;
  d.train = load_qa_tsv(ctx.path("train"));
  d.dev = load_qa_tsv(ctx.path("dev"));
  if (ctx.cfg.has("test")) d.test = load_qa_tsv(ctx.path("test"));
  if (d.train.empty() || d.dev.empty()) throw ConfigError("train and dev sets must not be empty");
  return d;
}

IdfTable idf_of(std::span<const QaExample> train) {
  std::vector<std::vector<std::string>> answers;
  for (const auto& x : train) answers.push_back(x.answer);
  return compute_idf(answers);
}

struct Trained {
  TrainResult result;
  std::optional<SentenceClassifier> classifier;
  std::optional<SentenceMatcher> matcher;
};

Trained train_classifier(const ModelConfig& mc, const TrainConfig& tc, const Vocabulary& vocab,
                         const SentenceData& data, std::size_t threads) {
  Rng rng(tc.seed);
  ClassificationProblem problem(SentenceClassifier::init(mc, vocab.dim(), rng), vocab,
                                encode_sentences(data.train, vocab),
                                encode_sentences(data.dev, vocab),
                                encode_sentences(data.test, vocab), threads);
  Trained t;
  t.result = train(problem, tc);
  t.classifier = problem.model();
  return t;
}

Trained train_matcher(const ModelConfig& mc, const TrainConfig& tc, const Vocabulary& vocab,
                      const PairData& data, const IdfTable& idf, std::size_t threads) {
  Rng rng(tc.seed);
  MatchingProblem problem(SentenceMatcher::init(mc, vocab.dim(), rng), vocab,
                          encode_pairs(data.train, vocab, idf), encode_pairs(data.dev, vocab, idf),
                          encode_pairs(data.test, vocab, idf), threads);
  Trained t;
  t.result = train(problem, tc);
  t.matcher = problem.model();
  return t;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_train(const Context& ctx) {
  const auto mc = model_config(ctx.cfg);
  const auto tc = train_config(ctx.cfg);
  const auto threads = ctx.threads();
  const auto dir = ctx.out_dir();
  const auto ckpt = dir / "model.ckpt";
  const std::string metric = mc.task == Task::Qa ? "map" : "accuracy";

  Trained t;
  std::optional<Vocabulary> vocab;
  if (mc.task == Task::Qa) {
    const auto data = load_pair_data(ctx);
    std::vector<std::string> tokens;
    append_tokens(tokens, data.train);
    append_tokens(tokens, data.dev);
    append_tokens(tokens, data.test);
    vocab = build_vocab(ctx, tokens);
    const auto idf = idf_of(data.train);
    t = train_matcher(mc, tc, *vocab, data, idf, threads);
    save_model(*t.matcher, *vocab, ckpt);
    write_idf(idf, dir / "idf.txt");
  } else {
    const auto data = load_sentence_data(ctx, granularity_for(mc.task));
    std::vector<std::string> tokens;
    append_tokens(tokens, data.train);
    append_tokens(tokens, data.dev);
    append_tokens(tokens, data.test);
    vocab = build_vocab(ctx, tokens);
    t = train_classifier(mc, tc, *vocab, data, threads);
    save_model(*t.classifier, *vocab, ckpt);
  }
  save_embeddings(*vocab, dir / "vocab.txt");

  const auto& r = t.result;
  ctx.out << "task=" << to_string(mc.task) << " filter=" << to_string(mc.filter.kind)
          << " window=" << mc.filter.window << " feature_maps=" << mc.filter.feature_maps
          << " seed=" << tc.seed << '\n';
  ctx.out << "dev_" << metric << '=' << fmt(r.dev_metric);
  if (r.test_metric) ctx.out << " test_" << metric << '=' << fmt(*r.test_metric);
  ctx.out << " epochs=" << r.epochs << " best_epoch=" << r.best_epoch << '\n';
  ctx.out << "checkpoint=" << ckpt.string() << '\n';
  ctx.out << "time_s=" << fmt(r.seconds) << '\n';

  std::vector<std::pair<std::string, std::string>> rows{
      {"dev_" + metric, fmt(r.dev_metric)},
      {"epochs", std::to_string(r.epochs)},
      {"best_epoch", std::to_string(r.best_epoch)}};
  if (r.test_metric) rows.push_back({"test_" + metric, fmt(*r.test_metric)});
  write_metrics_csv(dir / "train_metrics.csv", rows);
  return kExitOk;
}

int cmd_eval(const Context& ctx) {
  const auto dir = ctx.out_dir();
  const fs::path ckpt = ctx.cfg.get_string("checkpoint", (dir / "model.ckpt").string());
  if (!fs::exists(ckpt)) throw ConfigError("checkpoint file not found: " + ckpt.string());
  const fs::path vocab_path =
      ctx.cfg.get_string("vocab", (ckpt.parent_path() / "vocab.txt").string());
  if (!fs::exists(vocab_path)) throw ConfigError("vocab file not found: " + vocab_path.string());
  const auto data_path = ctx.path("data");
  const auto threads = ctx.threads();

  const auto mc = load_model_config(ckpt);
  if (ctx.cfg.has("task") && parse_task(ctx.cfg.require_string("task")) != mc.task) {
    throw MismatchError("checkpoint was trained for task " + to_string(mc.task) + ", not " +
                        ctx.cfg.require_string("task"));
  }
  const auto vocab = load_embeddings(vocab_path);
  std::vector<std::pair<std::string, std::string>> rows;
  if (mc.task == Task::Qa) {
    const auto model = load_matcher(ckpt, vocab);
    const fs::path idf_path = ctx.cfg.get_string("idf", (ckpt.parent_path() / "idf.txt").string());
    const auto idf = read_idf(idf_path);
    const auto pairs = encode_pairs(load_qa_tsv(data_path), vocab, idf);
    const auto m = evaluate_ranking(model, pairs, vocab, threads);
    ctx.out << "map=" << fmt(m.map) << " mrr=" << fmt(m.mrr) << " questions=" << m.questions
            << '\n';
    rows = {{"map", fmt(m.map)}, {"mrr", fmt(m.mrr)}, {"questions", std::to_string(m.questions)}};
  } else {
    const auto model = load_classifier(ckpt, vocab);
    const auto sentences =
        sentences_from_trees(load_treebank(data_path), granularity_for(mc.task));
    if (sentences.empty()) throw ConfigError("no labelled sentences in " + data_path.string());
    const auto acc = evaluate_accuracy(model, encode_sentences(sentences, vocab), vocab, threads);
    ctx.out << "accuracy=" << fmt(acc) << " examples=" << sentences.size() << '\n';
    rows = {{"accuracy", fmt(acc)}, {"examples", std::to_string(sentences.size())}};
  }
  write_metrics_csv(dir / "eval_metrics.csv", rows);
  return kExitOk;
}

int cmd_analyze(const Context& ctx) {
  const auto dir = ctx.out_dir();
  const auto trees = load_treebank(ctx.path("treebank"));
  const auto task = parse_task(ctx.cfg.get_string("task", "sst5"));
  if (task == Task::Qa) throw ConfigError("analyze needs a sentiment task (sst2 or sst5)");
  const auto granularity = ctx.cfg.has("granularity")
                               ? parse_granularity(ctx.cfg.require_string("granularity"))
                               : granularity_for(task);
  const auto index = build_phrase_index(trees, granularity);
  if (index.empty()) throw ConfigError("no sentences left to analyze");
  std::vector<std::size_t> default_ms;
  for (std::size_t m = 1; m <= 10; ++m) default_ms.push_back(m);
  const auto ms = ctx.cfg.get_size_list("ms", default_ms);
  const auto mode_text = ctx.cfg.get_string("match_mode", "exact");
  if (mode_text != "exact" && mode_text != "containment") {
    throw ConfigError("match_mode must be exact or containment");
  }
  const auto mode = mode_text == "exact" ? MatchMode::Exact : MatchMode::Containment;

  // Hit rates need trained models: one linear and one RNF model per m.
  const bool probe = ctx.cfg.has("train");
  std::optional<SentenceData> data;
  std::optional<Vocabulary> vocab;
  ModelConfig base;
  TrainConfig tc;
  FilterKind rnf_kind = FilterKind::RnfLstm;
  if (probe) {
    base = model_config(ctx.cfg);
    base.task = granularity == Granularity::FineGrained ? Task::Sst5 : Task::Sst2;
    if (base.filter.kind != FilterKind::Linear) rnf_kind = base.filter.kind;
    tc = train_config(ctx.cfg);
    data = load_sentence_data(ctx, granularity);
    std::vector<std::string> tokens;
    append_tokens(tokens, data->train);
    append_tokens(tokens, data->dev);
    append_tokens(tokens, data->test);
    for (const auto& s : index) tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
    vocab = build_vocab(ctx, tokens);
  }

  std::vector<AnalysisRow> rows;
  for (auto m : ms) {
    AnalysisRow row;
    row.m = m;
    const auto llc = llc_ratio(index, m);
    row.llc_ratio = llc.ratio;
    row.llc_support = llc.support;
    if (probe) {
      for (auto kind : {FilterKind::Linear, rnf_kind}) {
        auto mc = base;
        mc.filter.kind = kind;
        mc.filter.window = m;
        const auto t = train_classifier(mc, tc, *vocab, *data, ctx.threads());
        const auto hr = hit_rate(
            encoder_features(t.classifier->encoder(), *vocab, index, mc.padding), index, mode,
            ctx.threads());
        (kind == FilterKind::Linear ? row.hit_rate_linear : row.hit_rate_rnf) = hr.rate;
        row.sentences_evaluated = hr.evaluated;
      }
    }
    rows.push_back(row);
  }
  emit_analysis_report(rows, dir / "analysis.csv", dir / "analysis.svg");
  ctx.out << read_file(dir / "analysis.csv");
  return kExitOk;
}

int cmd_bench(const Context& ctx) {
  BenchConfig bc;
  bc.batch = ctx.cfg.get_size("batch_size", bc.batch);
  bc.length = ctx.cfg.get_size("length", bc.length);
  bc.window = ctx.cfg.get_size("window", bc.window);
  bc.hidden = ctx.cfg.get_size("feature_maps", bc.hidden);
  bc.embedding = ctx.cfg.get_size("embedding_dim", bc.embedding);
  bc.workers = ctx.cfg.get_size_list("workers", bc.workers);
  bc.repetitions = ctx.cfg.get_size("repetitions", bc.repetitions);
  bc.warmup = ctx.cfg.get_size("warmup", bc.warmup);
  bc.cell = parse_filter_kind(ctx.cfg.get_string("filter", "rnf-lstm"));
  bc.backward = ctx.cfg.get_bool("backward", false);
  bc.seed = ctx.seed();
  bc.validate();
  const auto dir = ctx.out_dir();
  const auto report = run_bench(bc);
  std::ofstream csv(dir / "bench.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write " + (dir / "bench.csv").string());
  write_bench_csv(report, csv);
  write_bench_csv(report, ctx.out);
  ctx.out << "cross_check_max_abs_diff=" << report.max_abs_diff << '\n';
  return kExitOk;
}

int cmd_search(const Context& ctx) {
  const auto base = model_config(ctx.cfg);
  const auto tc = train_config(ctx.cfg);
  const auto threads = ctx.threads();
  const auto dir = ctx.out_dir();
  SearchSpace space;
  space.budget = ctx.cfg.get_size("budget", space.budget);
  if (space.budget == 0) throw ConfigError("budget must be positive");
  space.hidden_units = ctx.cfg.get_size_list("search_hidden_units", space.hidden_units);
  if (ctx.cfg.has("search_windows")) {
    space.window_linear = space.window_rnf = ctx.cfg.get_size_list("search_windows", {});
  }
  space.dropout = ctx.cfg.get_double_list("search_dropout", space.dropout);

  std::optional<SentenceData> sentences;
  std::optional<PairData> pairs;
  IdfTable idf;
  std::vector<std::string> tokens;
  if (base.task == Task::Qa) {
    pairs = load_pair_data(ctx);
    append_tokens(tokens, pairs->train);
    append_tokens(tokens, pairs->dev);
    append_tokens(tokens, pairs->test);
    idf = idf_of(pairs->train);
  } else {
    sentences = load_sentence_data(ctx, granularity_for(base.task));
    append_tokens(tokens, sentences->train);
    append_tokens(tokens, sentences->dev);
    append_tokens(tokens, sentences->test);
  }
  const auto vocab = build_vocab(ctx, tokens);

  TrialFn trial = [&](const SearchConfig& sc, std::uint64_t seed) {
    auto mc = base;
    mc.filter.feature_maps = sc.hidden_units;
    mc.filter.window = sc.window;
    mc.dropout = sc.dropout;
    auto trial_tc = tc;
    trial_tc.seed = seed;
    if (pairs) return train_matcher(mc, trial_tc, vocab, *pairs, idf, threads).result;
    return train_classifier(mc, trial_tc, vocab, *sentences, threads).result;
  };
  const auto log = dir / "search_log.csv";
  const auto result = random_search(space, base.filter.kind, trial, ctx.seed(), log);
  const auto& best = result.best;
  ctx.out << "trials=" << result.trials.size() << " best_trial=" << best.trial_id
          << " hidden_units=" << best.config.hidden_units << " window=" << best.config.window
          << " dev_metric=" << fmt(best.result->dev_metric);
  if (best.result->test_metric) ctx.out << " test_metric=" << fmt(*best.result->test_metric);
  ctx.out << '\n' << "log=" << log.string() << '\n';
  return kExitOk;
}

int report(std::ostream& err, const std::string& kind, const std::exception& e, int code) {
  err << "error (" << kind << "): " << e.what() << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrent neural filter sentence models"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path, task, filter, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads, window;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--threads", threads, "Worker threads (1 = sequential reference)");
  app.add_option("--task", task, "Task")->check(CLI::IsMember({"sst2", "sst5", "qa"}));
  app.add_option("--filter", filter, "Filter kind")
      ->check(CLI::IsMember({"linear", "rnf-gru", "rnf-lstm"}));
  app.add_option("--window", window, "Window width m");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--set", overrides, "Extra key=value settings (repeatable)");

  const std::pair<const char*, const char*> commands[] = {
      {"train", "Train one model and write a checkpoint"},
      {"eval", "Evaluate a checkpoint on a data file"},
      {"analyze", "Label consistency and key phrase hit rates per window width"},
      {"bench", "Time parallel RNF convolution against a full-sequence RNN"},
      {"search", "Random hyperparameter search"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Context ctx{config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path), out,
                err};
    if (seed) ctx.cfg.set("seed", std::to_string(*seed));
    if (threads) ctx.cfg.set("threads", std::to_string(*threads));
    if (window) ctx.cfg.set("window", std::to_string(*window));
    if (!task.empty()) ctx.cfg.set("task", task);
    if (!filter.empty()) ctx.cfg.set("filter", filter);
    if (!out_dir.empty()) ctx.cfg.set("out", out_dir);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
      ctx.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    ctx.cfg.reject_unknown(kKnownKeys);

    const auto name = app.get_subcommands().front()->get_name();
    if (name == "train") return cmd_train(ctx);
    if (name == "eval") return cmd_eval(ctx);
    if (name == "analyze") return cmd_analyze(ctx);
    if (name == "bench") return cmd_bench(ctx);
    return cmd_search(ctx);
  } catch (const MismatchError& e) {
    return report(err, "mismatch", e, kExitMismatch);
  } catch (const LoadError& e) {
    return report(err, "checkpoint", e, kExitMismatch);
  } catch (const NumericError& e) {
    return report(err, "numeric", e, kExitNumeric);
  } catch (const BenchCheckError& e) {
    return report(err, "cross-check", e, kExitNumeric);
  } catch (const SearchError& e) {
    return report(err, "search", e, kExitNumeric);
  } catch (const ConfigError& e) {
    return report(err, "config", e, kExitUsage);
  } catch (const ArgumentError& e) {
    return report(err, "config", e, kExitUsage);
  } catch (const FormatError& e) {
    return report(err, "input", e, kExitUsage);
  } catch (const ParseError& e) {
    return report(err, "input", e, kExitUsage);
  } catch (const DataError& e) {
    return report(err, "input", e, kExitUsage);
  } catch (const SentenceTooShortError& e) {
    return report(err, "input", e, kExitUsage);
  } catch (const IoError& e) {
    return report(err, "io", e, kExitUsage);
  } catch (const std::exception& e) {
    return report(err, "internal", e, kExitFailure);
  }
}

}  // namespace rnf
