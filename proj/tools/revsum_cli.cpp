#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "revsum/analysis.hpp"
#include "revsum/config.hpp"
#include "revsum/data.hpp"
#include "revsum/errors.hpp"
#include "revsum/gradient_suite.hpp"
#include "revsum/heatmap.hpp"
#include "revsum/models.hpp"
#include "revsum/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace revsum;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string read_text(std::istream& in) {
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// One {"review", "summary"[, "rating"]} object; the rating is optional here.
Example read_single_example(std::istream& in) {
  json j;
  try {
    j = json::parse(read_text(in));
  } catch (const json::parse_error& e) {
    throw DataError(std::string("input record: ") + e.what());
  }
  if (!j.is_object()) throw DataError("input record is not an object");
  Example ex;
  for (const char* field : {"review", "summary"}) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string()) {
      throw DataError(std::string("input record: field '") + field + "' must be a string");
    }
  }
  ex.review = tokenize(j["review"].get<std::string>());
  ex.summary = tokenize(j["summary"].get<std::string>());
  ex.rating = 1;
  if (auto r = j.find("rating"); r != j.end()) {
    if (!r->is_number_integer() || r->get<int>() < 1 || r->get<int>() > 5) {
      throw DataError("input record: rating must be an integer in [1, 5]");
    }
    ex.rating = r->get<int>();
  }
  if (ex.review.empty()) throw DataError("input record: empty review");
  return ex;
}

json trace_json(const AttentionTrace& trace) {
  json out = json::array();
  for (const auto& r : trace.records) {
    out.push_back({{"kind", r.kind}, {"source", r.source}, {"layer", r.layer},
                   {"head", r.head}, {"rows", r.rows}, {"cols", r.cols},
                   {"weights", r.weights}});
  }
  return out;
}

struct TrainArgs {
  std::string config, corpus, dev, checkpoint, history;
};

int run_train(const TrainArgs& a) {
  const RunConfig run = load_run_config(a.config);
  const Corpus train_corpus = load_corpus(a.corpus);
  const Corpus dev_corpus = a.dev.empty() ? train_corpus : load_corpus(a.dev);
  const Vocabulary vocab = Vocabulary::build(train_corpus, run.min_count);

  ModelConfig mc = run.model;
  mc.vocab_size = vocab.size();
  Model model = Model::build(mc, run.train.seed);
  if (run.embeddings) {
    auto table = load_embeddings(*run.embeddings, vocab, mc.embedding_dim, run.train.seed);
    model.set_embeddings(table.table);
    std::cerr << "embeddings: matched " << table.matched << " of " << vocab.size()
              << " tokens\n";
  }

  const auto train_set = encode_corpus(vocab, train_corpus);
  const auto dev_set = encode_corpus(vocab, dev_corpus);
  auto result = train(model, train_set, dev_set, run.train);
  for (const auto& r : result.history) {
    std::cerr << "epoch " << r.epoch << " loss " << r.train_loss << " dev "
              << r.dev_accuracy << '\n';
  }
  save_checkpoint(a.checkpoint, result.best, vocab);
  if (!a.history.empty()) {
    auto out = open_output(a.history);
    write_history(out, result.history);
  }
  std::cout << json{{"best_epoch", result.best_epoch},
                    {"best_dev_accuracy", result.best_dev_accuracy},
                    {"epochs_run", result.history.size()},
                    {"parameters", result.best.parameter_count()}}
                   .dump()
            << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint, corpus, out, tag;
};

int run_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Corpus corpus = load_corpus(a.corpus);
  const auto encoded = encode_corpus(ck.vocab, corpus);
  const auto result = evaluate(ck.model, encoded);
  const std::string tag =
      a.tag.empty() ? std::string(variant_name(ck.model.config().variant)) : a.tag;
  if (!a.out.empty()) {
    std::vector<PredictionRecord> records;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      records.push_back({static_cast<std::int64_t>(i), corpus[i].rating,
                         result.predictions[i], tag});
    }
    auto out = open_output(a.out);
    write_predictions(out, records);
  }
  std::cout << json{{"model", tag}, {"examples", corpus.size()},
                    {"accuracy", result.accuracy}}
                   .dump()
            << '\n';
  return 0;
}

int run_predict(const std::string& checkpoint) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Example ex = read_single_example(std::cin);
  const auto encoded = encode_example(ck.vocab, ex);
  ForwardOptions options;
  options.record_trace = true;
  ForwardResult out;
  {
    NoGradGuard no_grad;
    out = ck.model.forward(encoded, options);
  }
  auto probs = out.probs.values();
  std::cout << json{{"rating", argmax_rating(out.probs)},
                    {"probabilities", std::vector<double>(probs.begin(), probs.end())},
                    {"trace", trace_json(out.trace)}}
                   .dump()
            << '\n';
  return 0;
}

struct AnalyzeArgs {
  std::string review_preds, summary_preds, corpus, out;
  std::vector<std::size_t> edges = kDefaultLengthEdges;
};

int run_analyze(const AnalyzeArgs& a) {
  const auto review = load_predictions(a.review_preds);
  const auto summary = load_predictions(a.summary_preds);
  const auto decomposition = conflicting_set(review, summary);

  BucketsByModel buckets;
  if (!a.corpus.empty()) {
    const Corpus corpus = load_corpus(a.corpus);
    std::vector<std::size_t> lengths;
    for (const auto& r : review) {
      if (r.id < 0 || static_cast<std::size_t>(r.id) >= corpus.size()) {
        throw DataError("prediction id " + std::to_string(r.id) +
                        " is not an index into the corpus");
      }
      const auto& ex = corpus[static_cast<std::size_t>(r.id)];
      if (ex.rating != r.gold) {
        throw DataError("gold label of example " + std::to_string(r.id) +
                        " disagrees with the corpus");
      }
      lengths.push_back(ex.review.size());
    }
    buckets["review"] = length_buckets(review, lengths, a.edges);
    buckets["summary"] = length_buckets(summary, lengths, a.edges);
  }
  const auto report = analysis_report_json(decomposition, buckets);
  if (a.out.empty()) {
    std::cout << report << '\n';
  } else {
    auto out = open_output(a.out);
    out << report << '\n';
  }
  return 0;
}

struct VisualizeArgs {
  std::string checkpoint, corpus, source = "review", out;
  std::size_t index = 0;
};

int run_visualize(const VisualizeArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  Example ex;
  if (a.corpus.empty()) {
    ex = read_single_example(std::cin);
  } else {
    const Corpus corpus = load_corpus(a.corpus);
    if (a.index >= corpus.size()) {
      throw DataError("index " + std::to_string(a.index) + " outside corpus of " +
                      std::to_string(corpus.size()) + " examples");
    }
    ex = corpus[a.index];
  }
  const auto encoded = encode_example(ck.vocab, ex);
  ForwardOptions options;
  options.record_trace = true;
  ForwardResult out;
  {
    NoGradGuard no_grad;
    out = ck.model.forward(encoded, options);
  }

  std::vector<std::string> tokens(ex.review.begin(),
                                  ex.review.begin() + static_cast<long>(encoded.review.size()));
  std::vector<std::string> summary_tokens(
      ex.summary.begin(), ex.summary.begin() + static_cast<long>(encoded.summary.size()));
  if (a.source == "summary") {
    tokens = summary_tokens;
  } else if (a.source == "joint") {
    tokens.insert(tokens.end(), summary_tokens.begin(), summary_tokens.end());
  }
  AttentionTrace selected;
  for (const auto& r : out.trace.records) {
    if (r.source == a.source) selected.records.push_back(r);
  }
  if (selected.records.empty()) {
    throw DataError(std::string(variant_name(ck.model.config().variant)) +
                    " records no attention over the " + a.source + " text");
  }
  export_heatmap(selected, tokens, a.out);
  std::cout << json{{"html", a.out},
                    {"sidecar", heatmap_sidecar_path(a.out).string()},
                    {"records", selected.records.size()},
                    {"rating", argmax_rating(out.probs)}}
                   .dump()
            << '\n';
  return 0;
}

struct GenArgs {
  std::string config, out;
  std::size_t count = 0;
  std::optional<std::uint64_t> seed;
};

int run_gen_data(const GenArgs& a) {
  SyntheticSpec spec = SyntheticSpec::defaults();
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw ConfigError("cannot open " + a.config);
    spec = parse_synthetic_spec(read_text(in));
  }
  if (a.seed) spec.seed = *a.seed;
  const Corpus corpus = gen_synthetic(spec, a.count);
  save_corpus(a.out, corpus);
  std::cout << json{{"examples", corpus.size()}, {"out", a.out}}.dump() << '\n';
  return 0;
}

int run_gradcheck(std::uint64_t seed, std::size_t samples) {
  bool ok = true;
  auto report = [&](const std::vector<GradCheckOutcome>& outcomes) {
    for (const auto& o : outcomes) {
      std::printf("%-28s max_rel_err %.3e  tol %.0e  entries %zu  %s\n", o.name.c_str(),
                  o.max_relative_error, o.tolerance, o.checked,
                  o.passed() ? "ok" : "FAIL");
      ok = ok && o.passed();
    }
  };
  report(run_op_gradient_checks(seed));
  report(run_model_gradient_checks(seed, samples));
  if (!ok) {
    std::cerr << "gradcheck: some checks exceeded their tolerance\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Review and summary sentiment classifier"};
  app.require_subcommand(1);
  app.allow_windows_style_options(false);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--config", train_args.config, "Run config (flat JSON)")
      ->required();
  train_cmd->add_option("--corpus", train_args.corpus, "Training corpus (JSONL)")
      ->required();
  train_cmd->add_option("--dev", train_args.dev, "Dev corpus; defaults to the training corpus");
  train_cmd->add_option("--checkpoint", train_args.checkpoint, "Checkpoint to write")
      ->required();
  train_cmd->add_option("--history", train_args.history, "Per-epoch history (JSONL)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and predictions on a corpus");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--corpus", eval_args.corpus)->required();
  eval_cmd->add_option("--out", eval_args.out, "Prediction records (JSONL)");
  eval_cmd->add_option("--model-tag", eval_args.tag, "Tag stored in each record");

  std::string predict_checkpoint;
  auto* predict_cmd =
      app.add_subcommand("predict", "Rate one JSON record read from standard input");
  predict_cmd->add_option("--checkpoint", predict_checkpoint)->required();

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand(
      "analyze", "Conflicting-set decomposition and length-bucket accuracy");
  analyze_cmd->add_option("--review-preds", analyze_args.review_preds)->required();
  analyze_cmd->add_option("--summary-preds", analyze_args.summary_preds)->required();
  analyze_cmd->add_option("--corpus", analyze_args.corpus,
                          "Corpus the ids index; enables length buckets");
  analyze_cmd->add_option("--edges", analyze_args.edges, "Bucket edges in review tokens")
      ->delimiter(',');
  analyze_cmd->add_option("--out", analyze_args.out, "Report path (default stdout)");

  VisualizeArgs vis_args;
  auto* vis_cmd = app.add_subcommand("visualize", "Export an attention heatmap");
  vis_cmd->add_option("--checkpoint", vis_args.checkpoint)->required();
  vis_cmd->add_option("--corpus", vis_args.corpus, "Read the example from a corpus");
  vis_cmd->add_option("--index", vis_args.index, "Example index within --corpus");
  vis_cmd->add_option("--source", vis_args.source, "Text whose attention is drawn")
      ->check(CLI::IsMember({"review", "summary", "joint"}));
  vis_cmd->add_option("--out", vis_args.out, "HTML path; a .json sidecar goes next to it")
      ->required();

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  gen_cmd->add_option("--config", gen_args.config, "Generator spec (JSON)");
  gen_cmd->add_option("--count", gen_args.count)->required();
  gen_cmd->add_option("--seed", gen_args.seed, "Overrides the spec seed");
  gen_cmd->add_option("--out", gen_args.out)->required();

  std::uint64_t grad_seed = 1;
  std::size_t grad_samples = kModelGradSamples;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad_cmd->add_option("--seed", grad_seed);
  grad_cmd->add_option("--samples", grad_samples, "Entries checked per model variant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*predict_cmd) return run_predict(predict_checkpoint);
    if (*analyze_cmd) return run_analyze(analyze_args);
    if (*vis_cmd) return run_visualize(vis_args);
    if (*gen_cmd) return run_gen_data(gen_args);
    if (*grad_cmd) return run_gradcheck(grad_seed, grad_samples);
  } catch (const std::exception& e) {
    std::cerr << "revsum: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
