// babilab: corpus generation, disfluency augmentation, seq2seq training,
// and the probing/analysis suite, one subcommand per pipeline stage.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "babilab/corpus.hpp"
#include "babilab/disfluency.hpp"
#include "babilab/experiment.hpp"
#include "babilab/heatmap.hpp"
#include "babilab/model.hpp"
#include "babilab/probe.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace babilab;

namespace {

std::string default_data_dir() {
  const char* env = std::getenv("BABILAB_DATA");
  return env ? env : "data";
}

Corpus load_corpus(const std::string& path, Split split = Split::test) {
  return parse_babi(read_file(path), split);
}

json category_json(const EvalCategory& c) {
  return {{"count", c.count},
          {"word_accuracy", c.word_accuracy},
          {"sequence_accuracy", c.sequence_accuracy}};
}

struct ModelOpts {
  int embedding = 128;
  int hidden = 500;
  bool attention = true;
  double dropout = 0.2;

  ModelConfig to_config() const {
    ModelConfig mc;
    mc.embedding_dim = embedding;
    mc.hidden_dim = hidden;
    mc.attention = attention;
    mc.dropout_rate = float(dropout);
    mc.vocab_size = 1;  // placeholder; set from the vocabulary before use
    return mc;
  }
};

struct TrainOpts {
  int batch = 32;
  int epochs = 30;
  int patience = 3;
  double lr = 0.001;

  TrainConfig to_config(uint64_t seed) const {
    TrainConfig tc;
    tc.batch_size = batch;
    tc.max_epochs = epochs;
    tc.patience = patience;
    tc.learning_rate = lr;
    tc.seed = seed;
    return tc;
  }
};

void add_model_opts(CLI::App* cmd, ModelOpts& m) {
  cmd->add_option("--embedding", m.embedding, "Embedding dimension");
  cmd->add_option("--hidden", m.hidden, "Hidden dimension");
  cmd->add_flag("--attention,!--no-attention", m.attention, "Attention on/off");
  cmd->add_option("--dropout", m.dropout, "Embedding dropout rate");
}

void add_train_opts(CLI::App* cmd, TrainOpts& t) {
  cmd->add_option("--batch", t.batch, "Mini-batch size");
  cmd->add_option("--epochs", t.epochs, "Epoch cap");
  cmd->add_option("--patience", t.patience, "Early-stopping patience");
  cmd->add_option("--lr", t.lr, "Adam learning rate");
}

StateDataset states_for(const std::string& checkpoint, const std::string& corpus_path,
                        const std::string& annotations_path,
                        const std::string& cache_path) {
  if (!cache_path.empty() && fs::exists(cache_path)) {
    std::ifstream in(cache_path, std::ios::binary);
    return read_state_dataset(in);
  }
  const auto loaded = load_checkpoint(checkpoint);
  const Corpus corpus = load_corpus(corpus_path);
  const AnnotatedCorpus annotated =
      parse_annotations(corpus, read_file(annotations_path));
  StateDataset ds = collect_encoder_states(loaded.model, loaded.vocab, annotated);
  if (!cache_path.empty()) {
    std::ostringstream buf(std::ios::binary);
    write_state_dataset(buf, ds);
    write_file_atomic(cache_path, buf.str());
  }
  return ds;
}

int run(int argc, char** argv) {
  CLI::App app{"Disfluency-dialogue laboratory: corpora, seq2seq models, probes"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a config file");

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "Generate a fluent dialogue corpus");
  std::string gen_out = default_data_dir();
  uint64_t gen_seed = 0;
  size_t gen_size = 1000;
  double p_greeting = 0.9, p_upfront = 0.75;
  std::string catalog_file;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--seed", gen_seed, "Generation seed")->required();
  gen->add_option("--size", gen_size, "Dialogues per split");
  gen->add_option("--p-greeting", p_greeting, "Probability of a greeting exchange");
  gen->add_option("--p-upfront", p_upfront,
                  "Probability the opening request volunteers slots");
  gen->add_option("--catalog", catalog_file, "Catalog/template config file");

  // ---- augment ----
  auto* aug = app.add_subcommand("augment", "Inject disfluencies into a corpus");
  std::string aug_in, aug_out, aug_ann, aug_policy = "fullET";
  uint64_t aug_seed = 0;
  double p_hes = 0.21, p_res = 0.40, p_cor = 0.05;
  aug->add_option("--in", aug_in, "Fluent corpus file")->required();
  aug->add_option("--out", aug_out, "Augmented corpus file")->required();
  aug->add_option("--annotations", aug_ann, "Annotation sidecar (default <out>.ann)");
  aug->add_option("--policy", aug_policy, "Editing-term policy: noET|realET|fullET");
  aug->add_option("--seed", aug_seed, "Augmentation seed")->required();
  aug->add_option("--p-hesitation", p_hes, "Hesitation rate");
  aug->add_option("--p-restart", p_res, "Restart rate");
  aug->add_option("--p-correction", p_cor, "Self-correction rate");

  // ---- stats ----
  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  std::string stats_in;
  stats->add_option("--in", stats_in, "Corpus file")->required();

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train a seq2seq model");
  std::string tr_train, tr_dev, tr_out;
  uint64_t tr_seed = 0;
  ModelOpts tr_model;
  TrainOpts tr_opts;
  tr->add_option("--train", tr_train, "Training corpus")->required();
  tr->add_option("--dev", tr_dev, "Development corpus")->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--seed", tr_seed, "Training seed")->required();
  add_model_opts(tr, tr_model);
  add_train_opts(tr, tr_opts);

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
  std::string ev_ckpt, ev_test, ev_records, ev_json;
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required();
  ev->add_option("--test", ev_test, "Test corpus")->required();
  ev->add_option("--records", ev_records, "Per-example TSV output");
  ev->add_option("--json", ev_json, "Metrics JSON output");

  // ---- grid ----
  auto* gr = app.add_subcommand("grid", "2x2 train/test accuracy grid");
  std::string gr_a_train, gr_a_dev, gr_a_test, gr_b_train, gr_b_dev, gr_b_test;
  std::string gr_name_a = "babi", gr_name_b = "babi+";
  std::string gr_json, gr_cache, gr_seeds = "1,2";
  bool gr_attn = true, gr_noattn = true;
  ModelOpts gr_model;
  TrainOpts gr_opts;
  gr->add_option("--a-train", gr_a_train, "Corpus A training file")->required();
  gr->add_option("--a-dev", gr_a_dev)->required();
  gr->add_option("--a-test", gr_a_test)->required();
  gr->add_option("--b-train", gr_b_train, "Corpus B training file")->required();
  gr->add_option("--b-dev", gr_b_dev)->required();
  gr->add_option("--b-test", gr_b_test)->required();
  gr->add_option("--a-name", gr_name_a, "Corpus A label");
  gr->add_option("--b-name", gr_name_b, "Corpus B label");
  gr->add_option("--seeds", gr_seeds, "Comma-separated seeds");
  gr->add_flag("--attentive,!--no-attentive", gr_attn, "Run the attentive variant");
  gr->add_flag("--non-attentive,!--no-non-attentive", gr_noattn,
               "Run the non-attentive variant");
  gr->add_option("--json", gr_json, "Grid report JSON output");
  gr->add_option("--cache", gr_cache, "Checkpoint cache directory");
  add_model_opts(gr, gr_model);
  add_train_opts(gr, gr_opts);

  // ---- probe-structure ----
  auto* ps = app.add_subcommand("probe-structure",
                                "Diagnostic classifiers for disfluency labels");
  std::string ps_ckpt, ps_corpus, ps_ann, ps_out, ps_states;
  uint64_t ps_seed = 0;
  ps->add_option("--checkpoint", ps_ckpt)->required();
  ps->add_option("--corpus", ps_corpus, "Annotated corpus file")->required();
  ps->add_option("--annotations", ps_ann, "Annotation sidecar")->required();
  ps->add_option("--seed", ps_seed)->required();
  ps->add_option("--out", ps_out, "Report file (stdout otherwise)");
  ps->add_option("--states", ps_states, "State dataset cache file");

  // ---- probe-slots ----
  auto* sl = app.add_subcommand("probe-slots", "Word-by-word slot-value probes");
  std::string sl_ckpt, sl_corpus, sl_ann, sl_out, sl_states;
  uint64_t sl_seed = 0;
  int sl_delay = 0;
  sl->add_option("--checkpoint", sl_ckpt)->required();
  sl->add_option("--corpus", sl_corpus)->required();
  sl->add_option("--annotations", sl_ann)->required();
  sl->add_option("--seed", sl_seed)->required();
  sl->add_option("--delay", sl_delay, "Predict the value current this many words earlier");
  sl->add_option("--out", sl_out, "Report file (stdout otherwise)");
  sl->add_option("--states", sl_states, "State dataset cache file");

  // ---- attention-map ----
  auto* am = app.add_subcommand("attention-map", "Aggregate API-call attention");
  std::string am_ckpt, am_corpus, am_out, am_svg, am_ppm, am_dumps;
  double am_tau = 0.2;
  size_t am_dump_limit = 10;
  am->add_option("--checkpoint", am_ckpt)->required();
  am->add_option("--corpus", am_corpus)->required();
  am->add_option("--tau", am_tau, "Rendering threshold");
  am->add_option("--out", am_out, "Alignment matrix text file")->required();
  am->add_option("--svg", am_svg, "SVG rendering output");
  am->add_option("--ppm", am_ppm, "PPM rendering output");
  am->add_option("--dumps", am_dumps, "Directory for per-example attention dumps");
  am->add_option("--dump-limit", am_dump_limit, "Maximum per-example dumps");

  // ---- trigger ----
  auto* tg = app.add_subcommand("trigger", "Incremental API-call triggering");
  std::string tg_ckpt, tg_corpus, tg_prompt;
  tg->add_option("--checkpoint", tg_ckpt)->required();
  tg->add_option("--corpus", tg_corpus)->required();
  tg->add_option("--prompt", tg_prompt,
                 "Override prompt tokens (space-separated, <s>/<u> marks allowed)");

  // ---- taxonomy ----
  auto* tx = app.add_subcommand("taxonomy", "Classify wrong utterance responses");
  std::string tx_ckpt, tx_corpus, tx_out;
  tx->add_option("--checkpoint", tx_ckpt)->required();
  tx->add_option("--corpus", tx_corpus)->required();
  tx->add_option("--out", tx_out, "Report file (stdout otherwise)");

  // ---- gradcheck ----
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  int gc_embedding = 8, gc_hidden = 12, gc_vocab = 20;
  size_t gc_coords = 200;
  bool gc_attention = true;
  uint64_t gc_seed = 7;
  double gc_tol = 1e-3;
  gc->add_option("--embedding", gc_embedding);
  gc->add_option("--hidden", gc_hidden);
  gc->add_option("--vocab", gc_vocab);
  gc->add_option("--coords", gc_coords, "Coordinates to probe");
  gc->add_flag("--attention,!--no-attention", gc_attention);
  gc->add_option("--seed", gc_seed);
  gc->add_option("--tol", gc_tol, "Maximum tolerated relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // any command-line problem is a usage error
  }

  if (*gen) {
    GenConfig cfg;
    cfg.seed = gen_seed;
    cfg.train_size = cfg.dev_size = cfg.test_size = cfg.test_oov_size = gen_size;
    cfg.p_greeting = p_greeting;
    cfg.p_upfront = p_upfront;
    if (!catalog_file.empty())
      parse_catalog_config(read_file(catalog_file), cfg.catalog, cfg.templates);
    const CorpusBundle bundle = generate_corpus(cfg);
    fs::create_directories(gen_out);
    const fs::path dir(gen_out);
    write_file_atomic((dir / "train.txt").string(), serialize_babi(bundle.train));
    write_file_atomic((dir / "dev.txt").string(), serialize_babi(bundle.dev));
    write_file_atomic((dir / "test.txt").string(), serialize_babi(bundle.test));
    write_file_atomic((dir / "test-oov.txt").string(), serialize_babi(bundle.test_oov));
    write_file_atomic((dir / "stats.tsv").string(),
                      corpus_stats(bundle.train).to_tsv());
    std::cout << "gen: wrote 4 splits of " << gen_size << " dialogues to " << gen_out
              << "\n";
  } else if (*aug) {
    const auto policy = et_policy_from_name(aug_policy);
    if (!policy) throw DataError("unknown editing-term policy " + aug_policy);
    DisfluencyConfig cfg = DisfluencyConfig::with_policy(*policy);
    cfg.p_hesitation = p_hes;
    cfg.p_restart = p_res;
    cfg.p_correction = p_cor;
    const Corpus corpus = load_corpus(aug_in);
    const AnnotatedCorpus annotated = augment_corpus(corpus, cfg, aug_seed);
    if (aug_ann.empty()) aug_ann = aug_out + ".ann";
    write_file_atomic(aug_out, serialize_babi(annotated.to_corpus()));
    write_file_atomic(aug_ann, serialize_annotations(annotated));
    std::cout << "augment: " << corpus.dialogues.size() << " dialogues -> " << aug_out
              << " (" << aug_policy << ", annotations " << aug_ann << ")\n";
  } else if (*stats) {
    std::cout << corpus_stats(load_corpus(stats_in)).to_tsv();
  } else if (*tr) {
    const Corpus train_c = load_corpus(tr_train, Split::train);
    const Corpus dev_c = load_corpus(tr_dev, Split::dev);
    const auto loaded = train_or_load(train_c, dev_c, tr_model.to_config(),
                                      tr_opts.to_config(tr_seed), "", &std::cerr);
    save_checkpoint(tr_out, loaded.model, loaded.vocab);
    std::cout << "train: checkpoint written to " << tr_out << "\n";
  } else if (*ev) {
    const auto loaded = load_checkpoint(ev_ckpt);
    const Corpus test_c = load_corpus(ev_test);
    const auto examples = build_examples(test_c.dialogues, loaded.vocab);
    const auto result = evaluate(loaded.model, examples, loaded.vocab);
    if (!ev_records.empty())
      write_file_atomic(ev_records,
                        eval_records_tsv(result, examples, test_c.dialogues, loaded.vocab));
    if (!ev_json.empty()) {
      json j = {{"all", category_json(result.all)},
                {"api", category_json(result.api)},
                {"utterance", category_json(result.utterance)}};
      write_file_atomic(ev_json, j.dump(2) + "\n");
    }
    std::cout << "eval: api seq " << result.api.sequence_accuracy * 100.0 << " (word "
              << result.api.word_accuracy * 100.0 << "), utterance seq "
              << result.utterance.sequence_accuracy * 100.0 << " (word "
              << result.utterance.word_accuracy * 100.0 << "), n "
              << result.all.count << "\n";
  } else if (*gr) {
    GridCorpora corpora;
    corpora.name_a = gr_name_a;
    corpora.name_b = gr_name_b;
    corpora.train_a = load_corpus(gr_a_train, Split::train);
    corpora.dev_a = load_corpus(gr_a_dev, Split::dev);
    corpora.test_a = load_corpus(gr_a_test, Split::test);
    corpora.train_b = load_corpus(gr_b_train, Split::train);
    corpora.dev_b = load_corpus(gr_b_dev, Split::dev);
    corpora.test_b = load_corpus(gr_b_test, Split::test);
    std::vector<uint64_t> seeds;
    std::stringstream ss(gr_seeds);
    std::string piece;
    while (std::getline(ss, piece, ','))
      if (!piece.empty()) seeds.push_back(std::stoull(piece));
    if (!gr_cache.empty()) fs::create_directories(gr_cache);
    const GridReport report =
        run_grid(corpora, seeds, gr_attn, gr_noattn, gr_model.to_config(),
                 gr_opts.to_config(0), gr_cache, &std::cerr);
    if (!gr_json.empty()) {
      json cells = json::array();
      for (const auto& c : report.cells)
        cells.push_back({{"train", c.train_corpus},
                         {"test", c.test_corpus},
                         {"attention", c.attention},
                         {"all", category_json(c.all)},
                         {"api", category_json(c.api)},
                         {"utterance", category_json(c.utterance)}});
      json j = {{"seeds", report.seeds}, {"cells", cells}};
      write_file_atomic(gr_json, j.dump(2) + "\n");
    }
    std::cout << grid_report_text(report);
  } else if (*ps) {
    const StateDataset ds = states_for(ps_ckpt, ps_corpus, ps_ann, ps_states);
    int dialogues = 0;
    for (const auto& r : ds.records) dialogues = std::max(dialogues, r.dialogue + 1);
    const auto report = run_diagnostics(ds, dialogues, ps_seed);
    const std::string text = diagnostic_report_text(report);
    if (ps_out.empty())
      std::cout << text;
    else {
      write_file_atomic(ps_out, text);
      std::cout << "probe-structure: report written to " << ps_out << "\n";
    }
  } else if (*sl) {
    const StateDataset ds = states_for(sl_ckpt, sl_corpus, sl_ann, sl_states);
    const auto loaded = load_checkpoint(sl_ckpt);
    int dialogues = 0;
    for (const auto& r : ds.records) dialogues = std::max(dialogues, r.dialogue + 1);
    const auto report = probe_slots(ds, loaded.vocab, SlotCatalog::defaults(), dialogues,
                                    sl_seed, sl_delay);
    const std::string text = slot_probe_report_text(report);
    if (sl_out.empty())
      std::cout << text;
    else {
      write_file_atomic(sl_out, text);
      std::cout << "probe-slots: report written to " << sl_out << "\n";
    }
  } else if (*am) {
    const auto loaded = load_checkpoint(am_ckpt);
    const Corpus corpus = load_corpus(am_corpus);
    std::vector<AttentionDump> dumps;
    const auto matrix = attention_alignment(
        loaded.model, loaded.vocab, corpus.dialogues, SlotCatalog::defaults(),
        float(am_tau), am_dumps.empty() ? nullptr : &dumps);
    Heatmap hm{matrix.row_labels, matrix.col_labels, matrix.values, matrix.tau};
    write_file_atomic(am_out, heatmap_to_text(hm));
    if (!am_svg.empty()) write_file_atomic(am_svg, render_svg(hm));
    if (!am_ppm.empty()) write_file_atomic(am_ppm, render_ppm(hm));
    if (!am_dumps.empty()) {
      fs::create_directories(am_dumps);
      for (size_t i = 0; i < std::min(dumps.size(), am_dump_limit); ++i) {
        Heatmap dump_hm{dumps[i].output_tokens, dumps[i].input_tokens, dumps[i].weights,
                        0.0f};
        write_file_atomic(
            (fs::path(am_dumps) / ("dialogue_" + std::to_string(dumps[i].dialogue) + ".txt"))
                .string(),
            heatmap_to_text(dump_hm));
      }
    }
    std::cout << "attention-map: " << matrix.examples << " API decodes aggregated into "
              << am_out << "\n";
  } else if (*tg) {
    const auto loaded = load_checkpoint(tg_ckpt);
    const Corpus corpus = load_corpus(tg_corpus);
    Utterance prompt =
        tg_prompt.empty() ? default_trigger_prompt() : split_tokens(tg_prompt);
    const auto report = trigger_api_calls(loaded.model, loaded.vocab, corpus.dialogues,
                                          SlotCatalog::defaults(), prompt);
    std::cout << "trigger: success rate " << report.success_rate * 100.0
              << "% (" << report.triggered << "/" << report.prompts
              << "), partial-slot accuracy " << report.partial_accuracy * 100.0 << "% ("
              << report.correct_slots << "/" << report.fillable_slots << ")\n";
  } else if (*tx) {
    const auto loaded = load_checkpoint(tx_ckpt);
    const Corpus corpus = load_corpus(tx_corpus);
    const auto examples = build_examples(corpus.dialogues, loaded.vocab);
    const auto result = evaluate(loaded.model, examples, loaded.vocab);
    const auto report = error_taxonomy(result, examples, corpus.dialogues, loaded.vocab);
    const std::string text = taxonomy_report_text(report);
    if (tx_out.empty())
      std::cout << text;
    else {
      write_file_atomic(tx_out, text);
      std::cout << "taxonomy: report written to " << tx_out << "\n";
    }
  } else if (*gc) {
    ModelConfig mc;
    mc.embedding_dim = gc_embedding;
    mc.hidden_dim = gc_hidden;
    mc.vocab_size = gc_vocab;
    mc.attention = gc_attention;
    mc.dropout_rate = 0.0f;
    Seq2Seq<double> model(mc);
    model.init_params(gc_seed);
    Rng rng(mix_seed(gc_seed));
    SeqExample ex;
    for (int i = 0; i < 9; ++i) ex.history.push_back(rng.uniform_int(0, gc_vocab - 1));
    for (int i = 0; i < 4; ++i) ex.target.push_back(rng.uniform_int(3, gc_vocab - 1));
    ex.target.push_back(Vocabulary::kEos);
    const auto report = grad_check(
        [&](ParameterStore<double>&) { return model.forward_loss(ex, true, nullptr); },
        model.params(), gc_coords);
    std::cout << "gradcheck: max relative error " << report.max_rel_error << " over "
              << report.checked << " coordinates (worst: " << report.worst_parameter
              << ")\n";
    if (report.max_rel_error > gc_tol)
      throw NumericError("gradient check failed tolerance");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
