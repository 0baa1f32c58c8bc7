#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unmt/corpus/bpe.hpp"
#include "unmt/corpus/parallel.hpp"
#include "unmt/corpus/text.hpp"
#include "unmt/embeddings/embedding_table.hpp"
#include "unmt/error.hpp"
#include "unmt/nmt/checkpoint.hpp"
#include "unmt/nmt/train.hpp"
#include "unmt/pipeline/analysis.hpp"
#include "unmt/pipeline/bleu.hpp"
#include "unmt/pipeline/config_file.hpp"
#include "unmt/pipeline/experiment.hpp"
#include "unmt/projection/projection.hpp"

using namespace unmt;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;  // key=value

  KeyValues key_values() const {
    KeyValues kv = config.empty() ? KeyValues{} : load_config_file(config);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      kv[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
    }
    return kv;
  }

  ExperimentConfig experiment() const {
    ExperimentConfig c = experiment_config(key_values());
    if (seed) c.seeds = {*seed};
    if (!out.empty()) c.output_dir = out;
    c.validate();
    return c;
  }

  fs::path out_dir() const { return out.empty() ? experiment().output_dir : fs::path(out); }
  fs::path out_path(const std::string& explicit_path, const std::string& file) const {
    return explicit_path.empty() ? out_dir() / file : fs::path(explicit_path);
  }
};

std::vector<Sentence> read_sentences(const std::string& path) {
  if (!path.empty() && path != "-") return read_tokenized(path);
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(std::cin, line)) out.push_back(split_whitespace(line));
  return out;
}

void write_sentences(const std::string& path, const std::vector<Sentence>& sentences) {
  std::vector<std::string> lines;
  for (const auto& s : sentences) lines.push_back(join(s));
  if (path.empty() || path == "-") {
    for (const auto& l : lines) std::cout << l << '\n';
  } else {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    write_lines(path, lines);
  }
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

DecodeOptions decode_options(const Globals& g, std::size_t beam, std::size_t max_length) {
  DecodeOptions d = g.experiment().decode;
  if (beam) d.beam = beam;
  if (max_length) d.max_length = max_length;
  return d;
}

std::vector<SystemSpec> parse_systems(const std::vector<std::string>& names) {
  std::vector<SystemSpec> out;
  for (const auto& n : names) out.push_back(SystemSpec::parse(n));
  return out;
}

void print_progress(const RunResult& r) {
  if (r.ok)
    std::fprintf(stderr, "%-14s seed %llu n=%zu dev %.2f test %.2f (%.0f s)%s\n", r.system.c_str(),
                 static_cast<unsigned long long>(r.seed), r.low_resource_pairs, r.dev_bleu, r.test_bleu, r.seconds,
                 r.defined ? "" : " undefined");
  else
    std::fprintf(stderr, "%-14s seed %llu FAILED: %s\n", r.system.c_str(), static_cast<unsigned long long>(r.seed),
                 r.error.c_str());
}

void write_table(const ExperimentConfig& cfg, const ResultTable& table, const std::string& stem) {
  const KeyValues kv = to_key_values(cfg);
  const auto csv = write_artifact(cfg.output_dir, stem + ".csv", table.csv(kv));
  const auto json = write_artifact(cfg.output_dir, stem + ".json", table.json(kv));
  std::cout << csv.string() << '\n' << json.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Universal-lexical multilingual NMT toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "run a single seed instead of experiment.seeds");
  app.add_option("--out", g.out, "output directory (experiment.output_dir)");
  app.add_option("--set", g.overrides, "override a config key, key=value (repeatable)");

  // learn-bpe
  std::vector<std::string> bpe_inputs;
  int bpe_ops = 0;
  long bpe_min_freq = 2;
  std::string bpe_output;
  auto* learn = app.add_subcommand("learn-bpe", "learn BPE merges from tokenized text");
  learn->add_option("--input", bpe_inputs, "tokenized text files")->required()->check(CLI::ExistingFile);
  learn->add_option("--ops", bpe_ops, "number of merges")->required();
  learn->add_option("--min-frequency", bpe_min_freq, "stop when the best pair is rarer");
  learn->add_option("--output", bpe_output, "codes file (default <out>/bpe.codes)");
  learn->callback([&] {
    std::vector<Sentence> text;
    for (const auto& f : bpe_inputs) {
      auto s = read_tokenized(f);
      text.insert(text.end(), s.begin(), s.end());
    }
    const auto model = learn_bpe(text, bpe_ops, bpe_min_freq);
    const auto path = g.out_path(bpe_output, "bpe.codes");
    ensure_parent(path);
    save_bpe(model, path);
    std::cout << model.merges.size() << " merges -> " << path.string() << '\n';
  });

  // apply-bpe
  std::string codes, apply_input, apply_output;
  bool apply_reverse = false;
  auto* apply = app.add_subcommand("apply-bpe", "segment tokenized text with learned merges");
  apply->add_option("--codes", codes, "codes file")->required()->check(CLI::ExistingFile);
  apply->add_option("--input", apply_input, "tokenized text (default stdin)");
  apply->add_option("--output", apply_output, "segmented text (default stdout)");
  apply->add_flag("--reverse", apply_reverse, "undo segmentation instead");
  apply->callback([&] {
    BpeApplier bpe(load_bpe(codes));
    std::vector<Sentence> out;
    for (const auto& s : read_sentences(apply_input)) out.push_back(apply_reverse ? detokenize_bpe(s) : bpe.apply(s));
    write_sentences(apply_output, out);
  });

  // train-embeddings
  std::string emb_input, emb_language, emb_output;
  auto* temb = app.add_subcommand("train-embeddings", "skip-gram embeddings from monolingual text (embed.* keys)");
  temb->add_option("--input", emb_input, "tokenized monolingual text")->required()->check(CLI::ExistingFile);
  temb->add_option("--language", emb_language, "language code")->required();
  temb->add_option("--output", emb_output, "vectors file (default <out>/<language>.vec)");
  temb->callback([&] {
    const auto cfg = g.experiment();
    SkipGramConfig sg = cfg.embeddings;
    sg.seed = cfg.seeds.front();
    const auto table = train_skipgram(read_tokenized(emb_input), sg, emb_language);
    const auto path = g.out_path(emb_output, emb_language + ".vec");
    ensure_parent(path);
    save_vectors(table, path);
    std::cout << table.size() << " x " << table.dim() << " -> " << path.string() << '\n';
  });

  // load-embeddings
  std::string load_path;
  std::optional<std::size_t> load_dim;
  std::vector<std::string> probe_tokens;
  std::size_t probe_k = 5;
  auto* lemb = app.add_subcommand("load-embeddings", "check a vectors file and show nearest neighbors");
  lemb->add_option("--vectors", load_path, "word2vec text format")->required()->check(CLI::ExistingFile);
  lemb->add_option("--dim", load_dim, "expected dimension");
  lemb->add_option("--neighbors", probe_tokens, "tokens to look up");
  lemb->add_option("-k", probe_k, "neighbors per token");
  lemb->callback([&] {
    const auto table = normalize_rows(load_vectors(load_path, load_dim));
    std::cout << table.size() << " tokens, dim " << table.dim() << ", " << table.zero_rows().size()
              << " zero rows\n";
    for (const auto& t : probe_tokens) {
      const auto i = table.index(t);
      if (!i) {
        std::cout << t << ": not in table\n";
        continue;
      }
      std::cout << t << ':';
      for (const auto& n : nearest_neighbors(table, table.row(*i), probe_k + 1))
        if (n.token != t) std::printf(" %s(%.3f)", n.token.c_str(), n.cosine);
      std::cout << '\n';
    }
  });

  // extract-seeds
  std::string seed_pairs, seed_language, seed_output;
  std::optional<double> seed_min_dice;
  std::optional<long> seed_min_count;
  std::optional<std::size_t> seed_max;
  auto* xseeds = app.add_subcommand("extract-seeds", "seed dictionary from word co-occurrence in parallel pairs");
  xseeds->add_option("--pairs", seed_pairs, "source<TAB>target file")->required()->check(CLI::ExistingFile);
  xseeds->add_option("--language", seed_language, "source language code")->required();
  xseeds->add_option("--min-dice", seed_min_dice, "alignment threshold (experiment.min_dice)");
  xseeds->add_option("--min-count", seed_min_count, "experiment.seed_min_count");
  xseeds->add_option("--max-seeds", seed_max, "experiment.max_seeds");
  xseeds->add_option("--output", seed_output, "seeds file (default <out>/<language>.seeds)");
  xseeds->callback([&] {
    const auto cfg = g.experiment();
    const auto corpus = load_parallel_tsv(seed_language, seed_pairs);
    const auto aligned = cooccurrence_alignments(corpus.pairs, seed_min_dice.value_or(cfg.min_dice));
    const auto seeds = extract_seeds(aligned, seed_min_count.value_or(cfg.seed_min_count),
                                     seed_max.value_or(cfg.max_seeds), seed_language);
    const auto path = g.out_path(seed_output, seed_language + ".seeds");
    ensure_parent(path);
    save_seeds(seeds, path);
    std::cout << seeds.entries.size() << " seeds -> " << path.string() << '\n';
  });

  // solve-projection
  std::string proj_queries, proj_keys, proj_seeds, proj_output, proj_projected;
  auto* sproj = app.add_subcommand("solve-projection", "orthogonal map from query space to key space");
  sproj->add_option("--queries", proj_queries, "source-language vectors")->required()->check(CLI::ExistingFile);
  sproj->add_option("--keys", proj_keys, "universal-token vectors")->required()->check(CLI::ExistingFile);
  sproj->add_option("--seeds", proj_seeds, "seed dictionary")->required()->check(CLI::ExistingFile);
  sproj->add_option("--output", proj_output, "map file (default <out>/<language>.map)");
  sproj->add_option("--projected", proj_projected, "also write the projected query vectors");
  sproj->callback([&] {
    const auto q = normalize_rows(load_vectors(proj_queries));
    const auto k = normalize_rows(load_vectors(proj_keys));
    const auto seeds = filter_seeds(load_seeds(proj_seeds), q, k);
    const auto map = solve_procrustes(q, k, seeds);
    for (const auto& w : map.warnings) std::cerr << "warning: " << w << '\n';
    const auto path = g.out_path(proj_output, (seeds.language.empty() ? fs::path(proj_queries).stem().string() : seeds.language) + ".map");
    ensure_parent(path);
    save_map(map, path);
    std::printf("%zu seeds, objective %.6g, orthogonality residual %.3g -> %s\n", seeds.entries.size(),
                procrustes_objective(q, k, seeds, map.matrix), orthogonality_residual(map.matrix),
                path.string().c_str());
    if (!proj_projected.empty()) {
      ensure_parent(proj_projected);
      save_vectors(project(q, map), proj_projected);
    }
  });

  // make-task
  auto* mtask = app.add_subcommand("make-task", "write the generated cipher task as a data directory");
  mtask->callback([&] {
    const auto cfg = g.experiment();
    const auto task = make_cipher_task(cfg.task, cfg.seeds.front());
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    for (const auto& [lang, c] : task.train) save_parallel_tsv(c, dir / (lang + ".train.tsv"));
    for (const auto& [lang, c] : task.dev) save_parallel_tsv(c, dir / (lang + ".dev.tsv"));
    for (const auto& [lang, c] : task.test) save_parallel_tsv(c, dir / (lang + ".test.tsv"));
    for (const auto& [lang, m] : task.monolingual) write_sentences((dir / (lang + ".mono.txt")).string(), m);
    std::cout << "task written to " << dir.string() << '\n';
  });

  // train
  std::string train_system = "ulr";
  std::optional<std::size_t> train_pairs;
  auto* trn = app.add_subcommand("train", "train one system per seed and save checkpoints");
  trn->add_option("--system", train_system, "vanilla, multi, closest_uni, ulr_fixed_a, ulr, ulr_mole (+bt)");
  trn->add_option("--pairs", train_pairs, "low-resource pairs (experiment.low_resource_pairs)");
  trn->callback([&] {
    const auto cfg = g.experiment();
    const auto spec = SystemSpec::parse(train_system);
    for (auto seed : cfg.seeds) {
      const auto task = prepare_task(cfg, seed);
      for (const auto& w : task.warnings) std::cerr << "warning: " << w << '\n';
      const std::string stem = spec.name() + ".seed" + std::to_string(seed);
      fs::create_directories(cfg.output_dir);
      std::ofstream log(cfg.output_dir / (stem + ".log.jsonl"));
      const auto run = run_system(spec, task, cfg, train_pairs.value_or(cfg.low_resource_pairs), &log);
      print_progress(run.result);
      if (!run.model) continue;
      save_checkpoint(*run.model, cfg.output_dir / (stem + ".ckpt"));
      // Evaluation sources in the model's input space.
      save_parallel_tsv(run.input(task, task.dev.at(task.low_resource)),
                        cfg.output_dir / (stem + "." + task.low_resource + ".dev.tsv"));
      save_parallel_tsv(run.input(task, task.test.at(task.low_resource)),
                        cfg.output_dir / (stem + "." + task.low_resource + ".test.tsv"));
      std::cout << (cfg.output_dir / (stem + ".ckpt")).string() << '\n';
    }
  });

  // translate
  std::string model_path, language, input_path, output_path;
  std::size_t beam = 0, max_length = 0;
  auto add_decode = [&](CLI::App* sub) {
    sub->add_option("--beam", beam, "beam width (decode.beam)");
    sub->add_option("--max-length", max_length, "decode.max_length");
  };
  auto* tr = app.add_subcommand("translate", "translate tokenized sentences");
  tr->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  tr->add_option("--language", language, "source language")->required();
  tr->add_option("--input", input_path, "tokenized text (default stdin)");
  tr->add_option("--output", output_path, "translations (default stdout)");
  add_decode(tr);
  tr->callback([&] {
    const auto model = load_checkpoint(model_path);
    const auto opts = decode_options(g, beam, max_length);
    write_sentences(output_path, translate_corpus(model, read_sentences(input_path), language, opts));
  });

  // backtranslate
  std::string bt_mono_language, bt_synthetic_language;
  std::optional<std::size_t> bt_limit;
  auto* bt = app.add_subcommand("backtranslate", "synthetic pairs from target-side monolingual text");
  bt->add_option("--model", model_path, "reverse-direction checkpoint")->required()->check(CLI::ExistingFile);
  bt->add_option("--input", input_path, "monolingual text (default stdin)");
  bt->add_option("--mono-language", bt_mono_language, "language of the monolingual text")->required();
  bt->add_option("--synthetic-language", bt_synthetic_language, "language of the synthetic sources")->required();
  bt->add_option("--limit", bt_limit, "sentences to translate (bt.sentences)");
  bt->add_option("--output", output_path, "TSV (default <out>/<synthetic-language>.bt.tsv)");
  bt->callback([&] {
    const auto cfg = g.experiment();
    const auto model = load_checkpoint(model_path);
    const auto synthetic = backtranslate(model, read_sentences(input_path), bt_mono_language, bt_synthetic_language,
                                         bt_limit.value_or(cfg.backtranslation.sentences), decode_options(g, 0, 0));
    const auto path = g.out_path(output_path, bt_synthetic_language + ".bt.tsv");
    ensure_parent(path);
    save_parallel_tsv(synthetic, path);
    std::cout << synthetic.size() << " synthetic pairs -> " << path.string() << '\n';
  });

  // evaluate
  std::string eval_pairs;
  std::vector<std::string> eval_training;
  std::string eval_hyp;
  auto* ev = app.add_subcommand("evaluate", "corpus BLEU, optionally per unknown-token bucket");
  ev->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--language", language, "source language")->required();
  ev->add_option("--pairs", eval_pairs, "source<TAB>reference file")->required()->check(CLI::ExistingFile);
  ev->add_option("--training", eval_training, "parallel training TSVs; adds the unknown-token report")
      ->check(CLI::ExistingFile);
  ev->add_option("--hypotheses", eval_hyp, "also write the translations here");
  add_decode(ev);
  ev->callback([&] {
    const auto model = load_checkpoint(model_path);
    const auto opts = decode_options(g, beam, max_length);
    const auto corpus = load_parallel_tsv(language, eval_pairs);
    std::vector<Sentence> src, refs;
    for (const auto& p : corpus.pairs) {
      src.push_back(p.source);
      refs.push_back(p.target);
    }
    const auto hyps = translate_corpus(model, src, language, opts);
    if (!eval_hyp.empty()) write_sentences(eval_hyp, hyps);
    const auto r = bleu(hyps, refs);
    std::printf("BLEU %.2f  p1..p4 %.4f %.4f %.4f %.4f  BP %.4f  hyp %zu ref %zu\n", r.bleu, r.precisions[0],
                r.precisions[1], r.precisions[2], r.precisions[3], r.brevity_penalty, r.hypothesis_length,
                r.reference_length);
    if (eval_training.empty()) return;
    std::vector<ParallelCorpus> training;
    for (const auto& f : eval_training) training.push_back(load_parallel_tsv(language, f));
    const auto report = unknown_token_report(model, corpus, source_vocabulary(training, language), opts);
    std::printf("%-12s %9s %7s\n", "oov_bucket", "sentences", "bleu");
    for (const auto& row : report.rows) std::printf("%-12s %9zu %7.2f\n", row.bucket.c_str(), row.sentences, row.bleu);
    for (const auto& s : report.skipped) std::printf("%-12s empty, skipped\n", s.c_str());
    try {
      std::printf("degradation %.2f\n", report.degradation());
    } catch (const StateError& e) {
      std::printf("degradation undefined: %s\n", e.what());
    }
  });

  // export-gates
  auto* eg = app.add_subcommand("export-gates", "per-token expert probabilities of a MoLE model as CSV");
  eg->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  eg->add_option("--language", language, "source language")->required();
  eg->add_option("--input", input_path, "tokenized text (default stdin)");
  eg->add_option("--output", output_path, "CSV (default <out>/gates.<language>.csv)");
  eg->callback([&] {
    const auto model = load_checkpoint(model_path);
    const auto acts = export_gate_activations(model, read_sentences(input_path), language);
    const auto path = g.out_path(output_path, "gates." + language + ".csv");
    ensure_parent(path);
    std::ofstream(path) << acts.csv();
    std::cout << acts.tokens.size() << " rows -> " << path.string() << '\n';
  });

  // sweep
  std::vector<std::size_t> sweep_sizes = {0, 25, 50, 100};
  std::vector<std::string> sweep_systems = {"vanilla", "multi", "ulr", "ulr_mole"};
  auto* sw = app.add_subcommand("sweep", "BLEU against low-resource corpus size");
  sw->add_option("--sizes", sweep_sizes, "low-resource pair counts")->delimiter(',');
  sw->add_option("--systems", sweep_systems, "systems to train")->delimiter(',');
  sw->callback([&] {
    const auto cfg = g.experiment();
    const auto report = corpus_size_sweep(cfg, sweep_sizes, parse_systems(sweep_systems), print_progress);
    write_table(cfg, report.table, "sweep");
  });

  // ablate
  std::vector<std::string> ablate_systems;
  auto* ab = app.add_subcommand("ablate", "train and rank the system grid");
  ab->add_option("--systems", ablate_systems, "subset of the grid (default: all)")->delimiter(',');
  ab->callback([&] {
    const auto cfg = g.experiment();
    const auto systems = ablate_systems.empty() ? ablation_grid() : parse_systems(ablate_systems);
    const auto report = run_ablation(cfg, systems, print_progress);
    write_table(cfg, report.table, "ablation");
    for (const auto& row : report.table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? "  " : "") << row[i];
      std::cout << '\n';
    }
  });

  // finetune
  std::string ft_system = "ulr";
  auto* ft = app.add_subcommand("finetune", "zero-shot pretraining, then fine-tuning on the low-resource pairs");
  ft->add_option("--system", ft_system, "system compared against the multilingual baseline");
  ft->callback([&] {
    const auto cfg = g.experiment();
    ResultTable table;
    table.columns = {"seed", "system", "epoch", "dev_nll", "dev_bleu"};
    for (auto seed : cfg.seeds) {
      const auto task = prepare_task(cfg, seed);
      const auto cmp = zero_shot_fine_tune(cfg, task, SystemSpec::parse(ft_system));
      auto add = [&](const std::string& name, const FineTuneReport& r) {
        for (const auto& e : r.epochs) {
          char nll[32], bleu_s[32];
          std::snprintf(nll, sizeof nll, "%.4f", e.dev_nll);
          std::snprintf(bleu_s, sizeof bleu_s, "%.2f", e.dev_bleu);
          table.rows.push_back({std::to_string(seed), name, std::to_string(e.epoch), nll, bleu_s});
          std::fprintf(stderr, "%-8s seed %llu epoch %zu dev %s\n", name.c_str(),
                       static_cast<unsigned long long>(seed), e.epoch, bleu_s);
        }
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      };
      add(ft_system, cmp.ulr);
      add("multi", cmp.baseline);
    }
    write_table(cfg, table, "finetune");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
