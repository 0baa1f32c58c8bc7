#include "unmt/pipeline/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "unmt/corpus/vocab.hpp"
#include "unmt/error.hpp"
#include "unmt/pipeline/analysis.hpp"
#include "unmt/pipeline/config_file.hpp"

namespace unmt {

namespace {

struct SystemName {
  SystemKind kind;
  const char* name;
};

constexpr SystemName kSystemNames[] = {
    {SystemKind::vanilla, "vanilla"},
    {SystemKind::multilingual, "multi"},
    {SystemKind::closest_universal, "closest_uni"},
    {SystemKind::ulr_fixed_transform, "ulr_fixed_a"},
    {SystemKind::ulr, "ulr"},
    {SystemKind::ulr_mole, "ulr_mole"},
};

bool is_ulr(SystemKind k) {
  return k == SystemKind::ulr || k == SystemKind::ulr_fixed_transform || k == SystemKind::ulr_mole;
}

bool low_resource_only(SystemKind k) { return k == SystemKind::vanilla || k == SystemKind::closest_universal; }

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ParallelCorpus head(const ParallelCorpus& c, std::size_t n) {
  ParallelCorpus out{c.language, {}, c.synthetic};
  out.pairs.assign(c.pairs.begin(), c.pairs.begin() + static_cast<std::ptrdiff_t>(std::min(n, c.pairs.size())));
  return out;
}

std::vector<Sentence> sources(const ParallelCorpus& c) {
  std::vector<Sentence> out;
  for (const auto& p : c.pairs) out.push_back(p.source);
  return out;
}

TrainingConfig run_training(const ExperimentConfig& config, const PreparedTask& task, std::uint64_t seed) {
  TrainingConfig tc = config.training;
  tc.seed = seed;
  tc.low_resource.insert(task.low_resource);
  return tc;
}

TranslationModel train_reverse(const PreparedTask& task, const ExperimentConfig& config,
                               const std::vector<SentencePair>& pairs, std::uint64_t seed) {
  ParallelCorpus reversed{task.target, {}, false};
  for (const auto& p : pairs) reversed.pairs.push_back({p.target, p.source});
  ModelConfig mc = config.model;
  mc.use_mole = false;
  mc.seed = seed;
  std::vector<Sentence> targets;
  for (const auto& p : reversed.pairs) targets.push_back(p.target);
  std::vector<LanguageCorpus> lc{{task.target, sources(reversed)}};
  auto model = TranslationModel::make_lookup(mc, build_multilingual_vocab(lc), build_vocab(targets, 1, task.low_resource),
                                             {task.target});
  TrainingConfig tc = config.training;
  tc.seed = seed;
  tc.max_steps = config.backtranslation.reverse_steps;
  tc.low_resource.clear();
  train(model, {reversed}, tc);
  return model;
}

std::vector<Sentence> slice(const std::vector<Sentence>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

}  // namespace

std::string SystemSpec::name() const {
  std::string base;
  for (const auto& s : kSystemNames)
    if (s.kind == kind) base = s.name;
  return backtranslation ? base + "+bt" : base;
}

SystemSpec SystemSpec::parse(const std::string& name) {
  SystemSpec spec;
  std::string base = name;
  if (base.size() > 3 && base.compare(base.size() - 3, 3, "+bt") == 0) {
    spec.backtranslation = true;
    base.resize(base.size() - 3);
  }
  for (const auto& s : kSystemNames) {
    if (base == s.name) {
      spec.kind = s.kind;
      return spec;
    }
  }
  throw ConfigError("unknown system '" + name + "'");
}

std::vector<SystemSpec> ablation_grid() {
  std::vector<SystemSpec> grid;
  for (auto kind : {SystemKind::vanilla, SystemKind::multilingual, SystemKind::closest_universal,
                    SystemKind::ulr_fixed_transform, SystemKind::ulr}) {
    grid.push_back({kind, false});
    grid.push_back({kind, true});
  }
  grid.push_back({SystemKind::ulr_mole, false});
  grid.push_back({SystemKind::ulr_mole, true});
  return grid;
}

ExperimentConfig::ExperimentConfig() {
  embeddings.dim = 40;
  embeddings.window = 3;
  embeddings.epochs = 5;
  model.embed_dim = 32;
  model.hidden_dim = 32;
  model.attention_dim = 32;
  model.dropout = 0.1;
  model.init_range = 0.2;
  model.ulr.top_frequent_k = 20;
  model.gate_loss_weight = 0.3;
  training.max_steps = 3000;
  training.learning_rate = 3e-3;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("experiment.name must not be empty");
  if (seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
  if (universal_tokens == 0) throw ConfigError("experiment.universal_tokens must be positive");
  if (decode.beam == 0 || decode.max_length == 0) throw ConfigError("decode.beam and decode.max_length must be positive");
  if (backtranslation.rounds == 0) throw ConfigError("bt.rounds must be positive");
  task.validate();
  model.validate();
  training.validate();
  if (!data_dir.empty()) {
    auto need = [&](const std::string& file) {
      if (!std::filesystem::exists(data_dir / file))
        throw ConfigError("experiment.data_dir: missing " + (data_dir / file).string());
    };
    auto langs = task.auxiliary;
    langs.push_back(task.low_resource);
    for (const auto& l : langs) {
      for (const char* part : {".train.tsv", ".dev.tsv", ".test.tsv", ".mono.txt"}) need(l + part);
    }
    need(task.target + ".mono.txt");
  }
}

KeyValues to_key_values(const ExperimentConfig& c) {
  std::string seeds;
  for (auto s : c.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  KeyValues kv{
      {"experiment.name", c.name},
      {"experiment.data_dir", c.data_dir.empty() ? "none" : c.data_dir.string()},
      {"experiment.min_dice", format_config_real(c.min_dice)},
      {"experiment.seed_min_count", std::to_string(c.seed_min_count)},
      {"experiment.max_seeds", std::to_string(c.max_seeds)},
      {"experiment.universal_tokens", std::to_string(c.universal_tokens)},
      {"experiment.low_resource_pairs", std::to_string(c.low_resource_pairs)},
      {"experiment.finetune_epochs", std::to_string(c.finetune_epochs)},
      {"experiment.seeds", seeds},
      {"experiment.output_dir", c.output_dir.string()},
      {"bt.sentences", std::to_string(c.backtranslation.sentences)},
      {"bt.rounds", std::to_string(c.backtranslation.rounds)},
      {"bt.reverse_steps", std::to_string(c.backtranslation.reverse_steps)},
      {"decode.beam", std::to_string(c.decode.beam)},
      {"decode.max_length", std::to_string(c.decode.max_length)},
      {"embed.dim", std::to_string(c.embeddings.dim)},
      {"embed.window", std::to_string(c.embeddings.window)},
      {"embed.negatives", std::to_string(c.embeddings.negatives)},
      {"embed.epochs", std::to_string(c.embeddings.epochs)},
      {"embed.min_count", std::to_string(c.embeddings.min_count)},
      {"embed.learning_rate", format_config_real(c.embeddings.learning_rate)},
  };
  kv.merge(to_key_values(c.task));
  kv.merge(to_key_values(c.model));
  kv.merge(to_key_values(c.training));
  return kv;
}

ExperimentConfig experiment_config(const KeyValues& kv) {
  ExperimentConfig c;
  std::set<std::string> used;
  auto take = [&](const std::string& key, auto&& set) {
    if (auto it = kv.find(key); it != kv.end()) {
      set(key, it->second);
      used.insert(key);
    }
  };
  auto size = [](std::size_t& f) { return [&f](const std::string& k, const std::string& v) { f = parse_config_uint(k, v); }; };
  take("experiment.name", [&](auto&, const std::string& v) { c.name = v; });
  take("experiment.data_dir", [&](auto&, const std::string& v) { c.data_dir = v == "none" ? "" : v; });
  take("experiment.min_dice", [&](const std::string& k, const std::string& v) { c.min_dice = parse_config_real(k, v); });
  take("experiment.seed_min_count",
       [&](const std::string& k, const std::string& v) { c.seed_min_count = static_cast<long>(parse_config_uint(k, v)); });
  take("experiment.max_seeds", size(c.max_seeds));
  take("experiment.universal_tokens", size(c.universal_tokens));
  take("experiment.low_resource_pairs", size(c.low_resource_pairs));
  take("experiment.finetune_epochs", size(c.finetune_epochs));
  take("experiment.seeds", [&](const std::string& k, const std::string& v) {
    c.seeds.clear();
    for (const auto& s : split_list(v)) c.seeds.push_back(parse_config_uint(k, s));
  });
  take("experiment.output_dir", [&](auto&, const std::string& v) { c.output_dir = v; });
  take("bt.sentences", size(c.backtranslation.sentences));
  take("bt.rounds", size(c.backtranslation.rounds));
  take("bt.reverse_steps", size(c.backtranslation.reverse_steps));
  take("decode.beam", size(c.decode.beam));
  take("decode.max_length", size(c.decode.max_length));
  take("embed.dim", size(c.embeddings.dim));
  take("embed.window", size(c.embeddings.window));
  take("embed.negatives", size(c.embeddings.negatives));
  take("embed.epochs", size(c.embeddings.epochs));
  take("embed.min_count", size(c.embeddings.min_count));
  take("embed.learning_rate",
       [&](const std::string& k, const std::string& v) { c.embeddings.learning_rate = parse_config_real(k, v); });
  used.merge(apply_key_values(c.task, kv));
  used.merge(apply_key_values(c.model, kv));
  used.merge(apply_key_values(c.training, kv));
  reject_unknown_keys(kv, used);
  return c;
}

std::vector<std::string> PreparedTask::source_languages() const {
  auto out = auxiliary;
  out.push_back(low_resource);
  return out;
}

std::optional<double> PreparedTask::induction_accuracy(const std::string& language) const {
  auto lex = lexicon.find(language);
  auto qs = queries.find(language);
  if (lex == lexicon.end() || qs == queries.end()) return std::nullopt;
  std::size_t total = 0, hits = 0;
  for (const auto& [english, word] : lex->second) {
    auto q = qs->second.query(word);
    if (!q || !keys.contains(english)) continue;
    ++total;
    hits += nearest_neighbors(keys, *q, 1).front().token == english;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(total);
}

ParallelCorpus PreparedTask::closest_universal(const ParallelCorpus& corpus) const {
  const QuerySpace& qs = queries.at(corpus.language);
  std::map<std::string, std::string> cache;
  ParallelCorpus out = corpus;
  for (auto& p : out.pairs) {
    for (auto& tok : p.source) {
      auto [it, fresh] = cache.emplace(tok, tok);
      if (fresh) {
        if (auto q = qs.query(tok)) it->second = nearest_neighbors(keys, *q, 1).front().token;
      }
      tok = it->second;
    }
  }
  return out;
}

PreparedTask prepare_task(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  PreparedTask t;
  t.seed = seed;
  t.target = config.task.target;
  t.low_resource = config.task.low_resource;
  t.auxiliary = config.task.auxiliary;
  if (config.data_dir.empty()) {
    CipherTask ct = make_cipher_task(config.task, seed);
    t.train = std::move(ct.train);
    t.dev = std::move(ct.dev);
    t.test = std::move(ct.test);
    t.monolingual = std::move(ct.monolingual);
    t.lexicon = std::move(ct.lexicon);
  } else {
    for (const auto& l : t.source_languages()) {
      t.train[l] = load_parallel_tsv(l, config.data_dir / (l + ".train.tsv"));
      t.dev[l] = load_parallel_tsv(l, config.data_dir / (l + ".dev.tsv"));
      t.test[l] = load_parallel_tsv(l, config.data_dir / (l + ".test.tsv"));
      t.monolingual[l] = read_tokenized(config.data_dir / (l + ".mono.txt"));
    }
    t.monolingual[t.target] = read_tokenized(config.data_dir / (t.target + ".mono.txt"));
  }

  SkipGramConfig sg = config.embeddings;
  sg.seed = seed;
  const EmbeddingTable english = normalize_rows(train_skipgram(t.monolingual.at(t.target), sg, t.target));
  const std::size_t m = std::min(config.universal_tokens, english.size());
  std::vector<std::string> tokens(english.tokens().begin(), english.tokens().begin() + static_cast<std::ptrdiff_t>(m));
  std::vector<double> values(english.values().begin(),
                             english.values().begin() + static_cast<std::ptrdiff_t>(m * english.dim()));
  t.keys = normalize_rows(EmbeddingTable(t.target, std::move(tokens), english.dim(), std::move(values)));

  const auto langs = t.source_languages();
  for (std::size_t i = 0; i < langs.size(); ++i) {
    const auto& lang = langs[i];
    sg.seed = seed * 1000003ull + i + 1;
    const EmbeddingTable q = normalize_rows(train_skipgram(t.monolingual.at(lang), sg, lang));
    const auto& pairs = t.train.at(lang).pairs;
    const auto aligned = cooccurrence_alignments(pairs, config.min_dice);
    const auto seeds =
        filter_seeds(extract_seeds(aligned, config.seed_min_count, config.max_seeds, lang), q, t.keys);
    OrthogonalMap map = solve_procrustes(q, t.keys, seeds);
    for (const auto& w : map.warnings) t.warnings.push_back(lang + ": " + w);
    t.seed_counts[lang] = seeds.entries.size();
    t.queries[lang] = QuerySpace(lang, project(q, map), count_tokens(t.monolingual.at(lang)));
    t.maps[lang] = std::move(map);
  }
  return t;
}

ParallelCorpus SystemRun::input(const PreparedTask& task, const ParallelCorpus& corpus) const {
  return spec.kind == SystemKind::closest_universal ? task.closest_universal(corpus) : corpus;
}

TranslationModel build_model(const SystemSpec& spec, const PreparedTask& task, const ExperimentConfig& config,
                             const std::vector<ParallelCorpus>& vocab_corpora, std::uint64_t seed) {
  ModelConfig mc = config.model;
  mc.seed = seed;
  std::vector<Sentence> targets;
  for (const auto& c : vocab_corpora)
    for (const auto& p : c.pairs) targets.push_back(p.target);
  Vocabulary target_vocab = build_vocab(targets, 1, task.target);

  if (!is_ulr(spec.kind)) {
    mc.use_mole = false;
    std::vector<LanguageCorpus> lc;
    std::vector<std::string> langs;
    for (const auto& c : vocab_corpora) {
      lc.push_back({c.language, sources(c)});
      if (std::find(langs.begin(), langs.end(), c.language) == langs.end()) langs.push_back(c.language);
    }
    if (std::find(langs.begin(), langs.end(), task.low_resource) == langs.end()) langs.push_back(task.low_resource);
    return TranslationModel::make_lookup(mc, build_multilingual_vocab(lc), std::move(target_vocab), langs);
  }

  mc.train_transform = spec.kind != SystemKind::ulr_fixed_transform;
  mc.use_mole = spec.kind == SystemKind::ulr_mole;
  std::vector<UlrLanguage> langs;
  for (const auto& lang : task.source_languages()) {
    std::vector<Sentence> text = task.monolingual.at(lang);
    for (const auto& c : vocab_corpora) {
      if (c.language != lang) continue;
      for (const auto& p : c.pairs) text.push_back(p.source);
    }
    langs.push_back({lang, build_vocab(text, 1, lang), task.queries.at(lang)});
  }
  return TranslationModel::make_ulr(mc, task.keys, std::move(langs), std::move(target_vocab),
                                    mc.use_mole ? task.auxiliary : std::vector<std::string>{});
}

std::vector<ParallelCorpus> training_corpora(const SystemSpec& spec, const PreparedTask& task, std::size_t n) {
  std::vector<ParallelCorpus> out;
  if (!low_resource_only(spec.kind))
    for (const auto& l : task.auxiliary) out.push_back(task.train.at(l));
  if (n > 0) out.push_back(head(task.train.at(task.low_resource), n));
  return out;
}

SystemRun run_system(const SystemSpec& spec, const PreparedTask& task, const ExperimentConfig& config,
                     std::size_t n, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  const auto& pool = task.train.at(task.low_resource);
  if (n > pool.size())
    throw InputError("low-resource size " + std::to_string(n) + " exceeds the " + std::to_string(pool.size()) +
                     " available pairs");
  SystemRun run;
  run.spec = spec;
  run.result.system = spec.name();
  run.result.seed = task.seed;
  run.result.low_resource_pairs = n;
  const TrainingConfig tc = run_training(config, task, task.seed);
  std::vector<ParallelCorpus> base = training_corpora(spec, task, n);

  if (base.empty()) {
    run.result.defined = false;
    return run;
  }
  if (spec.backtranslation && n == 0)
    throw StateError("back-translation needs low-resource pairs to train the reverse model");

  const auto real_pairs = head(pool, n).pairs;
  std::vector<SentencePair> reverse_extra;  // (target, source) pairs produced by the forward model
  const std::size_t rounds = spec.backtranslation ? config.backtranslation.rounds : 1;
  for (std::size_t r = 0; r < rounds; ++r) {
    auto corpora = base;
    if (spec.backtranslation) {
      auto pairs = real_pairs;
      pairs.insert(pairs.end(), reverse_extra.begin(), reverse_extra.end());
      const auto reverse = train_reverse(task, config, pairs, task.seed + 7919 * (r + 1));
      corpora.push_back(backtranslate(reverse, task.monolingual.at(task.target), task.target, task.low_resource,
                                      config.backtranslation.sentences));
    }
    if (spec.kind == SystemKind::closest_universal)
      for (auto& c : corpora) c = task.closest_universal(c);
    run.model = build_model(spec, task, config, corpora, task.seed);
    if (log && r + 1 == rounds) {
      const ParallelCorpus dev = run.input(task, task.dev.at(task.low_resource));
      train(*run.model, corpora, tc,
            [&](const TranslationModel& m) -> std::optional<double> { return corpus_bleu(m, dev, config.decode); },
            log);
    } else {
      train(*run.model, corpora, tc);
    }
    run.training = std::move(corpora);
    if (r + 1 < rounds) {
      // The next reverse model also learns from forward translations of
      // low-resource monolingual text.
      const auto mono = slice(task.monolingual.at(task.low_resource), config.backtranslation.sentences);
      reverse_extra.clear();
      ParallelCorpus probe{task.low_resource, {}, false};
      for (const auto& s : mono) probe.pairs.push_back({s, {}});
      probe = run.input(task, probe);
      for (std::size_t i = 0; i < mono.size(); ++i)
        reverse_extra.push_back(
            {mono[i], run.model->translate(probe.pairs[i].source, task.low_resource, config.decode).tokens});
    }
  }
  run.result.dev_bleu = corpus_bleu(*run.model, run.input(task, task.dev.at(task.low_resource)), config.decode);
  run.result.test_bleu = corpus_bleu(*run.model, run.input(task, task.test.at(task.low_resource)), config.decode);
  run.result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

std::string ResultTable::csv(const KeyValues& config) const {
  std::string out;
  for (const auto& [k, v] : config) out += "# " + k + " = " + v + "\n";
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += "\n";
  };
  line(columns);
  for (const auto& r : rows) line(r);
  return out;
}

std::string ResultTable::json(const KeyValues& config) const {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json(config);
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    for (std::size_t i = 0; i < columns.size() && i < r.size(); ++i) {
      try {
        std::size_t used = 0;
        const double d = std::stod(r[i], &used);
        if (used == r[i].size()) {
          row[columns[i]] = d;
          continue;
        }
      } catch (const std::exception&) {
      }
      row[columns[i]] = r[i];
    }
    j["rows"].push_back(row);
  }
  return j.dump(2) + "\n";
}

AblationReport run_ablation(const ExperimentConfig& config, const std::vector<SystemSpec>& systems,
                            const ProgressFn& progress) {
  config.validate();
  AblationReport report;
  for (auto seed : config.seeds) {
    std::optional<PreparedTask> task;
    std::string prep_error;
    try {
      task = prepare_task(config, seed);
    } catch (const std::exception& e) {
      prep_error = std::string("data preparation: ") + e.what();
    }
    for (const auto& spec : systems) {
      RunResult r;
      r.system = spec.name();
      r.seed = seed;
      r.low_resource_pairs = config.low_resource_pairs;
      if (!task) {
        r.ok = false;
        r.error = prep_error;
      } else {
        try {
          r = run_system(spec, *task, config, config.low_resource_pairs).result;
        } catch (const std::exception& e) {
          r.ok = false;
          r.error = e.what();
        }
      }
      report.runs.push_back(r);
      if (progress) progress(r);
    }
  }

  struct Row {
    std::string system;
    double dev = 0.0, test = 0.0;
    std::vector<std::string> per_seed;
    std::string status = "ok";
  };
  std::vector<Row> rows;
  for (const auto& spec : systems) {
    Row row;
    row.system = spec.name();
    std::size_t n = 0;
    for (const auto& r : report.runs) {
      if (r.system != row.system) continue;
      if (!r.ok) {
        row.status = "FAILED: " + r.error;
        row.per_seed.push_back("FAILED");
        continue;
      }
      row.dev += r.dev_bleu;
      row.test += r.test_bleu;
      row.per_seed.push_back(fixed(r.dev_bleu));
      ++n;
    }
    if (n > 0) {
      row.dev /= static_cast<double>(n);
      row.test /= static_cast<double>(n);
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    const bool fa = a.status != "ok", fb = b.status != "ok";
    if (fa != fb) return fb;
    return a.dev > b.dev;
  });
  report.table.columns = {"rank", "system", "mean_dev_bleu", "mean_test_bleu"};
  for (auto s : config.seeds) report.table.columns.push_back("dev_bleu_seed_" + std::to_string(s));
  report.table.columns.push_back("status");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> cells{std::to_string(i + 1), rows[i].system, fixed(rows[i].dev), fixed(rows[i].test)};
    cells.insert(cells.end(), rows[i].per_seed.begin(), rows[i].per_seed.end());
    std::string status = rows[i].status;
    std::replace(status.begin(), status.end(), ',', ';');
    cells.push_back(status);
    report.table.rows.push_back(std::move(cells));
  }
  return report;
}

SweepReport corpus_size_sweep(const ExperimentConfig& config, const std::vector<std::size_t>& sizes,
                              const std::vector<SystemSpec>& systems, const ProgressFn& progress) {
  config.validate();
  if (config.data_dir.empty()) {
    for (auto s : sizes)
      if (s > config.task.low_resource_pairs)
        throw InputError("sweep size " + std::to_string(s) + " exceeds the " +
                         std::to_string(config.task.low_resource_pairs) + " available low-resource pairs");
  }
  SweepReport report;
  report.table.columns = {"size", "system", "seed", "dev_bleu", "test_bleu", "defined"};
  for (auto seed : config.seeds) {
    const PreparedTask task = prepare_task(config, seed);
    for (auto size : sizes) {
      for (const auto& spec : systems) {
        const RunResult r = run_system(spec, task, config, size).result;
        report.runs.push_back(r);
        report.table.rows.push_back({std::to_string(size), r.system, std::to_string(seed), fixed(r.dev_bleu),
                                     fixed(r.test_bleu), r.defined ? "true" : "false"});
        if (progress) progress(r);
      }
    }
  }
  return report;
}

TranslationModel pretrain_zero_shot(const SystemSpec& spec, const PreparedTask& task, const ExperimentConfig& config) {
  if (low_resource_only(spec.kind) || spec.backtranslation)
    throw ConfigError("system '" + spec.name() + "' cannot be trained without low-resource pairs");
  auto corpora = training_corpora(spec, task, 0);
  auto vocab = corpora;
  vocab.push_back(head(task.train.at(task.low_resource), config.low_resource_pairs));
  auto model = build_model(spec, task, config, vocab, task.seed);
  train(model, corpora, run_training(config, task, task.seed));
  return model;
}

FineTuneReport fine_tune_low_resource(TranslationModel& model, const PreparedTask& task,
                                      const ExperimentConfig& config) {
  return fine_tune(model, head(task.train.at(task.low_resource), config.low_resource_pairs), config.finetune_epochs,
                   run_training(config, task, task.seed), task.dev.at(task.low_resource));
}

FineTuneComparison zero_shot_fine_tune(const ExperimentConfig& config, const PreparedTask& task,
                                       const SystemSpec& ulr_system) {
  FineTuneComparison out;
  out.seed = task.seed;
  auto ulr = pretrain_zero_shot(ulr_system, task, config);
  out.ulr = fine_tune_low_resource(ulr, task, config);
  auto baseline = pretrain_zero_shot({SystemKind::multilingual, false}, task, config);
  out.baseline = fine_tune_low_resource(baseline, task, config);
  return out;
}

std::filesystem::path write_artifact(const std::filesystem::path& dir, const std::string& file, const std::string& text) {
  std::filesystem::create_directories(dir);
  const auto path = dir / file;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  return path;
}

}  // namespace unmt
