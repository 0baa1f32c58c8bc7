#include "unmt/nmt/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "unmt/error.hpp"

namespace unmt {

namespace {

constexpr const char* kMagic = "unmt-checkpoint";

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void write_values(std::ostream& out, std::span<const double> v, std::size_t width) {
  for (std::size_t i = 0; i < v.size(); ++i) out << hex(v[i]) << ((i + 1) % width == 0 ? '\n' : ' ');
}

void write_vocab(std::ostream& out, const std::string& name, const Vocabulary& v) {
  out << "vocab " << name << ' ' << v.size() << '\n';
  for (std::size_t i = kNumReserved; i < v.size(); ++i) {
    const auto& lang = v.language(i);
    out << v.token(i) << ' ' << (lang.empty() ? "-" : lang) << '\n';
  }
}

void write_table(std::ostream& out, const std::string& name, const EmbeddingTable& t) {
  out << "table " << name << ' ' << t.size() << ' ' << t.dim() << ' ' << (t.normalized() ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << t.tokens()[i];
    for (double v : t.row(i)) out << ' ' << hex(v);
    out << '\n';
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::vector<std::string> line() {
    std::string s;
    if (!std::getline(in_, s)) throw FormatError("checkpoint truncated after line " + std::to_string(n_));
    ++n_;
    return split_whitespace(s);
  }
  std::vector<std::string> expect(const std::string& head, std::size_t fields) {
    auto f = line();
    if (f.empty() || f[0] != head || f.size() != fields) {
      throw FormatError("checkpoint line " + std::to_string(n_) + ": expected '" + head + "' with " +
                        std::to_string(fields - 1) + " fields");
    }
    return f;
  }
  std::size_t number(const std::string& s) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw FormatError("checkpoint line " + std::to_string(n_) + ": bad number '" + s + "'");
    }
  }
  double real(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
      throw FormatError("checkpoint line " + std::to_string(n_) + ": bad value '" + s + "'");
    }
    return v;
  }
  std::vector<double> values(std::size_t rows, std::size_t width) {
    std::vector<double> v;
    v.reserve(rows * width);
    for (std::size_t r = 0; r < rows; ++r) {
      auto f = line();
      if (f.size() != width) throw FormatError("checkpoint line " + std::to_string(n_) + ": wrong row width");
      for (auto& x : f) v.push_back(real(x));
    }
    return v;
  }
  Vocabulary vocab(const std::string& name) {
    auto h = expect("vocab", 3);
    if (h[1] != name) throw FormatError("checkpoint: expected vocabulary '" + name + "', found '" + h[1] + "'");
    const std::size_t n = number(h[2]);
    Vocabulary v;
    for (std::size_t i = kNumReserved; i < n; ++i) {
      auto f = line();
      if (f.size() != 2) throw FormatError("checkpoint line " + std::to_string(n_) + ": bad vocabulary entry");
      v.add(f[0], f[1] == "-" ? "" : f[1]);
    }
    if (v.size() != n) throw FormatError("checkpoint: vocabulary '" + name + "' has duplicate entries");
    return v;
  }
  EmbeddingTable table(const std::string& name, const std::string& language) {
    auto h = expect("table", 5);
    if (h[1] != name) throw FormatError("checkpoint: expected table '" + name + "', found '" + h[1] + "'");
    const std::size_t n = number(h[2]), d = number(h[3]);
    std::vector<std::string> tokens;
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) {
      auto f = line();
      if (f.size() != d + 1) throw FormatError("checkpoint line " + std::to_string(n_) + ": wrong row width");
      tokens.push_back(f[0]);
      for (std::size_t k = 1; k <= d; ++k) values.push_back(real(f[k]));
    }
    if (h[4] == "1") return EmbeddingTable::restore_normalized(language, std::move(tokens), d, std::move(values));
    return EmbeddingTable(language, std::move(tokens), d, std::move(values));
  }

 private:
  std::istream& in_;
  std::size_t n_ = 0;
};

}  // namespace

class CheckpointIo {
 public:
  static void save(const TranslationModel& m, std::ostream& out) {
    out << kMagic << ' ' << kCheckpointVersion << '\n';
    out << "mode " << (m.mode_ == SourceMode::lookup ? "lookup" : "ulr") << '\n';
    out << "steps " << m.steps_trained_ << '\n';
    out << "trained " << m.trained_languages_.size();
    for (const auto& l : m.trained_languages_) out << ' ' << l;
    out << '\n';
    const auto kv = to_key_values(m.config_);
    out << "config " << kv.size() << '\n';
    for (const auto& [k, v] : kv) out << k << ' ' << v << '\n';
    out << "languages " << m.languages_.size();
    for (const auto& l : m.languages_) out << ' ' << l;
    out << '\n';
    const auto experts = m.mole_ ? m.mole_->languages() : std::vector<std::string>{};
    out << "experts " << experts.size();
    for (const auto& l : experts) out << ' ' << l;
    out << '\n';
    write_vocab(out, "target", m.target_vocab_);
    if (m.mode_ == SourceMode::lookup) {
      write_vocab(out, "source", m.lookup_vocab_);
    } else {
      write_table(out, "universal_keys", m.uts_.keys());
      for (const auto& lang : m.languages_) {
        const auto& side = m.ulr_.at(lang);
        out << "language " << lang << '\n';
        write_vocab(out, "source", side.rule.vocab());
        write_table(out, "queries", side.queries.table());
        std::vector<std::pair<std::size_t, std::string>> ranks;
        for (const auto& [tok, r] : side.queries.ranks()) ranks.emplace_back(r, tok);
        std::sort(ranks.begin(), ranks.end());
        out << "ranks " << ranks.size() << '\n';
        for (const auto& [r, tok] : ranks) out << tok << ' ' << r << '\n';
      }
    }
    const auto params = m.parameters();
    out << "params " << params.size() << '\n';
    for (const auto& p : params) {
      const auto& t = p.tensor;
      out << "param " << p.name << ' ' << t.rank();
      for (auto d : t.shape()) out << ' ' << d;
      out << '\n';
      write_values(out, t.data(), t.cols());
    }
    out << "end\n";
  }

  static TranslationModel load(std::istream& in) {
    Reader r(in);
    auto head = r.line();
    if (head.size() != 2 || head[0] != kMagic) throw FormatError("not a checkpoint (missing header)");
    const auto version = static_cast<int>(r.number(head[1]));
    if (version != kCheckpointVersion) {
      throw VersionError("checkpoint version " + std::to_string(version) + " but this build reads version " +
                         std::to_string(kCheckpointVersion));
    }
    const std::string mode = r.expect("mode", 2)[1];
    const std::uint64_t steps = r.number(r.expect("steps", 2)[1]);
    auto trained_line = r.line();
    if (trained_line.size() < 2 || trained_line[0] != "trained") throw FormatError("checkpoint: missing trained languages");
    std::set<std::string> trained(trained_line.begin() + 2, trained_line.end());
    const std::size_t nkv = r.number(r.expect("config", 2)[1]);
    KeyValues kv;
    for (std::size_t i = 0; i < nkv; ++i) {
      auto f = r.line();
      if (f.size() != 2) throw FormatError("checkpoint: bad config line");
      kv[f[0]] = f[1];
    }
    ModelConfig config;
    apply_key_values(config, kv);
    auto lang_line = r.line();
    if (lang_line.empty() || lang_line[0] != "languages") throw FormatError("checkpoint: missing languages");
    std::vector<std::string> languages(lang_line.begin() + 2, lang_line.end());
    auto exp_line = r.line();
    if (exp_line.empty() || exp_line[0] != "experts") throw FormatError("checkpoint: missing experts");
    std::vector<std::string> experts(exp_line.begin() + 2, exp_line.end());
    Vocabulary target = r.vocab("target");

    TranslationModel m;
    if (mode == "lookup") {
      Vocabulary source = r.vocab("source");
      m = TranslationModel::make_lookup(config, std::move(source), std::move(target), languages, experts);
    } else if (mode == "ulr") {
      EmbeddingTable keys = r.table("universal_keys", "");
      std::vector<UlrLanguage> sides;
      for (const auto& lang : languages) {
        auto h = r.expect("language", 2);
        if (h[1] != lang) throw FormatError("checkpoint: expected language '" + lang + "'");
        Vocabulary v = r.vocab("source");
        EmbeddingTable q = r.table("queries", lang);
        const std::size_t n = r.number(r.expect("ranks", 2)[1]);
        std::unordered_map<std::string, std::size_t> ranks;
        for (std::size_t i = 0; i < n; ++i) {
          auto f = r.line();
          if (f.size() != 2) throw FormatError("checkpoint: bad rank line");
          ranks[f[0]] = r.number(f[1]);
        }
        sides.push_back({lang, std::move(v), QuerySpace(lang, std::move(q), std::move(ranks))});
      }
      m = TranslationModel::make_ulr(config, std::move(keys), std::move(sides), std::move(target), experts);
    } else {
      throw FormatError("checkpoint: unknown mode '" + mode + "'");
    }

    auto params = m.parameters();
    const std::size_t np = r.number(r.expect("params", 2)[1]);
    if (np != params.size()) {
      throw FormatError("checkpoint has " + std::to_string(np) + " parameters, model expects " +
                        std::to_string(params.size()));
    }
    // Read everything before touching the model so a bad file leaves nothing half-loaded.
    std::vector<std::vector<double>> loaded;
    for (auto& p : params) {
      auto f = r.line();
      if (f.size() < 3 || f[0] != "param" || f[1] != p.name) {
        throw FormatError("checkpoint: expected parameter '" + p.name + "'");
      }
      const std::size_t rank = r.number(f[2]);
      if (f.size() != 3 + rank) throw FormatError("checkpoint: bad shape for '" + p.name + "'");
      Shape shape;
      for (std::size_t i = 0; i < rank; ++i) shape.push_back(r.number(f[3 + i]));
      if (shape != p.tensor.shape()) {
        throw FormatError("checkpoint: parameter '" + p.name + "' has shape " + shape_string(shape) +
                          ", model expects " + shape_string(p.tensor.shape()));
      }
      loaded.push_back(r.values(p.tensor.rows(), p.tensor.cols()));
    }
    if (r.line() != std::vector<std::string>{"end"}) throw FormatError("checkpoint: missing end marker");
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::copy(loaded[i].begin(), loaded[i].end(), params[i].tensor.data_mut().begin());
    }
    m.steps_trained_ = steps;
    m.trained_languages_ = std::move(trained);
    return m;
  }
};

void TranslationModel::save(std::ostream& out) const { CheckpointIo::save(*this, out); }
TranslationModel TranslationModel::load(std::istream& in) { return CheckpointIo::load(in); }

void TranslationModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  save(out);
  if (!out) throw InputError("failed writing " + path.string());
}

TranslationModel TranslationModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return load(in);
}

}  // namespace unmt
