#include "unmt/corpus/parallel.hpp"

#include <fstream>

#include "unmt/error.hpp"

namespace unmt {

ParallelCorpus load_parallel(const std::string& language, const std::filesystem::path& source,
                             const std::filesystem::path& target) {
  auto src = read_lines(source);
  auto tgt = read_lines(target);
  if (src.size() != tgt.size()) {
    throw InputError("parallel files differ in length: " + source.string() + " has " +
                     std::to_string(src.size()) + " lines, " + target.string() + " has " +
                     std::to_string(tgt.size()));
  }
  ParallelCorpus c{language, {}};
  for (std::size_t i = 0; i < src.size(); ++i) {
    c.pairs.push_back({split_whitespace(src[i]), split_whitespace(tgt[i])});
  }
  return c;
}

ParallelCorpus load_parallel_tsv(const std::string& language, const std::filesystem::path& path) {
  ParallelCorpus c{language, {}};
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected source<TAB>target");
    }
    c.pairs.push_back({split_whitespace(line.substr(0, tab)), split_whitespace(line.substr(tab + 1))});
  }
  return c;
}

void save_parallel_tsv(const ParallelCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& p : corpus.pairs) out << join(p.source) << '\t' << join(p.target) << '\n';
}

ParallelCorpus filter_pairs(ParallelCorpus corpus, std::size_t max_length) {
  std::erase_if(corpus.pairs, [&](const SentencePair& p) {
    return p.source.empty() || p.target.empty() || p.source.size() > max_length ||
           p.target.size() > max_length;
  });
  return corpus;
}

}  // namespace unmt
