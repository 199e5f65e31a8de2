#include "mulr/corpus.hpp"

#include <algorithm>
#include <set>

#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/text.hpp"

namespace mulr {

AnnotatedCorpus parse_corpus(std::string_view content, const std::string &source) {
  AnnotatedCorpus corpus;
  auto lines = io::lines_of(content);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = lines[ln];
    Sentence s;
    std::size_t pos = 0;
    while (pos < line.size()) {
      std::size_t open = line.find("[[", pos);
      std::string_view plain =
          line.substr(pos, open == std::string_view::npos ? std::string_view::npos : open - pos);
      for (auto &t : text::tokenize(plain)) s.tokens.push_back(std::move(t));
      if (open == std::string_view::npos) break;
      std::size_t close = line.find("]]", open + 2);
      if (close == std::string_view::npos) throw ParseError(source, ln + 1, "unterminated [[ mention");
      std::string_view inner = line.substr(open + 2, close - open - 2);
      std::size_t bar = inner.find('|');
      if (bar == std::string_view::npos) {
        throw ParseError(source, ln + 1, "mention without '|' separator");
      }
      std::string id = text::trim(inner.substr(0, bar));
      auto surface = text::split_whitespace(inner.substr(bar + 1));
      if (id.empty() || surface.empty()) throw ParseError(source, ln + 1, "empty mention");
      Mention m;
      m.begin = s.tokens.size();
      for (auto &t : surface) s.tokens.push_back(std::move(t));
      m.end = s.tokens.size();
      m.entity = std::move(id);
      s.mentions.push_back(std::move(m));
      pos = close + 2;
    }
    if (s.tokens.empty()) continue;
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

AnnotatedCorpus load_corpus(const std::filesystem::path &path) {
  return parse_corpus(io::read_file(path), path.string());
}

std::string serialize_corpus(const AnnotatedCorpus &corpus) {
  std::string out;
  for (const auto &s : corpus.sentences) {
    std::size_t m = 0;
    for (std::size_t i = 0; i < s.tokens.size();) {
      if (i) out += ' ';
      if (m < s.mentions.size() && s.mentions[m].begin == i) {
        const auto &mention = s.mentions[m];
        out += "[[" + mention.entity + "|";
        for (std::size_t k = mention.begin; k < mention.end; ++k) {
          if (k > mention.begin) out += ' ';
          out += s.tokens[k];
        }
        out += "]]";
        i = mention.end;
        ++m;
      } else {
        out += s.tokens[i++];
      }
    }
    out += '\n';
  }
  return out;
}

void validate(const AnnotatedCorpus &corpus) {
  for (std::size_t si = 0; si < corpus.sentences.size(); ++si) {
    const auto &s = corpus.sentences[si];
    std::size_t prev_end = 0;
    for (const auto &m : s.mentions) {
      if (m.begin >= m.end || m.end > s.tokens.size()) {
        throw DataError("sentence " + std::to_string(si + 1) + ": mention span out of bounds");
      }
      if (m.begin < prev_end) {
        throw DataError("sentence " + std::to_string(si + 1) + ": overlapping mentions");
      }
      prev_end = m.end;
    }
  }
}

NotableTypes parse_notable_types(std::string_view content, const std::string &source) {
  NotableTypes notable;
  auto lines = io::lines_of(content);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string line = text::trim(lines[ln]);
    if (line.empty()) continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != 2) throw ParseError(source, ln + 1, "expected entity_id<TAB>type_id");
    notable[text::trim(cols[0])] = text::trim(cols[1]);
  }
  return notable;
}

NotableTypes load_notable_types(const std::filesystem::path &path) {
  return parse_notable_types(io::read_file(path), path.string());
}

std::string serialize_notable_types(const NotableTypes &notable) {
  std::string out;
  for (const auto &[id, type] : notable) out += id + '\t' + type + '\n';
  return out;
}

std::size_t TokenStream::token_count() const {
  std::size_t n = 0;
  for (const auto &s : sentences) n += s.size();
  return n;
}

TokenStream build_three_copy_corpus(const AnnotatedCorpus &corpus, const NotableTypes &notable,
                                    const std::unordered_set<std::string> &exclude) {
  validate(corpus);
  TokenStream out;
  out.sentences.reserve(corpus.sentences.size() * 3);
  for (const auto &s : corpus.sentences) {
    for (const auto &m : s.mentions) {
      if (!notable.count(m.entity) && !exclude.count(m.entity)) {
        throw DataError("mention references unknown entity id '" + m.entity + "'");
      }
    }
    out.sentences.push_back(s.tokens);
    std::vector<std::string> ids, types;
    std::size_t m = 0;
    for (std::size_t i = 0; i < s.tokens.size();) {
      if (m < s.mentions.size() && s.mentions[m].begin == i) {
        const auto &mention = s.mentions[m];
        ids.push_back(mention.entity);
        out.exempt.insert(mention.entity);
        if (exclude.count(mention.entity)) {
          for (std::size_t k = mention.begin; k < mention.end; ++k) types.push_back(s.tokens[k]);
        } else {
          const auto &type = notable.at(mention.entity);
          types.push_back(type);
          out.exempt.insert(type);
        }
        i = mention.end;
        ++m;
      } else {
        ids.push_back(s.tokens[i]);
        types.push_back(s.tokens[i]);
        ++i;
      }
    }
    out.sentences.push_back(std::move(ids));
    out.sentences.push_back(std::move(types));
  }
  return out;
}

void save_token_stream(const std::filesystem::path &path, const TokenStream &stream) {
  std::string body;
  for (const auto &s : stream.sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) body += ' ';
      body += s[i];
    }
    body += '\n';
  }
  io::write_file(path, body);
  std::vector<std::string> exempt(stream.exempt.begin(), stream.exempt.end());
  std::sort(exempt.begin(), exempt.end());
  std::string side;
  for (const auto &t : exempt) side += t + '\n';
  io::write_file(path.string() + ".exempt", side);
}

TokenStream load_token_stream(const std::filesystem::path &path) {
  TokenStream stream;
  std::string content = io::read_file(path);
  for (auto line : io::lines_of(content)) {
    auto toks = text::split_whitespace(line);
    if (!toks.empty()) stream.sentences.push_back(std::move(toks));
  }
  std::filesystem::path side = path.string() + ".exempt";
  if (std::filesystem::exists(side)) {
    std::string ex = io::read_file(side);
    for (auto line : io::lines_of(ex)) {
      std::string t = text::trim(line);
      if (!t.empty()) stream.exempt.insert(t);
    }
  }
  return stream;
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::vector<int>> Vocabulary::encode(const TokenStream &stream) const {
  std::vector<std::vector<int>> out;
  out.reserve(stream.sentences.size());
  for (const auto &s : stream.sentences) {
    std::vector<int> ids;
    ids.reserve(s.size());
    for (const auto &t : s) {
      auto it = index_.find(t);
      if (it != index_.end()) ids.push_back(it->second);
    }
    out.push_back(std::move(ids));
  }
  return out;
}

Vocabulary build_vocabulary(const TokenStream &stream, std::int64_t min_count) {
  if (min_count < 1) throw DataError("min_count must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto &s : stream.sentences) {
    for (const auto &t : s) ++counts[t];
  }
  if (counts.empty()) throw DataError("cannot build a vocabulary from an empty stream");
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto &[tok, c] : counts) {
    if (c >= min_count || stream.exempt.count(tok)) kept.emplace_back(tok, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto &a, const auto &b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.min_count_ = min_count;
  for (auto &[tok, c] : kept) {
    v.index_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.exempt_.push_back(stream.exempt.count(tok) > 0);
    v.tokens_.push_back(tok);
    v.counts_.push_back(c);
  }
  return v;
}

std::vector<std::string> extract_subwords(std::string_view word, int n_min, int n_max) {
  if (n_min < 1 || n_max < n_min) throw DataError("subword bounds must satisfy 1 <= n_min <= n_max");
  std::vector<std::string> out;
  if (word.empty()) return out;
  std::vector<std::string> chars{"<"};
  for (auto &c : text::utf8_chars(word)) chars.push_back(std::move(c));
  chars.emplace_back(">");
  const int len = static_cast<int>(chars.size());
  for (int n = n_min; n <= n_max; ++n) {
    for (int i = 0; i + n <= len; ++i) {
      std::string g;
      for (int k = i; k < i + n; ++k) g += chars[k];
      out.push_back(std::move(g));
    }
  }
  if (len > n_max) out.push_back("<" + std::string(word) + ">");
  return out;
}

SubwordIndex::SubwordIndex(std::vector<std::string> ngrams, int n_min, int n_max)
    : ngrams_(std::move(ngrams)), n_min_(n_min), n_max_(n_max) {
  for (std::size_t i = 0; i < ngrams_.size(); ++i) {
    if (!index_.emplace(ngrams_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate ngram '" + ngrams_[i] + "' in subword index");
    }
  }
}

SubwordIndex SubwordIndex::build(const Vocabulary &vocab, int n_min, int n_max,
                                 std::int64_t min_count) {
  std::unordered_map<std::string, std::int64_t> counts;
  std::set<std::string> whole;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto &w = vocab.token(static_cast<int>(i));
    for (auto &g : extract_subwords(w, n_min, n_max)) counts[g] += vocab.count(static_cast<int>(i));
    whole.insert("<" + w + ">");
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto &[g, c] : counts) {
    if (c >= min_count || whole.count(g)) kept.emplace_back(g, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto &a, const auto &b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> ngrams;
  ngrams.reserve(kept.size());
  for (auto &[g, c] : kept) ngrams.push_back(g);
  return SubwordIndex(std::move(ngrams), n_min, n_max);
}

std::optional<int> SubwordIndex::find(std::string_view ngram) const {
  auto it = index_.find(std::string(ngram));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> SubwordIndex::units(std::string_view word) const {
  std::vector<int> ids;
  auto grams = extract_subwords(word, n_min_, n_max_);
  for (const auto &g : grams) {
    auto it = index_.find(g);
    if (it != index_.end()) ids.push_back(it->second);
  }
  return ids;
}

std::map<std::string, std::int64_t> mention_counts(const AnnotatedCorpus &corpus) {
  std::map<std::string, std::int64_t> counts;
  for (const auto &s : corpus.sentences) {
    for (const auto &m : s.mentions) ++counts[m.entity];
  }
  return counts;
}

std::map<std::string, std::vector<std::string>> most_frequent_names(const AnnotatedCorpus &corpus,
                                                                    std::size_t k) {
  std::map<std::string, std::map<std::string, std::int64_t>> surfaces;
  for (const auto &s : corpus.sentences) {
    for (const auto &m : s.mentions) {
      std::string name;
      for (std::size_t i = m.begin; i < m.end; ++i) {
        if (i > m.begin) name += ' ';
        name += s.tokens[i];
      }
      ++surfaces[m.entity][name];
    }
  }
  std::map<std::string, std::vector<std::string>> out;
  for (auto &[id, names] : surfaces) {
    std::vector<std::pair<std::string, std::int64_t>> ranked(names.begin(), names.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto &a, const auto &b) { return a.second > b.second; });
    auto &dst = out[id];
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) dst.push_back(ranked[i].first);
  }
  return out;
}

}  // namespace mulr
