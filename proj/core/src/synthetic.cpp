#include "mulr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/rng.hpp"
#include "mulr/text.hpp"

namespace mulr {

void validate(const SyntheticSpec &spec) {
  auto fraction = [](double f, const char *what) {
    if (!(f >= 0.0 && f <= 1.0)) throw UsageError(std::string(what) + " must be in [0, 1]");
  };
  if (spec.roots == 0 || spec.leaves == 0) throw UsageError("synthetic spec needs roots and leaves");
  if (spec.leaves < spec.roots) throw UsageError("every root needs at least one leaf");
  if (spec.entities < spec.leaves) throw UsageError("fewer entities than leaf types");
  fraction(spec.train_fraction, "train fraction");
  fraction(spec.dev_fraction, "dev fraction");
  if (spec.train_fraction + spec.dev_fraction > 1.0) throw UsageError("train + dev fraction exceeds 1");
  fraction(spec.head_fraction, "head fraction");
  fraction(spec.tail_fraction, "tail fraction");
  if (spec.head_fraction + spec.tail_fraction > 1.0) throw UsageError("head + tail fraction exceeds 1");
  if (spec.head_max_frequency < kHeadMinFrequency) throw UsageError("head max frequency below the head bucket");
  if (spec.middle_max_frequency < kTailMaxFrequency + 1 || spec.middle_max_frequency >= kHeadMinFrequency) {
    throw UsageError("middle max frequency must lie in [5, 100]");
  }
  for (double f : {spec.context_signal, spec.name_word_context_signal, spec.sibling_confusion,
                   spec.name_word_signal, spec.suffix_signal, spec.unknown_fraction, spec.description_signal}) {
    fraction(f, "signal strength");
  }
  if (spec.context_words == 0 || spec.background_words == 0 || spec.filler_words == 0) {
    throw UsageError("word pools must be non-empty");
  }
  if (spec.name_word_signal > 0.0 && spec.name_words == 0) throw UsageError("name word signal without name words");
  if (spec.suffix_signal > 0.0 && spec.suffixes == 0) throw UsageError("suffix signal without suffixes");
  if (spec.max_train_names == 0 || spec.max_train_names > kMaxTrainNames) {
    throw UsageError("max train names must be in [1, 3]");
  }
}

SyntheticSpec synthetic_preset(std::string_view name) {
  SyntheticSpec s;
  if (name == "mixed") {
    s.train_fraction = 0.2;
    s.context_signal = 0.15;
    s.sibling_confusion = 0.3;
    s.name_word_context_signal = 0.8;
    s.corpus_only_entities = 8000;
  } else if (name == "context") {
    s.context_signal = 0.5;
    s.name_word_signal = 0.0;
    s.suffix_signal = 0.0;
    s.description_signal = 0.0;
  } else if (name == "suffix") {
    s.context_signal = 0.0;
    s.name_word_signal = 0.0;
    s.suffix_signal = 1.0;
    s.suffixes = 3;
    s.max_filler = 3;
    s.description_signal = 0.0;
  } else if (name == "subword") {
    s = synthetic_preset("mixed");
    s.unknown_fraction = 0.3;
  } else {
    throw UsageError("unknown synthetic preset '" + std::string(name) + "'");
  }
  return s;
}

namespace {

constexpr std::string_view kConsonants = "bcdfghjklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
const char *const kSuffixes[] = {"ish", "en", "ov", "ica", "ton", "ez", "ura", "ski", "ard", "oni", "eth", "ux", "ath", "ine"};

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

// Unique pronounceable words.
class WordFactory {
 public:
  explicit WordFactory(Rng &rng) : rng_(rng) {}

  std::string syllables(std::size_t n) {
    std::string w;
    for (std::size_t i = 0; i < n; ++i) {
      w += kConsonants[rng_.below(kConsonants.size())];
      w += kVowels[rng_.below(kVowels.size())];
    }
    return w;
  }

  std::string fresh(std::size_t min_syl, std::size_t max_syl) {
    for (int attempt = 0;; ++attempt) {
      std::string w = syllables(min_syl + rng_.below(max_syl - min_syl + 1));
      if (attempt > 20) w += kConsonants[rng_.below(kConsonants.size())];
      if (used_.insert(w).second) return w;
    }
  }

  bool claim(const std::string &w) { return used_.insert(w).second; }

 private:
  Rng &rng_;
  std::set<std::string> used_;
};

std::vector<std::string> pool(WordFactory &f, std::size_t n, std::size_t min_syl, std::size_t max_syl) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(f.fresh(min_syl, max_syl));
  return out;
}

template <typename T>
const T &pick(Rng &rng, const std::vector<T> &v) {
  return v[rng.below(v.size())];
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec &spec) {
  validate(spec);
  Rng rng(spec.seed);
  WordFactory words(rng);
  SyntheticData data;

  std::vector<std::string> type_names;
  std::vector<int> parents;
  for (std::size_t r = 0; r < spec.roots; ++r) {
    type_names.push_back("/t" + std::to_string(r));
    parents.push_back(-1);
  }
  std::vector<std::size_t> leaf_root(spec.leaves);
  for (std::size_t l = 0; l < spec.leaves; ++l) {
    leaf_root[l] = l % spec.roots;
    type_names.push_back("/t" + std::to_string(leaf_root[l]) + "/s" + std::to_string(l / spec.roots));
    parents.push_back(static_cast<int>(leaf_root[l]));
  }
  data.types = TypeSystem(type_names, parents);
  auto leaf_type = [&](std::size_t l) { return static_cast<int>(spec.roots + l); };

  std::vector<std::vector<std::string>> context(spec.leaves), name_words(spec.leaves), suffixes(spec.leaves);
  std::size_t next_suffix = 0;
  for (std::size_t l = 0; l < spec.leaves; ++l) {
    context[l] = pool(words, spec.context_words, 2, 3);
    for (auto &w : pool(words, spec.name_words, 3, 4)) name_words[l].push_back(capitalize(w));
    for (std::size_t k = 0; k < spec.suffixes; ++k) {
      std::string s = next_suffix < std::size(kSuffixes) ? kSuffixes[next_suffix++] : words.fresh(1, 1) + "x";
      suffixes[l].push_back(s);
    }
  }
  const auto background = pool(words, spec.background_words, 2, 3);
  std::vector<std::string> fillers;
  for (auto &w : pool(words, spec.filler_words, 2, 3)) fillers.push_back(capitalize(w));

  // Leaves round-robin, then shuffled into train/dev/test.
  const std::size_t n = spec.entities;
  std::vector<std::size_t> leaf_of(n);
  for (std::size_t i = 0; i < n; ++i) leaf_of[i] = i % spec.leaves;
  rng.shuffle(leaf_of);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(std::llround(spec.dev_fraction * static_cast<double>(n))));
  enum Part { Train, Dev, Test };
  auto part_of = [&](std::size_t i) { return i < n_train ? Train : i < n_train + n_dev ? Dev : Test; };

  // Frequency buckets assigned exactly per split.
  std::vector<std::int64_t> freq(n);
  for (auto [begin, end] : {std::pair{std::size_t{0}, n_train}, std::pair{n_train, n_train + n_dev},
                            std::pair{n_train + n_dev, n}}) {
    const std::size_t size = end - begin;
    const auto n_head = static_cast<std::size_t>(std::llround(spec.head_fraction * static_cast<double>(size)));
    const auto n_tail = std::min(size - n_head, static_cast<std::size_t>(std::llround(spec.tail_fraction * static_cast<double>(size))));
    std::vector<int> bucket(size, 1);
    std::fill_n(bucket.begin(), n_head, 2);
    std::fill_n(bucket.begin() + static_cast<std::ptrdiff_t>(n_head), n_tail, 0);
    rng.shuffle(bucket);
    for (std::size_t k = 0; k < size; ++k) {
      auto range = [&](std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
      };
      freq[begin + k] = bucket[k] == 2 ? range(kHeadMinFrequency, spec.head_max_frequency)
                        : bucket[k] == 0 ? range(1, kTailMaxFrequency)
                                         : range(kTailMaxFrequency + 1, spec.middle_max_frequency);
    }
  }

  std::set<std::string> train_name_words;  // lowercased
  auto make_name = [&](std::size_t leaf, bool novel) {
    std::vector<std::string> ws;
    if (rng.bernoulli(spec.name_word_signal)) {
      std::string w = pick(rng, name_words[leaf]);
      if (novel) {
        // Keep all but the last character and add a fresh ending.
        for (;;) {
          std::string v = w.substr(0, w.size() - 1) + words.syllables(1);
          if (!train_name_words.count(text::to_lower(v)) && words.claim(v)) {
            w = v;
            break;
          }
        }
      }
      ws.push_back(w);
    }
    if (rng.bernoulli(spec.suffix_signal)) {
      ws.push_back(capitalize(words.syllables(1 + rng.below(2)) + pick(rng, suffixes[leaf])));
    }
    std::size_t k = rng.below(spec.max_filler + 1);
    if (ws.empty() && k == 0) k = 1;
    for (std::size_t i = 0; i < k; ++i) ws.push_back(novel ? capitalize(words.fresh(2, 3)) : pick(rng, fillers));
    rng.shuffle(ws);
    std::string name;
    for (const auto &w : ws) name += (name.empty() ? "" : " ") + w;
    return name;
  };

  std::vector<std::vector<std::string>> names(n);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "m%05zu", i);
    ids[i] = buf;
  }
  for (std::size_t i = 0; i < n_train; ++i) {
    const std::size_t k = 1 + rng.below(spec.max_train_names);
    for (std::size_t j = 0; j < k; ++j) {
      auto name = make_name(leaf_of[i], false);
      if (std::find(names[i].begin(), names[i].end(), name) == names[i].end()) names[i].push_back(name);
    }
    for (const auto &nm : names[i]) {
      for (const auto &w : text::split_whitespace(nm)) train_name_words.insert(text::to_lower(w));
    }
  }
  // Exactly round(unknown_fraction * |test|) test names are built from unseen words.
  const std::size_t test_begin = n_train + n_dev;
  std::vector<int> novel(n - test_begin, 0);
  std::fill_n(novel.begin(), std::llround(spec.unknown_fraction * static_cast<double>(novel.size())), 1);
  rng.shuffle(novel);
  for (std::size_t i = n_train; i < n; ++i) {
    names[i].push_back(make_name(leaf_of[i], i >= test_begin && novel[i - test_begin]));
  }

  auto context_token = [&](std::size_t leaf, double signal) -> const std::string & {
    if (!rng.bernoulli(signal)) return pick(rng, background);
    std::size_t src = leaf;
    if (spec.sibling_confusion > 0.0 && rng.bernoulli(spec.sibling_confusion)) {
      std::vector<std::size_t> siblings;
      for (std::size_t l = 0; l < spec.leaves; ++l) {
        if (l != leaf && leaf_root[l] == leaf_root[leaf]) siblings.push_back(l);
      }
      if (!siblings.empty()) src = pick(rng, siblings);
    }
    return pick(rng, context[src]);
  };

  auto &sentences = data.corpus.sentences;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::int64_t m = 0; m < freq[i]; ++m) {
      // Every name is used at least once when the frequency allows.
      const auto &name = static_cast<std::size_t>(m) < names[i].size() ? names[i][m] : pick(rng, names[i]);
      auto surface = text::split_whitespace(name);
      Sentence s;
      for (std::size_t k = 0; k < spec.sentence_length; ++k) {
        s.tokens.push_back(context_token(leaf_of[i], spec.context_signal));
      }
      const std::size_t at = rng.below(s.tokens.size() + 1);
      s.tokens.insert(s.tokens.begin() + static_cast<std::ptrdiff_t>(at), surface.begin(), surface.end());
      s.mentions.push_back({at, at + surface.size(), ids[i]});
      sentences.push_back(std::move(s));
    }
  }
  for (std::size_t l = 0; l < spec.leaves; ++l) {
    for (const auto &w : name_words[l]) {
      for (std::size_t k = 0; k < spec.name_word_sentences; ++k) {
        Sentence s;
        for (std::size_t t = 0; t < spec.sentence_length; ++t) {
          s.tokens.push_back(context_token(l, spec.name_word_context_signal));
        }
        s.tokens.insert(s.tokens.begin() + static_cast<std::ptrdiff_t>(rng.below(s.tokens.size() + 1)), w);
        sentences.push_back(std::move(s));
      }
    }
  }
  for (std::size_t c = 0; c < spec.corpus_only_entities; ++c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "c%05zu", c);
    const std::size_t leaf = c % spec.leaves;
    const auto name = text::split_whitespace(make_name(leaf, false));
    const auto mentions = 1 + rng.below(static_cast<std::uint64_t>(spec.middle_max_frequency));
    for (std::uint64_t m = 0; m < mentions; ++m) {
      Sentence s;
      for (std::size_t k = 0; k < spec.sentence_length; ++k) s.tokens.push_back(context_token(leaf, spec.context_signal));
      const std::size_t at = rng.below(s.tokens.size() + 1);
      s.tokens.insert(s.tokens.begin() + static_cast<std::ptrdiff_t>(at), name.begin(), name.end());
      s.mentions.push_back({at, at + name.size(), buf});
      sentences.push_back(std::move(s));
    }
    data.notable[buf] = type_names[leaf_type(leaf)];
  }
  rng.shuffle(sentences);

  // Names ordered by mention count; never-mentioned alternates are dropped.
  auto ranked = most_frequent_names(data.corpus, kMaxTrainNames);
  for (std::size_t i = 0; i < n; ++i) {
    EntityRecord e;
    e.id = ids[i];
    e.names = ranked.at(ids[i]);
    if (part_of(i) != Train) e.names.resize(1);
    e.gold_types = {static_cast<int>(leaf_root[leaf_of[i]]), leaf_type(leaf_of[i])};
    e.corpus_frequency = freq[i];
    auto &part = part_of(i) == Train ? data.split.train : part_of(i) == Dev ? data.split.dev : data.split.test;
    part.push_back(std::move(e));
    data.notable[ids[i]] = type_names[leaf_type(leaf_of[i])];

    std::vector<std::string> desc;
    for (std::size_t k = 0; k < spec.description_length; ++k) {
      desc.push_back(rng.bernoulli(spec.description_signal) ? pick(rng, context[leaf_of[i]]) : pick(rng, background));
    }
    data.descriptions[ids[i]] = std::move(desc);
  }
  return data;
}

void save_synthetic(const SyntheticData &data, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  io::write_file(dir / "hierarchy.tsv", data.types.serialize());
  io::write_file(dir / "dataset.tsv", serialize_dataset(data.split, data.types));
  io::write_file(dir / "corpus.txt", serialize_corpus(data.corpus));
  io::write_file(dir / "notable.tsv", serialize_notable_types(data.notable));
  std::string desc;
  for (const auto &[id, toks] : data.descriptions) {
    desc += id + '\t';
    for (std::size_t k = 0; k < toks.size(); ++k) desc += (k ? " " : "") + toks[k];
    desc += '\n';
  }
  io::write_file(dir / "descriptions.tsv", desc);
}

SyntheticData load_synthetic(const std::filesystem::path &dir) {
  SyntheticData data;
  data.types = TypeSystem::load(dir / "hierarchy.tsv");
  data.split = load_dataset(dir / "dataset.tsv", data.types);
  data.corpus = load_corpus(dir / "corpus.txt");
  data.notable = load_notable_types(dir / "notable.tsv");
  if (std::filesystem::exists(dir / "descriptions.tsv")) data.descriptions = load_descriptions(dir / "descriptions.tsv");
  return data;
}

OrderProbeCorpus generate_order_corpus(const OrderProbeSpec &spec) {
  if (spec.entities_per_class == 0 || spec.sentences_per_entity == 0 || spec.fillers == 0) {
    throw UsageError("order probe sizes must be positive");
  }
  Rng rng(spec.seed);
  OrderProbeCorpus out;
  std::vector<std::string> fillers;
  for (std::size_t i = 0; i < spec.fillers; ++i) fillers.push_back("f" + std::to_string(i));
  const std::string relation = "rel";
  for (int label = 0; label < 2; ++label) {
    for (std::size_t i = 0; i < spec.entities_per_class; ++i) {
      out.entities.push_back("E" + std::to_string(label) + "_" + std::to_string(i));
      out.labels.push_back(label);
      out.stream.exempt.insert(out.entities.back());
    }
  }
  for (std::size_t e = 0; e < out.entities.size(); ++e) {
    for (std::size_t k = 0; k < spec.sentences_per_entity; ++k) {
      std::vector<std::string> s;
      for (std::size_t f = 0; f < spec.side_fillers; ++f) s.push_back(pick(rng, fillers));
      if (out.labels[e] == 0) {
        s.push_back(out.entities[e]);
        s.push_back(relation);
      } else {
        s.push_back(relation);
        s.push_back(out.entities[e]);
      }
      for (std::size_t f = 0; f < spec.side_fillers; ++f) s.push_back(pick(rng, fillers));
      out.stream.sentences.push_back(std::move(s));
    }
  }
  rng.shuffle(out.stream.sentences);
  return out;
}

}  // namespace mulr
