#include "mulr/config.hpp"

#include <cstdlib>
#include <functional>

#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/text.hpp"

namespace mulr {

std::map<std::string, std::string> parse_key_values(std::string_view text, const std::string &source) {
  std::map<std::string, std::string> out;
  std::string section;
  auto lines = io::lines_of(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string line(lines[ln]);
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = text::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, ln + 1, "unterminated section header");
      section = text::trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, ln + 1, "expected key = value");
    std::string key = text::trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source, ln + 1, "empty key");
    if (!section.empty()) key = section + '.' + key;
    if (!out.emplace(key, text::trim(line.substr(eq + 1))).second) {
      throw ParseError(source, ln + 1, "duplicate key '" + key + "'");
    }
  }
  return out;
}

SgnsConfig EmbedSettings::sgns(std::uint64_t seed, int threads, bool positional) const {
  SgnsConfig cfg;
  cfg.dim = dim;
  cfg.negatives = negatives;
  cfg.window = window;
  cfg.epochs = epochs;
  cfg.learning_rate = learning_rate;
  cfg.seed = seed;
  cfg.positional = positional;
  cfg.threads = threads;
  return cfg;
}

namespace {

template <typename T>
T parse_number(const std::string &key, const std::string &value) {
  try {
    std::size_t used = 0;
    if constexpr (std::is_floating_point_v<T>) {
      double v = std::stod(value, &used);
      if (used == value.size()) return static_cast<T>(v);
    } else {
      long long v = std::stoll(value, &used);
      if (used == value.size() && (std::is_signed_v<T> || v >= 0)) return static_cast<T>(v);
    }
  } catch (const std::exception &) {
  }
  throw UsageError("config key '" + key + "': invalid number '" + value + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::string_view text, const std::filesystem::path &base_dir,
                                         const std::string &source) {
  auto kv = parse_key_values(text, source);
  ExperimentConfig cfg;
  auto path = [&](const std::string &v) {
    std::filesystem::path p(v);
    return p.is_relative() ? base_dir / p : p;
  };
  std::string levels;
  const std::map<std::string, std::function<void(const std::string &, const std::string &)>> handlers = {
      {"run.name", [&](auto &, auto &v) { cfg.name = v; }},
      {"run.seed", [&](auto &k, auto &v) { cfg.seed = parse_number<std::uint64_t>(k, v); }},
      {"run.threads", [&](auto &k, auto &v) { cfg.threads = parse_number<int>(k, v); }},
      {"run.work_dir", [&](auto &, auto &v) { cfg.work_dir = path(v); }},
      {"data.dir",
       [&](auto &, auto &v) {
         auto d = path(v);
         cfg.corpus = d / "corpus.txt";
         cfg.dataset = d / "dataset.tsv";
         cfg.hierarchy = d / "hierarchy.tsv";
         cfg.notable = d / "notable.tsv";
         if (std::filesystem::exists(d / "descriptions.tsv")) cfg.descriptions = d / "descriptions.tsv";
       }},
      {"data.corpus", [&](auto &, auto &v) { cfg.corpus = path(v); }},
      {"data.dataset", [&](auto &, auto &v) { cfg.dataset = path(v); }},
      {"data.hierarchy", [&](auto &, auto &v) { cfg.hierarchy = path(v); }},
      {"data.notable", [&](auto &, auto &v) { cfg.notable = path(v); }},
      {"data.descriptions", [&](auto &, auto &v) { cfg.descriptions = path(v); }},
      {"embed.mode",
       [&](auto &k, auto &v) {
         cfg.embed.entity_mode = parse_embedding_kind(v);
         if (cfg.embed.entity_mode == EmbeddingKind::Subword) {
           throw UsageError("config key '" + k + "': entity embeddings must be skip or sskip");
         }
       }},
      {"embed.dim", [&](auto &k, auto &v) { cfg.embed.dim = parse_number<int>(k, v); }},
      {"embed.negatives", [&](auto &k, auto &v) { cfg.embed.negatives = parse_number<int>(k, v); }},
      {"embed.window", [&](auto &k, auto &v) { cfg.embed.window = parse_number<int>(k, v); }},
      {"embed.epochs", [&](auto &k, auto &v) { cfg.embed.epochs = parse_number<int>(k, v); }},
      {"embed.learning_rate", [&](auto &k, auto &v) { cfg.embed.learning_rate = parse_number<double>(k, v); }},
      {"embed.min_count", [&](auto &k, auto &v) { cfg.embed.min_count = parse_number<std::int64_t>(k, v); }},
      {"embed.subword_min_n", [&](auto &k, auto &v) { cfg.embed.subword_min_n = parse_number<int>(k, v); }},
      {"embed.subword_max_n", [&](auto &k, auto &v) { cfg.embed.subword_max_n = parse_number<int>(k, v); }},
      {"embed.ngram_min_count",
       [&](auto &k, auto &v) { cfg.embed.ngram_min_count = parse_number<std::int64_t>(k, v); }},
      {"typer.levels", [&](auto &, auto &v) { levels = v; }},
      {"typer.hidden", [&](auto &k, auto &v) { cfg.train.hidden = parse_number<std::size_t>(k, v); }},
      {"typer.epochs", [&](auto &k, auto &v) { cfg.train.epochs = parse_number<std::size_t>(k, v); }},
      {"typer.batch_size", [&](auto &k, auto &v) { cfg.train.batch_size = parse_number<std::size_t>(k, v); }},
      {"typer.learning_rate", [&](auto &k, auto &v) { cfg.train.learning_rate = parse_number<double>(k, v); }},
      {"typer.patience", [&](auto &k, auto &v) { cfg.train.patience = parse_number<std::size_t>(k, v); }},
      {"typer.init_range", [&](auto &k, auto &v) { cfg.train.init_range = parse_number<double>(k, v); }},
      {"typer.standardize",
       [&](auto &k, auto &v) {
         if (v != "true" && v != "false") throw UsageError("'" + k + "' must be true or false");
         cfg.train.standardize = v == "true";
       }},
      {"typer.name_length", [&](auto &k, auto &v) { cfg.repr.name_length = parse_number<std::size_t>(k, v); }},
      {"typer.char_dim", [&](auto &k, auto &v) { cfg.repr.char_dim = parse_number<std::size_t>(k, v); }},
      {"typer.lstm_hidden", [&](auto &k, auto &v) { cfg.repr.lstm_hidden = parse_number<std::size_t>(k, v); }},
      {"typer.cnn_filters", [&](auto &k, auto &v) { cfg.repr.cnn_filters = parse_number<std::size_t>(k, v); }},
      {"typer.cnn_widths",
       [&](auto &k, auto &v) {
         cfg.repr.cnn_widths.clear();
         for (const auto &w : text::split(v, ',')) cfg.repr.cnn_widths.push_back(parse_number<int>(k, text::trim(w)));
       }},
      {"typer.char_min_count",
       [&](auto &k, auto &v) { cfg.repr.char_min_count = parse_number<std::int64_t>(k, v); }},
      {"typer.avg_des_k", [&](auto &k, auto &v) { cfg.repr.avg_des_k = parse_number<std::size_t>(k, v); }},
  };
  // data.dir first so explicit paths override it.
  if (auto it = kv.find("data.dir"); it != kv.end()) handlers.at("data.dir")(it->first, it->second);
  for (const auto &[k, v] : kv) {
    if (k == "data.dir") continue;
    auto h = handlers.find(k);
    if (h == handlers.end()) throw UsageError(source + ": unknown config key '" + k + "'");
    h->second(k, v);
  }
  if (!levels.empty()) {
    auto parsed = RepresentationSpec::parse(levels);
    cfg.repr.levels = parsed.levels;
  }
  validate(cfg.train);
  validate(cfg.embed.sgns(cfg.seed, 1, false));
  if (cfg.threads < 1) throw UsageError("run.threads must be >= 1");
  cfg.threads = effective_threads(cfg.threads);
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path &path) {
  auto base = path.parent_path();
  auto cfg = parse(io::read_file(path), base.empty() ? "." : base, path.string());
  if (cfg.name == "run") cfg.name = path.stem().string();
  return cfg;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  auto kv = [&](const std::string &k, const std::string &v) { out += k + '=' + v + '\n'; };
  auto num = [](double v) {
    std::string s;
    io::append_double(s, v);
    return s;
  };
  auto content = [](const std::filesystem::path &p) {
    return p.empty() ? std::string("-") : io::hex64(io::fnv1a(io::read_file(p)));
  };
  kv("data.corpus", content(corpus));
  kv("data.dataset", content(dataset));
  kv("data.hierarchy", content(hierarchy));
  kv("data.notable", content(notable));
  kv("data.descriptions", content(descriptions));
  kv("embed.mode", std::string(to_string(embed.entity_mode)));
  kv("embed.dim", std::to_string(embed.dim));
  kv("embed.negatives", std::to_string(embed.negatives));
  kv("embed.window", std::to_string(embed.window));
  kv("embed.epochs", std::to_string(embed.epochs));
  kv("embed.learning_rate", num(embed.learning_rate));
  kv("embed.min_count", std::to_string(embed.min_count));
  kv("embed.subword_n", std::to_string(embed.subword_min_n) + "-" + std::to_string(embed.subword_max_n));
  kv("embed.ngram_min_count", std::to_string(embed.ngram_min_count));
  kv("typer.levels", repr.levels_string());
  kv("typer.name_length", std::to_string(repr.name_length));
  kv("typer.char_dim", std::to_string(repr.char_dim));
  kv("typer.lstm_hidden", std::to_string(repr.lstm_hidden));
  std::string widths;
  for (int w : repr.cnn_widths) widths += (widths.empty() ? "" : ",") + std::to_string(w);
  kv("typer.cnn_widths", widths);
  kv("typer.cnn_filters", std::to_string(repr.cnn_filters));
  kv("typer.char_min_count", std::to_string(repr.char_min_count));
  kv("typer.avg_des_k", std::to_string(repr.avg_des_k));
  kv("typer.hidden", std::to_string(train.hidden));
  kv("typer.epochs", std::to_string(train.epochs));
  kv("typer.batch_size", std::to_string(train.batch_size));
  kv("typer.learning_rate", num(train.learning_rate));
  kv("typer.patience", std::to_string(train.patience));
  kv("typer.init_range", num(train.init_range));
  kv("typer.standardize", train.standardize ? "true" : "false");
  kv("run.seed", std::to_string(seed));
  return out;
}

std::string ExperimentConfig::hash() const { return io::hex64(io::fnv1a(canonical())); }

int effective_threads(int configured) {
  if (const char *env = std::getenv("MULR_THREADS"); env && *env) {
    try {
      int t = std::stoi(env);
      if (t >= 1) return t;
    } catch (const std::exception &) {
    }
    throw UsageError(std::string("MULR_THREADS must be a positive integer, got '") + env + "'");
  }
  return configured;
}

}  // namespace mulr
