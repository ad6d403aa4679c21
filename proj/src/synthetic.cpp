#include "rrk/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rrk {
namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::size_t kBackgroundWords = 400;
// Query filler words come from the most frequent background ranks so that
// every query has a long candidate list.
constexpr std::size_t kCommonWords = 10;

std::string syllable(Rng& rng) {
  std::string s;
  s.push_back(kConsonants[rng.index(kConsonants.size())]);
  s.push_back(kVowels[rng.index(kVowels.size())]);
  return s;
}

struct Lexicon {
  std::vector<std::string> background;
  std::vector<double> cumulative;  // Zipf CDF over background ranks
  std::vector<std::string> topic;

  const std::string& sample(Rng& rng) const {
    const double u = rng.uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = std::min<std::size_t>(it - cumulative.begin(), background.size() - 1);
    return background[idx];
  }
};

Lexicon build_lexicon(Rng& rng, std::size_t n_topic) {
  Lexicon lex;
  std::set<std::string> used;
  // Frequent ranks get one-syllable words, the tail gets two.
  while (lex.background.size() < kBackgroundWords) {
    std::string w = syllable(rng);
    if (lex.background.size() >= 40) w += syllable(rng);
    if (used.insert(w).second) lex.background.push_back(w);
  }
  double acc = 0.0;
  for (std::size_t r = 0; r < lex.background.size(); ++r) {
    acc += 1.0 / static_cast<double>(r + 1);
    lex.cumulative.push_back(acc);
  }
  // Topic words: consonant-vowel-consonant-vowel-consonant, five bytes.
  while (lex.topic.size() < n_topic) {
    std::string w = syllable(rng) + syllable(rng);
    w.push_back(kConsonants[rng.index(kConsonants.size())]);
    if (used.insert(w).second) lex.topic.push_back(w);
  }
  return lex;
}

// Words whose joined length lies in (target_len - 5, target_len]: sampling
// stops at the first word that would overflow.
std::vector<std::string> background_words(Rng& rng, const Lexicon& lex, std::size_t target_len) {
  std::vector<std::string> words;
  std::size_t len = 0;
  while (true) {
    const std::string& w = lex.sample(rng);
    const std::size_t next = len + (words.empty() ? 0 : 1) + w.size();
    if (next > target_len) break;
    len = next;
    words.push_back(w);
  }
  return words;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace

SyntheticSuite generate_synthetic_corpus(const SyntheticConfig& config, const Vocabulary& vocab) {
  if (config.n_queries < 1 || config.n_docs < config.n_queries) {
    throw std::invalid_argument("synthetic corpus needs n_docs >= n_queries >= 1");
  }
  if (config.min_doc_len < 32 || config.min_doc_len + 4 > config.max_doc_len) {
    throw std::invalid_argument("synthetic corpus needs 32 <= min_doc_len and min_doc_len + 4 <= max_doc_len");
  }
  Rng rng(config.seed);
  const Lexicon lex = build_lexicon(rng, config.n_queries * kTopicTerms);

  SyntheticSuite suite;
  std::vector<std::vector<std::string>> topic_terms(config.n_queries);
  for (std::size_t q = 0; q < config.n_queries; ++q) {
    std::vector<std::string> words;
    for (int t = 0; t < kTopicTerms; ++t) {
      topic_terms[q].push_back(lex.topic[q * kTopicTerms + t]);
      words.push_back(topic_terms[q].back());
    }
    words.push_back(lex.background[rng.index(kCommonWords)]);
    char qid[32];
    std::snprintf(qid, sizeof(qid), "Q%03zu", q);
    suite.queries.push_back(make_query(qid, join(words), vocab));
  }

  // Relevant slots: grade 3 for every query first, then grade 2, then 1.
  struct Slot {
    std::size_t query;
    int grade;
  };
  std::vector<Slot> slots;
  for (int grade = kTopicTerms; grade >= 1; --grade) {
    for (std::size_t q = 0; q < config.n_queries; ++q) {
      if (slots.size() < config.n_docs) slots.push_back({q, grade});
    }
  }
  std::vector<std::size_t> order(config.n_docs);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<const Slot*> assignment(config.n_docs, nullptr);
  for (std::size_t s = 0; s < slots.size(); ++s) assignment[order[s]] = &slots[s];

  for (std::size_t d = 0; d < config.n_docs; ++d) {
    const auto target = static_cast<std::size_t>(
        rng.range(static_cast<std::int64_t>(config.min_doc_len + 4),
                  static_cast<std::int64_t>(config.max_doc_len)));
    const Slot* slot = assignment[d];
    // Each planted term adds its five bytes and a separator.
    const std::size_t planted_bytes = slot ? 6 * static_cast<std::size_t>(slot->grade) : 0;
    std::vector<std::string> words = background_words(rng, lex, target - planted_bytes);
    char did[32];
    std::snprintf(did, sizeof(did), "D%04zu", d);
    if (slot) {
      std::vector<std::string> terms = topic_terms[slot->query];
      rng.shuffle(terms);
      terms.resize(static_cast<std::size_t>(slot->grade));
      // Insertion points among the words that start inside the plant window.
      std::size_t eligible = 0, offset = 0;
      while (eligible < words.size() && offset + 6 * terms.size() < kPlantWindow) {
        offset += words[eligible].size() + 1;
        ++eligible;
      }
      for (const auto& t : terms) {
        const auto pos = static_cast<std::ptrdiff_t>(rng.index(std::max<std::size_t>(eligible, 1)));
        words.insert(words.begin() + pos, t);
      }
      const std::string& qid = suite.queries[slot->query].query_id;
      suite.qrels.set(qid, did, slot->grade);
      suite.planted[qid][did] = static_cast<double>(terms.size());
    }
    suite.docs.push_back(make_document(did, join(words), vocab));
  }
  return suite;
}

std::string synthetic_text_of_length(Rng& rng, std::size_t length) {
  static const Lexicon lex = [] {
    Rng lex_rng(0x5eed);
    return build_lexicon(lex_rng, 0);
  }();
  std::string text = join(background_words(rng, lex, length));
  text.resize(length);
  if (!text.empty() && text.back() == ' ') text.back() = 'a';
  return text;
}

PlantedSignal load_planted(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  PlantedSignal planted;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string qid, did;
    double strength = 0.0;
    if (!(ss >> qid >> did >> strength)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'qid docid strength'");
    }
    planted[qid][did] = strength;
  }
  return planted;
}

void write_planted(const PlantedSignal& planted, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& [qid, docs] : planted) {
    for (const auto& [did, s] : docs) out << qid << ' ' << did << ' ' << format_score(s) << '\n';
  }
}

}  // namespace rrk
