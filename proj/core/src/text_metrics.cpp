#include "relkit/text_metrics.hpp"

#include <algorithm>
#include <cctype>

#include "relkit/error.hpp"

namespace relkit {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_vowel(char c) {
  switch (c) {
    case 'a': case 'e': case 'i': case 'o': case 'u': case 'y': return true;
    default: return false;
  }
}

// Lowercased token with leading/trailing non-alphanumerics removed.
std::string normalize_token(std::string_view tok) {
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  auto b = std::find_if(tok.begin(), tok.end(), alnum);
  auto e = std::find_if(tok.rbegin(), tok.rend(), alnum).base();
  std::string out;
  if (b >= e) return out;
  for (auto it = b; it != e; ++it) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(*it))));
  return out;
}

}  // namespace

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t word_count(std::string_view text) {
  auto n = words(text).size();
  if (n == 0) throw DataError("empty text");
  return n;
}

bool has_temporal_preposition(std::string_view text) {
  std::vector<std::string> toks;
  for (const auto& w : words(text)) toks.push_back(normalize_token(w));
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t == "before" || t == "after" || t == "then") return true;
    if (t == "followed" && i + 1 < toks.size() && toks[i + 1] == "by") return true;
  }
  return false;
}

std::size_t syllables_in_word(std::string_view word) {
  std::string w;
  for (char c : word) {
    if (is_alpha(c)) w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (w.empty()) return 1;
  std::size_t groups = 0;
  bool in_group = false;
  for (char c : w) {
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  if (w.back() == 'e' && groups > 1) --groups;
  return std::max<std::size_t>(groups, 1);
}

std::size_t sentence_count(std::string_view text) {
  std::size_t n = 0;
  bool in_run = false;
  for (char c : text) {
    const bool term = c == '.' || c == '!' || c == '?';
    if (term && !in_run) ++n;
    in_run = term;
  }
  return std::max<std::size_t>(n, 1);
}

double flesch_reading_ease(std::size_t words, std::size_t sentences, std::size_t syllables) {
  if (words == 0 || sentences == 0) throw DataError("Flesch score needs at least one word");
  const double w = static_cast<double>(words);
  return 206.835 - 1.015 * (w / static_cast<double>(sentences)) -
         84.6 * (static_cast<double>(syllables) / w);
}

TextFeatures compute_text_features(std::string_view text) {
  TextFeatures f;
  const auto toks = words(text);
  if (toks.empty()) throw DataError("empty text");
  f.word_count = toks.size();
  f.has_temporal_preposition = has_temporal_preposition(text);
  f.sentence_count = sentence_count(text);
  for (const auto& t : toks) f.syllable_count += syllables_in_word(t);
  f.flesch_reading_ease = flesch_reading_ease(f.word_count, f.sentence_count, f.syllable_count);
  return f;
}

double flesch_reading_ease(std::string_view text) {
  return compute_text_features(text).flesch_reading_ease;
}

}  // namespace relkit
