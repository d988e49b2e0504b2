#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace relkit {

struct TextFeatures {
  std::size_t word_count = 0;
  bool has_temporal_preposition = false;
  double flesch_reading_ease = 0.0;
  std::size_t sentence_count = 0;
  std::size_t syllable_count = 0;
};

// Whitespace-delimited tokens. Throws DataError for empty/blank text.
std::size_t word_count(std::string_view text);
std::vector<std::string> words(std::string_view text);

// True when "before", "after", "then" or the phrase "followed by" occurs as
// whole lowercased words; surrounding punctuation is ignored.
bool has_temporal_preposition(std::string_view text);

// Vowel groups (a e i o u y), minus one for a trailing silent 'e' unless that
// would reach zero; at least 1 per word, including tokens without letters.
std::size_t syllables_in_word(std::string_view word);

// Runs of '.', '!' or '?' count as one boundary; minimum 1.
std::size_t sentence_count(std::string_view text);

double flesch_reading_ease(std::size_t words, std::size_t sentences, std::size_t syllables);
double flesch_reading_ease(std::string_view text);

TextFeatures compute_text_features(std::string_view text);

}  // namespace relkit
