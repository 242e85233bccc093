#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tap/errors.hpp"
#include "tap/sentiment.hpp"

namespace tap::classifier {

class ClassifierError : public Error {
 public:
  explicit ClassifierError(const std::string& msg) : Error("classifier", msg) {}
};

struct EmptyClass : ClassifierError {
  using ClassifierError::ClassifierError;
};
struct DegenerateVocabulary : ClassifierError {
  using ClassifierError::ClassifierError;
};
struct EmptyTestSet : ClassifierError {
  using ClassifierError::ClassifierError;
};
struct ModelIoError : ClassifierError {
  using ClassifierError::ClassifierError;
};

struct LabeledDoc {
  std::string text;
  Sentiment label = Sentiment::Positive;
};

// Deterministic tweet tokenizer. Splits on whitespace, lowercases, strips
// leading/trailing punctuation, then drops URL tokens (http://, https://,
// www. prefixes), numeric/date/time tokens (digits with optional : / - . ,
// separators), punctuation-only tokens, and stopwords.
class TokenPipeline {
 public:
  // Uses the built-in english stopword list.
  TokenPipeline();
  explicit TokenPipeline(std::unordered_set<std::string> stopwords);
  static TokenPipeline from_stopword_file(const std::filesystem::path& path);

  std::vector<std::string> preprocess(std::string_view text) const;

  const std::unordered_set<std::string>& stopwords() const { return stopwords_; }

 private:
  std::unordered_set<std::string> stopwords_;
};

constexpr size_t kNumClasses = 2;

inline size_t class_index(Sentiment s) { return s == Sentiment::Positive ? 1 : 0; }
inline Sentiment class_at(size_t i) { return i == 1 ? Sentiment::Positive : Sentiment::Negative; }

// Multinomial Naive Bayes with additive (Laplace) smoothing over term
// frequencies. Immutable once trained; safe to share across threads.
class NaiveBayesModel {
 public:
  double alpha() const { return alpha_; }
  size_t vocabulary_size() const { return vocab_.size(); }
  uint64_t class_doc_count(Sentiment c) const { return doc_counts_[class_index(c)]; }
  double class_log_prior(Sentiment c) const { return log_prior_[class_index(c)]; }

  std::optional<uint32_t> token_index(std::string_view token) const;
  // ln P(token | class); requires a token present in the vocabulary.
  double token_log_likelihood(Sentiment c, std::string_view token) const;

  // score(c) = log prior + sum of log likelihoods over in-vocabulary tokens;
  // out-of-vocabulary tokens are skipped. Ties resolve to Positive.
  std::pair<Sentiment, std::array<double, kNumClasses>> predict(
      const std::vector<std::string>& tokens) const;

  void save(const std::filesystem::path& path) const;
  static NaiveBayesModel load(const std::filesystem::path& path);

  friend NaiveBayesModel train(const std::vector<LabeledDoc>& corpus, double alpha,
                               const TokenPipeline& pipeline);

 private:
  double alpha_ = 1.0;
  std::unordered_map<std::string, uint32_t> vocab_;
  std::array<double, kNumClasses> log_prior_{};
  std::array<std::vector<double>, kNumClasses> log_likelihood_;
  std::array<uint64_t, kNumClasses> doc_counts_{};

  void check_invariants() const;
};

NaiveBayesModel train(const std::vector<LabeledDoc>& corpus, double alpha,
                      const TokenPipeline& pipeline);

double evaluate(const NaiveBayesModel& model, const std::vector<LabeledDoc>& test,
                const TokenPipeline& pipeline);

}  // namespace tap::classifier
