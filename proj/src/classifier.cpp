#include "tap/classifier.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tap/stopwords_data.hpp"

namespace tap::classifier {

namespace {

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_url(std::string_view t) {
  return t.starts_with("http://") || t.starts_with("https://") || t.starts_with("www.");
}

// Digits with optional : / - . , separators cover plain numbers, dates and
// times. Requires at least one digit.
bool is_number_like(std::string_view t) {
  bool digit = false;
  for (char c : t) {
    if (c >= '0' && c <= '9') {
      digit = true;
    } else if (c != ':' && c != '/' && c != '-' && c != '.' && c != ',') {
      return false;
    }
  }
  return digit;
}

std::string_view strip_punct(std::string_view t) {
  size_t b = 0, e = t.size();
  while (b < e && is_ascii_punct(t[b])) ++b;
  while (e > b && is_ascii_punct(t[e - 1])) --e;
  return t.substr(b, e - b);
}

}  // namespace

TokenPipeline::TokenPipeline() {
  for (const char* w : detail::kDefaultStopwords) stopwords_.insert(w);
}

TokenPipeline::TokenPipeline(std::unordered_set<std::string> stopwords)
    : stopwords_(std::move(stopwords)) {}

TokenPipeline TokenPipeline::from_stopword_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ClassifierError("cannot open stopword file: " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.insert(lowercase(line));
  }
  return TokenPipeline(std::move(words));
}

std::vector<std::string> TokenPipeline::preprocess(std::string_view text) const {
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) continue;

    std::string token = lowercase(text.substr(start, i - start));
    std::string_view core = strip_punct(token);
    if (core.empty()) continue;
    if (is_url(core)) continue;
    if (is_number_like(core)) continue;
    if (stopwords_.contains(std::string(core))) continue;
    out.emplace_back(core);
  }
  return out;
}

NaiveBayesModel train(const std::vector<LabeledDoc>& corpus, double alpha,
                      const TokenPipeline& pipeline) {
  if (alpha <= 0) throw ClassifierError("alpha must be > 0");

  std::array<uint64_t, kNumClasses> doc_counts{};
  // token -> per-class term frequency; ordered map keeps vocabulary indexing
  // (and therefore saved models) deterministic.
  std::map<std::string, std::array<uint64_t, kNumClasses>> counts;
  std::array<uint64_t, kNumClasses> total_terms{};

  for (const auto& doc : corpus) {
    const size_t c = class_index(doc.label);
    ++doc_counts[c];
    for (auto& token : pipeline.preprocess(doc.text)) {
      ++counts[std::move(token)][c];
      ++total_terms[c];
    }
  }

  for (size_t c = 0; c < kNumClasses; ++c) {
    if (doc_counts[c] == 0)
      throw EmptyClass(std::string("no training docs for class ") + to_string(class_at(c)));
  }
  if (counts.empty()) throw DegenerateVocabulary("vocabulary empty after preprocessing");

  NaiveBayesModel model;
  model.alpha_ = alpha;
  model.doc_counts_ = doc_counts;

  const double total_docs = static_cast<double>(doc_counts[0] + doc_counts[1]);
  for (size_t c = 0; c < kNumClasses; ++c)
    model.log_prior_[c] = std::log(static_cast<double>(doc_counts[c]) / total_docs);

  const auto vocab_size = static_cast<double>(counts.size());
  for (size_t c = 0; c < kNumClasses; ++c) {
    model.log_likelihood_[c].reserve(counts.size());
    const double denom = static_cast<double>(total_terms[c]) + alpha * vocab_size;
    uint32_t index = 0;
    for (const auto& [token, per_class] : counts) {
      if (c == 0) model.vocab_.emplace(token, index);
      model.log_likelihood_[c].push_back(
          std::log((static_cast<double>(per_class[c]) + alpha) / denom));
      ++index;
    }
  }

  model.check_invariants();
  return model;
}

std::optional<uint32_t> NaiveBayesModel::token_index(std::string_view token) const {
  auto it = vocab_.find(std::string(token));
  if (it == vocab_.end()) return std::nullopt;
  return it->second;
}

double NaiveBayesModel::token_log_likelihood(Sentiment c, std::string_view token) const {
  auto idx = token_index(token);
  if (!idx) throw ClassifierError("token not in vocabulary: " + std::string(token));
  return log_likelihood_[class_index(c)][*idx];
}

std::pair<Sentiment, std::array<double, kNumClasses>> NaiveBayesModel::predict(
    const std::vector<std::string>& tokens) const {
  std::array<double, kNumClasses> scores = log_prior_;
  for (const auto& token : tokens) {
    if (auto idx = token_index(token)) {
      for (size_t c = 0; c < kNumClasses; ++c) scores[c] += log_likelihood_[c][*idx];
    }
  }
  const size_t pos = class_index(Sentiment::Positive);
  const size_t neg = class_index(Sentiment::Negative);
  const Sentiment winner =
      scores[pos] >= scores[neg] ? Sentiment::Positive : Sentiment::Negative;
  return {winner, scores};
}

void NaiveBayesModel::check_invariants() const {
  double prior_sum = 0;
  for (double lp : log_prior_) {
    if (!std::isfinite(lp)) throw ClassifierError("non-finite class prior");
    prior_sum += std::exp(lp);
  }
  if (std::abs(prior_sum - 1.0) > 1e-12)
    throw ClassifierError("class priors do not sum to 1");

  for (size_t c = 0; c < kNumClasses; ++c) {
    if (log_likelihood_[c].size() != vocab_.size())
      throw ClassifierError("likelihood table size mismatch");
    double sum = 0;
    for (double ll : log_likelihood_[c]) {
      if (!std::isfinite(ll)) throw ClassifierError("non-finite token likelihood");
      sum += std::exp(ll);
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ClassifierError("likelihood distribution does not sum to 1");
  }
}

double evaluate(const NaiveBayesModel& model, const std::vector<LabeledDoc>& test,
                const TokenPipeline& pipeline) {
  if (test.empty()) throw EmptyTestSet("evaluate requires a non-empty test set");
  size_t correct = 0;
  for (const auto& doc : test) {
    auto [predicted, scores] = model.predict(pipeline.preprocess(doc.text));
    if (predicted == doc.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

void NaiveBayesModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ModelIoError("cannot open model file for writing: " + path.string());

  // Tokens sorted by index == lexicographic order from training, so repeated
  // saves of the same model are byte-identical.
  std::vector<const std::string*> tokens(vocab_.size());
  for (const auto& [token, idx] : vocab_) tokens[idx] = &token;

  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };

  out << "tap-nb 1\n";
  out << "alpha " << fmt(alpha_) << "\n";
  out << "docs " << doc_counts_[0] << " " << doc_counts_[1] << "\n";
  out << "prior " << fmt(log_prior_[0]) << " " << fmt(log_prior_[1]) << "\n";
  out << "vocab " << vocab_.size() << "\n";
  for (size_t i = 0; i < tokens.size(); ++i)
    out << *tokens[i] << " " << fmt(log_likelihood_[0][i]) << " " << fmt(log_likelihood_[1][i])
        << "\n";
  out.flush();
  if (!out) throw ModelIoError("failed writing model file: " + path.string());
}

NaiveBayesModel NaiveBayesModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelIoError("cannot open model file: " + path.string());

  NaiveBayesModel model;
  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != "tap-nb" || version != 1)
    throw ModelIoError("unrecognized model format in " + path.string());
  in >> word >> model.alpha_;
  if (word != "alpha") throw ModelIoError("malformed model file (alpha)");
  in >> word >> model.doc_counts_[0] >> model.doc_counts_[1];
  if (word != "docs") throw ModelIoError("malformed model file (docs)");
  in >> word >> model.log_prior_[0] >> model.log_prior_[1];
  if (word != "prior") throw ModelIoError("malformed model file (prior)");
  size_t vocab_size = 0;
  in >> word >> vocab_size;
  if (word != "vocab") throw ModelIoError("malformed model file (vocab)");

  model.log_likelihood_[0].reserve(vocab_size);
  model.log_likelihood_[1].reserve(vocab_size);
  for (size_t i = 0; i < vocab_size; ++i) {
    std::string token;
    double ll_neg = 0, ll_pos = 0;
    if (!(in >> token >> ll_neg >> ll_pos))
      throw ModelIoError("truncated model file: " + path.string());
    model.vocab_.emplace(std::move(token), static_cast<uint32_t>(i));
    model.log_likelihood_[0].push_back(ll_neg);
    model.log_likelihood_[1].push_back(ll_pos);
  }

  model.check_invariants();
  return model;
}

}  // namespace tap::classifier
