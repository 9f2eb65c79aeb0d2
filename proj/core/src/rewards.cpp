#include "dualnlu/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "dualnlu/eval.hpp"

namespace dualnlu::rewards {

void Weights::validate() const {
  for (double w : {alpha, beta, gamma, omega, lambda, delta})
    if (w < 0.0 || w > 1.0) throw ConfigError("reward weights must lie in [0,1]");
}

int edit_distance(const Tokens& a, const Tokens& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double slot_value_score(const std::string& slot, const Tokens& value, const LexiconDB& db) {
  if (value.empty()) throw DataError("slot_value_score: empty value");
  auto it = db.find(slot);
  if (it == db.end() || it->second.empty()) return 0.0;
  double best = 0.0;
  for (const auto& entry : it->second) {
    double raw = 1.0 - static_cast<double>(edit_distance(entry, value)) /
                           static_cast<double>(value.size());
    best = std::max(best, raw);  // clamps negatives along the way
  }
  return best;
}

double semantic_validity(const SemanticForm& form, const LexiconDB& db,
                         const CoOccurrenceMatrix& com, double lambda) {
  double r_sv = 1.0, r_si = 1.0;
  if (!form.pairs.empty()) {
    double sv = 0.0, si = 0.0;
    for (const auto& p : form.pairs) {
      sv += slot_value_score(p.slot, p.value, db);
      si += com(form.intent, p.slot);
    }
    r_sv = sv / static_cast<double>(form.pairs.size());
    r_si = si / static_cast<double>(form.pairs.size());
  }
  return lambda * r_sv + (1.0 - lambda) * r_si;
}

double slot_accuracy(const DelexicalizedForm& generated, const SemanticForm& form) {
  std::map<std::string, int> want, got;
  for (const auto& p : form.pairs) want[p.slot]++;
  for (const auto& t : generated)
    if (t.is_slot) got[t.text]++;

  int p = 0, q = 0;
  for (const auto& [slot, n] : want) {
    auto it = got.find(slot);
    int have = it == got.end() ? 0 : it->second;
    p += std::max(0, n - have);
  }
  for (const auto& [slot, n] : got) {
    auto it = want.find(slot);
    int need = it == want.end() ? 0 : it->second;
    q += std::max(0, n - need);
  }

  const int m = static_cast<int>(form.pairs.size());
  if (m == 0) return q == 0 ? 1.0 : 0.0;
  return 1.0 - static_cast<double>(p + q) / static_cast<double>(m);
}

double sentence_validity(const DelexicalizedForm& generated, const SemanticForm& form,
                         const lm::Model& lm, const Tokens& relexicalized, double gamma) {
  double fluency = relexicalized.empty() ? lm.empty_sentence_logprob()
                                         : lm.normalized_logprob(relexicalized);
  return gamma * slot_accuracy(generated, form) + (1.0 - gamma) * fluency;
}

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const Tokens& s, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(s.size()) >= n)
    for (size_t i = 0; i + n <= s.size(); ++i)
      counts[std::vector<std::string>(s.begin() + i, s.begin() + i + n)]++;
  return counts;
}

}  // namespace

double bleu(const Tokens& reference, const Tokens& hypothesis) {
  if (reference.empty() || hypothesis.empty()) return 0.0;

  double log_prec = 0.0;
  for (int n = 1; n <= 4; ++n) {
    auto ref = ngram_counts(reference, n);
    auto hyp = ngram_counts(hypothesis, n);
    int total = 0, matched = 0;
    for (const auto& [gram, count] : hyp) {
      total += count;
      auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(count, it->second);
    }
    if (n == 1) {
      if (matched == 0) return 0.0;
      log_prec += std::log(static_cast<double>(matched) / total);
    } else {
      log_prec += std::log((matched + 1.0) / (total + 1.0));
    }
  }

  double bp = hypothesis.size() >= reference.size()
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(reference.size()) /
                                       static_cast<double>(hypothesis.size()));
  return bp * std::exp(log_prec / 4.0);
}

double semantic_reconstruction(const SemanticForm& y, const SemanticForm& y_prime, double omega) {
  double intent = y.intent == y_prime.intent ? 1.0 : 0.0;
  return omega * intent + (1.0 - omega) * eval::pair_f1(y, y_prime);
}

}  // namespace dualnlu::rewards
