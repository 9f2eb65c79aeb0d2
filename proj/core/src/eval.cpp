#include "dualnlu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dualnlu/corpus.hpp"

namespace dualnlu::eval {

std::vector<Chunk> extract_chunks(const Tags& tags) {
  std::vector<Chunk> chunks;
  std::string open_type;
  int open_begin = -1;
  auto close = [&](int end) {
    if (open_begin >= 0) chunks.push_back({open_type, open_begin, end});
    open_begin = -1;
    open_type.clear();
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const std::string& t = tags[i];
    if (t == "O") {
      close(i);
    } else if (t.size() > 2 && t[1] == '-' && (t[0] == 'B' || t[0] == 'I')) {
      std::string type = t.substr(2);
      bool continues = t[0] == 'I' && open_begin >= 0 && open_type == type;
      if (!continues) {
        close(i);
        open_type = type;
        open_begin = i;
      }
    } else {
      throw DataError("conll scoring: malformed tag '" + t + "'");
    }
  }
  close(static_cast<int>(tags.size()));
  return chunks;
}

Prf conll_slot_f1(const std::vector<Tags>& gold, const std::vector<Tags>& predicted) {
  if (gold.size() != predicted.size()) throw DataError("conll scoring: corpus size mismatch");
  int matched = 0, n_gold = 0, n_pred = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size())
      throw DataError("conll scoring: sequence length mismatch");
    auto g = extract_chunks(gold[i]);
    auto p = extract_chunks(predicted[i]);
    n_gold += static_cast<int>(g.size());
    n_pred += static_cast<int>(p.size());
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    std::vector<Chunk> both;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(both));
    matched += static_cast<int>(both.size());
  }
  Prf out;
  out.precision = n_pred > 0 ? static_cast<double>(matched) / n_pred : 0.0;
  out.recall = n_gold > 0 ? static_cast<double>(matched) / n_gold : 0.0;
  out.f1 = out.precision + out.recall > 0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

double intent_accuracy(const std::vector<std::string>& gold,
                       const std::vector<std::string>& predicted) {
  if (gold.size() != predicted.size()) throw DataError("intent accuracy: size mismatch");
  if (gold.empty()) throw DataError("intent accuracy: empty corpus");
  int correct = 0;
  for (size_t i = 0; i < gold.size(); ++i) correct += gold[i] == predicted[i];
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

double pair_f1(const SemanticForm& gold, const SemanticForm& predicted) {
  if (gold.pairs.empty() && predicted.pairs.empty()) return 1.0;
  std::map<std::pair<std::string, Tokens>, int> want;
  for (const auto& p : gold.pairs) want[{p.slot, p.value}]++;
  int matched = 0;
  for (const auto& p : predicted.pairs) {
    auto it = want.find({p.slot, p.value});
    if (it != want.end() && it->second > 0) {
      --it->second;
      ++matched;
    }
  }
  if (matched == 0) return 0.0;
  double precision = matched / static_cast<double>(predicted.pairs.size());
  double recall = matched / static_cast<double>(gold.pairs.size());
  return 2.0 * precision * recall / (precision + recall);
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

double corpus_bleu(const std::vector<Tokens>& references, const std::vector<Tokens>& hypotheses) {
  if (references.size() != hypotheses.size()) throw DataError("corpus bleu: size mismatch");
  if (references.empty()) throw DataError("corpus bleu: empty corpus");

  long ref_len = 0, hyp_len = 0;
  int matched[5] = {0}, total[5] = {0};
  for (size_t i = 0; i < references.size(); ++i) {
    ref_len += static_cast<long>(references[i].size());
    hyp_len += static_cast<long>(hypotheses[i].size());
    for (int n = 1; n <= 4; ++n) {
      auto ref = ngram_counts(references[i], n);
      for (const auto& [gram, count] : ngram_counts(hypotheses[i], n)) {
        total[n] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matched[n] += std::min(count, it->second);
      }
    }
  }

  if (hyp_len == 0) return 0.0;
  double log_prec = 0.0;
  for (int n = 1; n <= 4; ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_prec += std::log(static_cast<double>(matched[n]) / total[n]);
  }
  double bp = hyp_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_prec / 4.0);
}

McNemar mcnemar(const std::vector<uint8_t>& first_correct,
                const std::vector<uint8_t>& second_correct) {
  if (first_correct.size() != second_correct.size()) throw DataError("mcnemar: size mismatch");
  McNemar out;
  for (size_t i = 0; i < first_correct.size(); ++i) {
    out.b += first_correct[i] && !second_correct[i];
    out.c += !first_correct[i] && second_correct[i];
  }
  const int n = out.b + out.c;
  if (n == 0) return out;  // models disagree nowhere: statistic 0, p = 1

  double diff = std::abs(out.b - out.c) - 1.0;
  out.statistic = diff * diff / static_cast<double>(n);
  out.p_chisq = std::erfc(std::sqrt(out.statistic / 2.0));  // chi-square(1) tail

  if (n < 25) {
    // exact two-sided binomial at p = 1/2; dyadic arithmetic is exact here
    const int k = std::min(out.b, out.c);
    double tail = 0.0, coef = 1.0;  // C(n, 0)
    for (int i = 0; i <= k; ++i) {
      tail += coef;
      coef = coef * (n - i) / (i + 1.0);
    }
    out.p_value = std::min(1.0, 2.0 * tail * std::pow(0.5, n));
  } else {
    out.p_value = out.p_chisq;
  }
  out.significant = out.p_value < 0.05;
  return out;
}

size_t select_best(const std::vector<double>& avgs) {
  if (avgs.empty()) throw DataError("select_best: empty history");
  size_t best = 0;
  for (size_t i = 1; i < avgs.size(); ++i)
    if (avgs[i] > avgs[best]) best = i;
  return best;
}

Report evaluate(const nlu::Model& model, const std::vector<LabeledExample>& examples) {
  if (examples.empty()) throw DataError("evaluate: empty example list");
  std::vector<Tags> gold_tags, pred_tags;
  std::vector<std::string> gold_intents, pred_intents;
  Report r;
  for (const auto& ex : examples) {
    auto dec = model.decode_top1(ex.tokens);
    gold_tags.push_back(ex.tags);
    pred_tags.push_back(dec.tags);
    gold_intents.push_back(ex.intent);
    pred_intents.push_back(dec.form.intent);

    bool intent_ok = dec.form.intent == ex.intent;
    bool slots_ok = pair_f1(corpus::form_of(ex), dec.form) == 1.0;
    r.intent_correct.push_back(intent_ok);
    r.slots_correct.push_back(slots_ok);
    r.joint_correct.push_back(intent_ok && slots_ok);
  }
  Prf prf = conll_slot_f1(gold_tags, pred_tags);
  r.slot_precision = prf.precision;
  r.slot_recall = prf.recall;
  r.slot_f1 = prf.f1;
  r.intent_acc = intent_accuracy(gold_intents, pred_intents);
  r.avg = (r.intent_acc + r.slot_f1) / 2.0;
  return r;
}

std::string report_kv(const Report& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "intent_accuracy\t" << r.intent_acc << "\n"
     << "slot_precision\t" << r.slot_precision << "\n"
     << "slot_recall\t" << r.slot_recall << "\n"
     << "slot_f1\t" << r.slot_f1 << "\n"
     << "avg\t" << r.avg << "\n";
  if (r.corpus_bleu) os << "corpus_bleu\t" << *r.corpus_bleu << "\n";
  return os.str();
}

std::string report_table(const Report& r) {
  std::ostringstream os;
  os.precision(2);
  os << std::fixed;
  os << "metric            value\n"
     << "intent accuracy   " << 100 * r.intent_acc << "\n"
     << "slot precision    " << 100 * r.slot_precision << "\n"
     << "slot recall       " << 100 * r.slot_recall << "\n"
     << "slot f1           " << 100 * r.slot_f1 << "\n"
     << "avg               " << 100 * r.avg << "\n";
  if (r.corpus_bleu) os << "corpus bleu       " << 100 * *r.corpus_bleu << "\n";
  return os.str();
}

void save_correctness(const std::string& path, const Report& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (size_t i = 0; i < r.intent_correct.size(); ++i)
    out << int(r.intent_correct[i]) << "\t" << int(r.slots_correct[i]) << "\t"
        << int(r.joint_correct[i]) << "\n";
}

Correctness load_correctness(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  Correctness c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    int a, b, j;
    if (!(is >> a >> b >> j) || a < 0 || a > 1 || b < 0 || b > 1 || j < 0 || j > 1)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected three 0/1 flags");
    c.intent.push_back(static_cast<uint8_t>(a));
    c.slots.push_back(static_cast<uint8_t>(b));
    c.joint.push_back(static_cast<uint8_t>(j));
  }
  return c;
}

}  // namespace dualnlu::eval
