#include <algorithm>

#include "json.hpp"
#include "shotfuse/train.hpp"

namespace shotfuse {

Metrics metrics_from_confusion(const ConfusionMatrix& c) {
  Metrics m;
  const auto total = c.total();
  m.accuracy = total ? static_cast<double>(c.tp + c.tn) / static_cast<double>(total) : 0.0;
  if (c.tp + c.fp) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  else m.precision_defined = false;
  if (c.tp + c.fn) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  else m.recall_defined = false;
  return m;
}

ConfusionMatrix confusion_from_predictions(const std::vector<Prediction>& predictions) {
  ConfusionMatrix c;
  for (const auto& p : predictions) {
    const bool positive = p.predicted == kIntoxicated;
    const bool actual = p.label == kIntoxicated;
    if (positive && actual) ++c.tp;
    else if (positive) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

nlohmann::ordered_json history_json(const TrainHistory& h) {
  nlohmann::ordered_json j;
  j["train_loss"] = h.train_loss;
  j["train_accuracy"] = h.train_accuracy;
  j["val_loss"] = h.val_loss;
  j["val_accuracy"] = h.val_accuracy;
  return j;
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["precision_defined"] = m.precision_defined;
  j["recall_defined"] = m.recall_defined;
  return j;
}

}  // namespace

std::string report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["split"] = r.split;
  j["samples"] = r.predictions.size();
  const auto mj = metrics_json(r.metrics);
  for (auto it = mj.begin(); it != mj.end(); ++it) j[it.key()] = it.value();
  j["loss"] = r.loss;
  j["confusion"] = {{"tp", r.confusion.tp}, {"tn", r.confusion.tn}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}};
  j["mean_alpha"] = r.mean_alpha ? nlohmann::ordered_json(*r.mean_alpha) : nlohmann::ordered_json(nullptr);
  j["history"] = history_json(r.history);
  auto preds = nlohmann::ordered_json::array();
  for (const auto& p : r.predictions) {
    nlohmann::ordered_json e;
    e["sample_id"] = p.sample_id;
    e["label"] = p.label;
    e["predicted"] = p.predicted;
    e["logits"] = {p.logit_sober, p.logit_intoxicated};
    e["alpha"] = p.alpha ? nlohmann::ordered_json(*p.alpha) : nlohmann::ordered_json(nullptr);
    preds.push_back(e);
  }
  j["predictions"] = preds;
  return j.dump(2) + "\n";
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json e;
    e["variant"] = r.variant;
    e["seed"] = r.seed;
    e["accuracy"] = r.metrics.accuracy;
    e["precision"] = r.metrics.precision;
    e["recall"] = r.metrics.recall;
    e["mean_alpha"] = r.mean_alpha ? nlohmann::ordered_json(*r.mean_alpha) : nlohmann::ordered_json(nullptr);
    arr.push_back(e);
  }
  std::vector<std::string> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.variant) == order.end()) order.push_back(r.variant);
  auto medians = nlohmann::ordered_json::array();
  for (const auto& v : order) {
    std::vector<double> acc, prec, rec;
    for (const auto& r : rows)
      if (r.variant == v) {
        acc.push_back(r.metrics.accuracy);
        prec.push_back(r.metrics.precision);
        rec.push_back(r.metrics.recall);
      }
    medians.push_back({{"variant", v}, {"runs", acc.size()}, {"median_accuracy", median(acc)},
                       {"median_precision", median(prec)}, {"median_recall", median(rec)}});
  }
  nlohmann::ordered_json j;
  j["rows"] = arr;
  j["medians"] = medians;
  return j.dump(2) + "\n";
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof line, "%-18s %6s %9s %10s %7s\n", "variant", "seed", "accuracy", "precision", "recall");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-18s %6llu %9.4f %10.4f %7.4f\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.seed), r.metrics.accuracy, r.metrics.precision, r.metrics.recall);
    out += line;
  }
  std::vector<std::string> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.variant) == order.end()) order.push_back(r.variant);
  for (const auto& v : order) {
    std::vector<double> acc, prec, rec;
    for (const auto& r : rows)
      if (r.variant == v) {
        acc.push_back(r.metrics.accuracy);
        prec.push_back(r.metrics.precision);
        rec.push_back(r.metrics.recall);
      }
    std::snprintf(line, sizeof line, "%-18s %6s %9.4f %10.4f %7.4f\n", v.c_str(), "median", median(acc), median(prec),
                  median(rec));
    out += line;
  }
  return out;
}

}  // namespace shotfuse
