#include "nlb/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "nlb/error.hpp"

namespace nlb {
namespace {

std::size_t class_count(const LabelVector& a, const LabelVector& b) {
  return std::max(a.num_classes, b.num_classes);
}

void require_same_length(const LabelVector& a, const LabelVector& b) {
  if (a.values.size() != b.values.size()) {
    throw InvalidArgument("label length mismatch: " + std::to_string(a.values.size()) + " vs " +
                          std::to_string(b.values.size()));
  }
}

}  // namespace

LabelVector LabelVector::from_values(std::vector<std::uint32_t> values,
                                     std::optional<std::size_t> num_classes) {
  LabelVector out;
  const std::size_t inferred =
      values.empty() ? 0 : static_cast<std::size_t>(*std::max_element(values.begin(), values.end())) + 1;
  out.num_classes = num_classes.value_or(inferred);
  if (out.num_classes < inferred) {
    throw InvalidArgument("label " + std::to_string(inferred - 1) + " outside [0, " +
                          std::to_string(out.num_classes) + ")");
  }
  out.values = std::move(values);
  return out;
}

LabelVector load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint32_t> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::uint32_t v = 0;
    auto [end, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || end != line.data() + line.size()) {
      throw ParseError(path.string() + ": bad label '" + line + "' at line " +
                       std::to_string(line_no));
    }
    values.push_back(v);
  }
  return LabelVector::from_values(std::move(values));
}

void save_labels(const LabelVector& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto v : labels.values) out << v << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kCcr:
      return "ccr";
    case MetricKind::kAsr:
      return "asr";
    case MetricKind::kAccuracy:
      return "accuracy";
  }
  return "unknown";
}

EvalReport ccr(const LabelVector& labels, const PoisonSet& p) {
  if (p.indices.empty()) throw InvalidArgument("ccr: poison set is empty");
  std::vector<std::size_t> counts(labels.num_classes, 0);
  for (const std::size_t idx : p.indices) {
    if (idx >= labels.values.size()) {
      throw InvalidArgument("ccr: poison index " + std::to_string(idx) +
                            " out of range for " + std::to_string(labels.values.size()) +
                            " labels");
    }
    ++counts[labels.values[idx]];
  }
  EvalReport r;
  r.metric = MetricKind::kCcr;
  const double size = static_cast<double>(p.indices.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double v = static_cast<double>(counts[c]) / size;
    r.per_class.push_back(v);
    if (!r.argmax_class || v > r.value) {
      r.value = v;
      r.argmax_class = c;
    }
  }
  return r;
}

EvalReport asr(const LabelVector& true_labels, const LabelVector& predicted) {
  require_same_length(true_labels, predicted);
  const std::size_t classes = class_count(true_labels, predicted);
  if (classes < 2) throw InvalidArgument("asr requires at least 2 classes");

  std::vector<std::size_t> hits(classes, 0);
  std::vector<std::size_t> others(classes, 0);
  const std::size_t n = true_labels.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = true_labels.values[i];
    const auto f = predicted.values[i];
    if (f != y) ++hits[f];
  }
  std::vector<std::size_t> per_class_count(classes, 0);
  for (const auto y : true_labels.values) ++per_class_count[y];
  for (std::size_t c = 0; c < classes; ++c) others[c] = n - per_class_count[c];

  EvalReport r;
  r.metric = MetricKind::kAsr;
  for (std::size_t c = 0; c < classes; ++c) {
    if (others[c] == 0) {
      r.per_class.push_back(std::nullopt);
      r.warnings.push_back("class " + std::to_string(c) +
                           " covers every true label; ASR_c undefined and skipped");
      continue;
    }
    const double v = static_cast<double>(hits[c]) / static_cast<double>(others[c]);
    r.per_class.push_back(v);
    if (!r.argmax_class || v > r.value) {
      r.value = v;
      r.argmax_class = c;
    }
  }
  return r;
}

double accuracy(const LabelVector& true_labels, const LabelVector& predicted) {
  require_same_length(true_labels, predicted);
  if (true_labels.values.empty()) throw InvalidArgument("accuracy of an empty label vector");
  std::size_t match = 0;
  for (std::size_t i = 0; i < true_labels.values.size(); ++i) {
    if (true_labels.values[i] == predicted.values[i]) ++match;
  }
  return static_cast<double>(match) / static_cast<double>(true_labels.values.size());
}

bool argmax_agrees(const EvalReport& a, const EvalReport& b) {
  return a.argmax_class.has_value() && a.argmax_class == b.argmax_class;
}

}  // namespace nlb
