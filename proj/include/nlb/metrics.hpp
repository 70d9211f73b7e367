#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nlb/poison_set.hpp"

namespace nlb {

/// Per-sample class ids in [0, num_classes).
struct LabelVector {
  std::vector<std::uint32_t> values;
  std::size_t num_classes = 0;

  /// num_classes defaults to max(values) + 1.
  static LabelVector from_values(std::vector<std::uint32_t> values,
                                 std::optional<std::size_t> num_classes = std::nullopt);
};

/// One class id per line.
LabelVector load_labels(const std::filesystem::path& path);
void save_labels(const LabelVector& labels, const std::filesystem::path& path);

enum class MetricKind { kCcr, kAsr, kAccuracy };

std::string to_string(MetricKind kind);

struct EvalReport {
  MetricKind metric = MetricKind::kCcr;
  double value = 0.0;
  // nullopt marks a class excluded from the max (ASR with zero denominator).
  std::vector<std::optional<double>> per_class;
  std::optional<std::size_t> argmax_class;
  std::vector<std::string> warnings;
};

/// CCR_c = |{i in P : y_i = c}| / |P|; CCR = max_c, ties to the smaller c.
EvalReport ccr(const LabelVector& labels, const PoisonSet& p);

/// ASR_c = |{y_i != c and f_i = c}| / |{y_i != c}|; ASR = max_c over the
/// classes with a non-zero denominator.
EvalReport asr(const LabelVector& true_labels, const LabelVector& predicted);

double accuracy(const LabelVector& true_labels, const LabelVector& predicted);

/// True when both reports name the same maximizing class.
bool argmax_agrees(const EvalReport& a, const EvalReport& b);

}  // namespace nlb
