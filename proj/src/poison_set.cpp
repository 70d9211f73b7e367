#include "nlb/poison_set.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "nlb/error.hpp"

namespace nlb {
namespace {

constexpr std::array<std::pair<SelectionMethod, std::string_view>, 7> kMethodNames = {{
    {SelectionMethod::kRandom, "random"},
    {SelectionMethod::kClustering, "clustering"},
    {SelectionMethod::kContrastive, "contrastive"},
    {SelectionMethod::kPositiveOnly, "positive_only"},
    {SelectionMethod::kNegativeOnly, "negative_only"},
    {SelectionMethod::kInfoNce, "infonce"},
    {SelectionMethod::kOracle, "oracle"},
}};

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string_view to_string(SelectionMethod method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "unknown";
}

SelectionMethod parse_selection_method(std::string_view name) {
  for (const auto& [m, n] : kMethodNames) {
    if (n == name) return m;
  }
  throw InvalidArgument("unknown selection method '" + std::string(name) + "'");
}

void PoisonSet::validate(std::size_t n) const {
  if (indices.size() != budget_m) {
    throw InvalidArgument("poison set has " + std::to_string(indices.size()) +
                          " indices but budget " + std::to_string(budget_m));
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= n) {
      throw InvalidArgument("poison index " + std::to_string(indices[i]) +
                            " out of range for n=" + std::to_string(n));
    }
    if (i > 0 && indices[i] <= indices[i - 1]) {
      throw InvalidArgument("poison indices must be strictly increasing");
    }
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_poison_set(const PoisonSet& p, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const std::size_t idx : p.indices) out << idx << '\n';
    if (!out) throw IoError("write failed: " + path.string());
  }
  nlohmann::json side = {
      {"method", std::string(to_string(p.method))},
      {"budget_m", p.budget_m},
      {"seed", optional_json(p.seed)},
      {"anchor", optional_json(p.anchor)},
      {"k", optional_json(p.k)},
      {"cluster_id", optional_json(p.cluster_id)},
  };
  const auto side_path = sidecar_path(path);
  std::ofstream out(side_path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + side_path.string());
  out << side.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + side_path.string());
}

PoisonSet load_poison_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PoisonSet p;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t v = 0;
    auto [end, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || end != line.data() + line.size()) {
      throw ParseError(path.string() + ": bad index '" + line + "' at line " +
                       std::to_string(line_no));
    }
    p.indices.push_back(v);
  }
  std::sort(p.indices.begin(), p.indices.end());
  p.indices.erase(std::unique(p.indices.begin(), p.indices.end()), p.indices.end());
  p.budget_m = p.indices.size();

  const auto side_path = sidecar_path(path);
  if (std::filesystem::exists(side_path)) {
    std::ifstream side_in(side_path);
    nlohmann::json side;
    try {
      side = nlohmann::json::parse(side_in);
      p.method = parse_selection_method(side.at("method").get<std::string>());
      p.budget_m = side.at("budget_m").get<std::size_t>();
      if (!side.value("seed", nlohmann::json()).is_null()) p.seed = side["seed"].get<std::uint64_t>();
      if (!side.value("anchor", nlohmann::json()).is_null()) p.anchor = side["anchor"].get<std::size_t>();
      if (!side.value("k", nlohmann::json()).is_null()) p.k = side["k"].get<std::size_t>();
      if (!side.value("cluster_id", nlohmann::json()).is_null()) {
        p.cluster_id = side["cluster_id"].get<std::size_t>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(side_path.string() + ": " + e.what());
    }
  }
  return p;
}

}  // namespace nlb
