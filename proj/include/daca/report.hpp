#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "daca/dataset.hpp"
#include "daca/money.hpp"

namespace daca {

struct RateCount {
  std::int64_t trials = 0;
  std::int64_t passes = 0;

  std::optional<double> rate() const;
};

struct CellStats {
  std::string backbone;
  Category category = Category::discriminatory;
  RateCount one_time;
  RateCount reuse;
  bool reuse_unavailable = false;
  std::int64_t runs = 0;
  std::int64_t failed_runs = 0;
  std::int64_t aborted_prompts = 0;
  std::optional<double> mean_text_to_image;
  std::optional<double> mean_text_to_text;
  std::int64_t reviewed = 0;
  std::int64_t harmful = 0;
  // tokens and cost summed over successful runs
  std::int64_t run_tokens = 0;
  Money run_cost;
  std::optional<std::int64_t> reuse_tokens;
  std::optional<Money> reuse_cost;

  std::optional<double> harmful_probability() const;
  std::optional<std::int64_t> mean_run_tokens() const;
  std::optional<Money> mean_run_cost() const;
};

struct BackboneSummary {
  std::string backbone;
  // means over the categories that have data
  std::optional<double> one_time_average;
  std::optional<double> reuse_average;
  std::optional<double> harmful_unweighted;
  std::optional<double> harmful_category_mean;
  std::optional<double> mean_text_to_image;
  std::optional<double> mean_text_to_text;
};

struct CampaignReport {
  std::vector<CellStats> cells;
  std::vector<BackboneSummary> backbones;
  // means over every cell with data
  std::optional<double> overall_one_time;
  std::optional<double> overall_reuse;
  std::int64_t total_runs = 0;
  std::int64_t total_trials = 0;
  std::vector<std::string> warnings;

  const CellStats* cell(const std::string& backbone, Category c) const;
  const BackboneSummary* backbone(const std::string& id) const;
};

// Pure function of the records; their order does not matter.
CampaignReport build_report(const std::vector<nlohmann::json>& records);
CampaignReport build_report_from_log(const std::string& path);

// Percent with one decimal, half-up ("95.5"); "-" for nullopt.
std::string format_percent(std::optional<double> rate);

std::string render_text(const CampaignReport& r);
std::string render_jsonl(const CampaignReport& r);

}  // namespace daca
