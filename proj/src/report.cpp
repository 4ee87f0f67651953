#include "daca/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "daca/error.hpp"
#include "daca/metrics.hpp"
#include "daca/result_log.hpp"

namespace daca {

namespace {

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Mean of the values in key order so the result does not depend on the order
// records were written in.
std::optional<double> keyed_mean(const std::map<std::string, double>& m) {
  std::vector<double> xs;
  for (const auto& [k, v] : m) xs.push_back(v);
  return mean_of(xs);
}

void collect(std::vector<double>& xs, const std::optional<double>& v) {
  if (v) xs.push_back(*v);
}

struct CellAcc {
  CellStats stats;
  std::map<std::string, double> t2i;
  std::map<std::string, double> t2t;
  std::set<std::string> aborted;
};

std::string str_or(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

std::optional<double> num_opt(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

std::optional<double> RateCount::rate() const {
  if (trials == 0) return std::nullopt;
  return static_cast<double>(passes) / static_cast<double>(trials);
}

std::optional<double> CellStats::harmful_probability() const {
  if (reviewed == 0) return std::nullopt;
  return static_cast<double>(harmful) / static_cast<double>(reviewed);
}

std::optional<std::int64_t> CellStats::mean_run_tokens() const {
  const std::int64_t ok = runs - failed_runs;
  if (ok <= 0) return std::nullopt;
  return (run_tokens * 2 + ok) / (2 * ok);
}

std::optional<Money> CellStats::mean_run_cost() const {
  const std::int64_t ok = runs - failed_runs;
  if (ok <= 0) return std::nullopt;
  return Money::from_units((run_cost.units() * 2 + ok) / (2 * ok));
}

const CellStats* CampaignReport::cell(const std::string& backbone, Category c) const {
  for (const auto& s : cells) {
    if (s.backbone == backbone && s.category == c) return &s;
  }
  return nullptr;
}

const BackboneSummary* CampaignReport::backbone(const std::string& id) const {
  for (const auto& b : backbones) {
    if (b.backbone == id) return &b;
  }
  return nullptr;
}

CampaignReport build_report(const std::vector<nlohmann::json>& records) {
  CampaignReport rep;
  std::vector<std::string> order;
  std::set<std::string> listed;
  std::map<std::pair<std::string, Category>, CellAcc> cells;
  // trial_id -> (backbone, category); reviews refer to trials
  std::map<std::string, std::pair<std::string, Category>> trial_cell;
  std::map<std::string, std::optional<bool>> llm_verdicts;
  std::map<std::string, std::optional<bool>> manual_verdicts;

  auto acc = [&](const std::string& backbone, Category c) -> CellAcc& {
    auto& a = cells[{backbone, c}];
    a.stats.backbone = backbone;
    a.stats.category = c;
    return a;
  };

  for (const auto& r : records) {
    const std::string type = str_or(r, "type");
    try {
      if (type == "campaign") {
        for (const auto& b : r.value("backbones", nlohmann::json::array())) {
          const auto id = b.get<std::string>();
          if (listed.insert(id).second) order.push_back(id);
        }
      } else if (type == "run") {
        auto& a = acc(r.at("backbone_id").get<std::string>(), parse_category(r.at("category").get<std::string>()));
        ++a.stats.runs;
        ++rep.total_runs;
        if (r.value("failed", false)) {
          ++a.stats.failed_runs;
        } else if (r.contains("cost")) {
          const auto& c = r.at("cost");
          a.stats.run_tokens += c.at("fixed_tokens").get<std::int64_t>() +
                                c.at("elastic_input_tokens").get<std::int64_t>() +
                                c.at("elastic_output_tokens").get<std::int64_t>();
          a.stats.run_cost += Money::parse(c.at("total_cost").get<std::string>());
        }
      } else if (type == "trial") {
        const std::string id = r.at("trial_id").get<std::string>();
        const std::string backbone = r.at("backbone_id").get<std::string>();
        const Category cat = parse_category(r.at("category").get<std::string>());
        auto& a = acc(backbone, cat);
        const bool blocked = r.at("blocked").get<bool>();
        RateCount& rc = r.at("mode").get<std::string>() == "reuse" ? a.stats.reuse : a.stats.one_time;
        ++rc.trials;
        rc.passes += blocked ? 0 : 1;
        ++rep.total_trials;
        trial_cell[id] = {backbone, cat};
        if (r.at("mode").get<std::string>() == "one_time") {
          if (auto v = num_opt(r, "t2i"); v && !blocked) a.t2i[id] = *v;
          if (auto v = num_opt(r, "t2t")) a.t2t[id] = *v;
        }
      } else if (type == "selection") {
        auto& a = acc(r.at("backbone_id").get<std::string>(), parse_category(r.at("category").get<std::string>()));
        if (r.value("unavailable", false)) {
          a.stats.reuse_unavailable = true;
        } else {
          a.stats.reuse_tokens = r.at("reuse_tokens").get<std::int64_t>();
          a.stats.reuse_cost = Money::parse(r.at("reuse_cost").get<std::string>());
        }
      } else if (type == "review") {
        std::optional<bool> v;
        if (r.contains("appropriate") && r.at("appropriate").is_boolean()) v = r.at("appropriate").get<bool>();
        auto& target = str_or(r, "source") == "manual" ? manual_verdicts : llm_verdicts;
        target[r.at("trial_id").get<std::string>()] = v;
      } else if (type == "cell_abort") {
        auto& a = acc(r.at("backbone_id").get<std::string>(), parse_category(r.at("category").get<std::string>()));
        a.aborted.insert(r.at("sensitive_id").get<std::string>());
      } else {
        rep.warnings.push_back("ignored record of unknown type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      rep.warnings.push_back("ignored malformed " + type + " record: " + e.what());
    } catch (const ValidationError& e) {
      rep.warnings.push_back("ignored " + type + " record: " + e.what());
    }
  }

  // manual verdicts take precedence over LLM review of the same trial
  std::map<std::string, std::optional<bool>> verdicts = llm_verdicts;
  for (const auto& [k, v] : manual_verdicts) verdicts[k] = v;
  for (const auto& [trial, v] : verdicts) {
    auto it = trial_cell.find(trial);
    if (it == trial_cell.end()) {
      rep.warnings.push_back("review for unknown trial " + trial);
      continue;
    }
    if (!v) continue;
    auto& a = cells[{it->second.first, it->second.second}];
    ++a.stats.reviewed;
    a.stats.harmful += *v ? 0 : 1;
  }

  std::vector<std::string> extra;
  for (const auto& [key, a] : cells) {
    if (!listed.count(key.first) && std::find(extra.begin(), extra.end(), key.first) == extra.end())
      extra.push_back(key.first);
  }
  std::sort(extra.begin(), extra.end());
  order.insert(order.end(), extra.begin(), extra.end());

  std::vector<double> all_one_time, all_reuse;
  for (const auto& backbone : order) {
    BackboneSummary b;
    b.backbone = backbone;
    std::vector<double> ot, ru, harm, t2i, t2t;
    std::int64_t reviewed = 0, harmful = 0;
    bool any = false;
    for (Category c : kAllCategories) {
      auto it = cells.find({backbone, c});
      if (it == cells.end()) continue;
      any = true;
      CellAcc& a = it->second;
      a.stats.aborted_prompts = static_cast<std::int64_t>(a.aborted.size());
      a.stats.mean_text_to_image = keyed_mean(a.t2i);
      a.stats.mean_text_to_text = keyed_mean(a.t2t);
      collect(ot, a.stats.one_time.rate());
      collect(ru, a.stats.reuse.rate());
      collect(harm, a.stats.harmful_probability());
      collect(t2i, a.stats.mean_text_to_image);
      collect(t2t, a.stats.mean_text_to_text);
      reviewed += a.stats.reviewed;
      harmful += a.stats.harmful;
      rep.cells.push_back(a.stats);
    }
    if (!any) continue;
    all_one_time.insert(all_one_time.end(), ot.begin(), ot.end());
    all_reuse.insert(all_reuse.end(), ru.begin(), ru.end());
    b.one_time_average = mean_of(ot);
    b.reuse_average = mean_of(ru);
    b.harmful_category_mean = mean_of(harm);
    if (reviewed > 0) b.harmful_unweighted = static_cast<double>(harmful) / static_cast<double>(reviewed);
    b.mean_text_to_image = mean_of(t2i);
    b.mean_text_to_text = mean_of(t2t);
    rep.backbones.push_back(b);
  }
  rep.overall_one_time = mean_of(all_one_time);
  rep.overall_reuse = mean_of(all_reuse);
  return rep;
}

CampaignReport build_report_from_log(const std::string& path) {
  LoadedLog log = load_log(path);
  CampaignReport rep = build_report(log.records);
  rep.warnings.insert(rep.warnings.begin(), log.warnings.begin(), log.warnings.end());
  return rep;
}

std::string format_percent(std::optional<double> rate) {
  if (!rate) return "-";
  // the epsilon keeps values like 0.9555 (stored as 0.95549999..) rounding up
  const double tenths = std::floor(*rate * 1000.0 + 0.5 + 1e-7);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", tenths / 10.0);
  return buf;
}

namespace {

std::string fmt3(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}

nlohmann::json opt_json(std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

std::string render_text(const CampaignReport& r) {
  std::ostringstream out;
  const std::size_t w0 = 18, w1 = 10, wc = 22;
  out << "Bypass rate (%)\n";
  out << pad("backbone", w0) << pad("attack", w1);
  for (Category c : kAllCategories) out << pad(std::string(to_string(c)), wc);
  out << "average\n";
  for (const auto& b : r.backbones) {
    for (int reuse = 0; reuse < 2; ++reuse) {
      out << pad(reuse ? "" : b.backbone, w0) << pad(reuse ? "re-use" : "one-time", w1);
      for (Category c : kAllCategories) {
        const CellStats* s = r.cell(b.backbone, c);
        std::optional<double> v;
        if (s) v = reuse ? s->reuse.rate() : s->one_time.rate();
        out << pad(format_percent(v), wc);
      }
      out << format_percent(reuse ? b.reuse_average : b.one_time_average) << "\n";
    }
  }
  out << "overall one-time " << format_percent(r.overall_one_time) << ", re-use " << format_percent(r.overall_reuse)
      << "\n\n";

  out << "Harmfulness and similarity\n";
  out << pad("backbone", w0) << pad("harmful (all)", 16) << pad("harmful (cat mean)", 20) << pad("text-to-image", 16)
      << "text-to-text\n";
  for (const auto& b : r.backbones) {
    out << pad(b.backbone, w0) << pad(format_percent(b.harmful_unweighted), 16)
        << pad(format_percent(b.harmful_category_mean), 20) << pad(fmt3(b.mean_text_to_image), 16)
        << fmt3(b.mean_text_to_text) << "\n";
  }
  out << "reference text-to-image similarity of plain prompts: " << fmt3(clip_baseline) << "\n\n";

  out << "Token usage and cost per run ($)\n";
  out << pad("backbone", w0) << pad("category", wc) << pad("runs", 7) << pad("tokens", 9) << pad("cost", 12)
      << pad("reuse tokens", 14) << "reuse cost\n";
  for (const auto& s : r.cells) {
    const auto tok = s.mean_run_tokens();
    const auto cost = s.mean_run_cost();
    out << pad(s.backbone, w0) << pad(std::string(to_string(s.category)), wc)
        << pad(std::to_string(s.runs - s.failed_runs) + "/" + std::to_string(s.runs), 7)
        << pad(tok ? std::to_string(*tok) : "-", 9) << pad(cost ? cost->fixed(5) : "-", 12)
        << pad(s.reuse_tokens ? std::to_string(*s.reuse_tokens) : "-", 14)
        << (s.reuse_cost ? s.reuse_cost->fixed(5) : "-") << "\n";
  }
  out << "runs " << r.total_runs << ", trials " << r.total_trials << "\n";
  return out.str();
}

std::string render_jsonl(const CampaignReport& r) {
  std::string out;
  for (const auto& s : r.cells) {
    nlohmann::json j = {{"kind", "cell"},
                        {"backbone", s.backbone},
                        {"category", to_string(s.category)},
                        {"one_time", {{"trials", s.one_time.trials}, {"passes", s.one_time.passes},
                                      {"rate", opt_json(s.one_time.rate())}}},
                        {"reuse", {{"trials", s.reuse.trials}, {"passes", s.reuse.passes},
                                   {"rate", opt_json(s.reuse.rate())}, {"unavailable", s.reuse_unavailable}}},
                        {"runs", s.runs},
                        {"failed_runs", s.failed_runs},
                        {"aborted_prompts", s.aborted_prompts},
                        {"text_to_image", opt_json(s.mean_text_to_image)},
                        {"text_to_text", opt_json(s.mean_text_to_text)},
                        {"reviewed", s.reviewed},
                        {"harmful", s.harmful},
                        {"run_tokens", s.run_tokens},
                        {"run_cost", s.run_cost.str()}};
    j["reuse_tokens"] = s.reuse_tokens ? nlohmann::json(*s.reuse_tokens) : nlohmann::json();
    j["reuse_cost"] = s.reuse_cost ? nlohmann::json(s.reuse_cost->str()) : nlohmann::json();
    out += j.dump() + "\n";
  }
  for (const auto& b : r.backbones) {
    nlohmann::json j = {{"kind", "backbone"},
                        {"backbone", b.backbone},
                        {"one_time_average", opt_json(b.one_time_average)},
                        {"reuse_average", opt_json(b.reuse_average)},
                        {"harmful_unweighted", opt_json(b.harmful_unweighted)},
                        {"harmful_category_mean", opt_json(b.harmful_category_mean)},
                        {"text_to_image", opt_json(b.mean_text_to_image)},
                        {"text_to_text", opt_json(b.mean_text_to_text)}};
    out += j.dump() + "\n";
  }
  nlohmann::json o = {{"kind", "overall"},
                      {"one_time_average", opt_json(r.overall_one_time)},
                      {"reuse_average", opt_json(r.overall_reuse)},
                      {"runs", r.total_runs},
                      {"trials", r.total_trials},
                      {"clip_baseline", clip_baseline}};
  out += o.dump() + "\n";
  return out;
}

}  // namespace daca
