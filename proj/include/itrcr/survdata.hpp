#pragma once

// Competing-risks data model, CSV ingestion/serialization and validation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "itrcr/curves.hpp"
#include "itrcr/detail/io.hpp"
#include "itrcr/detail/numeric.hpp"

#include "json.hpp"

namespace itrcr {

struct Subject {
  std::string id;
  double time = 0.0;
  Status status = Status::Censored;
  int treatment = 0;
  std::vector<double> covariates;
  // Allowed treatment labels for this subject; empty means the whole space.
  std::vector<int> feasible;

  bool operator==(const Subject&) const = default;
};

// Immutable after construction; safe to share across concurrent readers.
class CompetingRisksDataset {
 public:
  CompetingRisksDataset(std::vector<Subject> subjects,
                        std::vector<int> treatment_space, double tau,
                        bool has_feasible_column = false)
      : subjects_(std::move(subjects)),
        treatment_space_(std::move(treatment_space)),
        tau_(tau),
        has_feasible_column_(has_feasible_column) {
    std::sort(treatment_space_.begin(), treatment_space_.end());
    treatment_space_.erase(
        std::unique(treatment_space_.begin(), treatment_space_.end()),
        treatment_space_.end());
    validate_construction();
  }

  const std::vector<Subject>& subjects() const { return subjects_; }
  const std::vector<int>& treatment_space() const { return treatment_space_; }
  double tau() const { return tau_; }
  std::size_t n() const { return subjects_.size(); }
  std::size_t p() const { return p_; }
  bool has_feasible_column() const { return has_feasible_column_; }

  const std::vector<int>& feasible_for(const Subject& s) const {
    return s.feasible.empty() ? treatment_space_ : s.feasible;
  }

  CompetingRisksDataset restrict_to_arm(int arm) const {
    std::vector<Subject> kept;
    for (const auto& s : subjects_)
      if (s.treatment == arm) kept.push_back(s);
    return CompetingRisksDataset(std::move(kept), {arm}, tau_, false);
  }

  std::vector<WeightedSample> weighted_samples() const {
    std::vector<WeightedSample> out;
    out.reserve(subjects_.size());
    for (const auto& s : subjects_) out.push_back({s.time, s.status, 1.0});
    return out;
  }

 private:
  void validate_construction() {
    if (!(tau_ > 0.0) || !std::isfinite(tau_))
      throw DataError("dataset horizon tau must be positive");
    p_ = subjects_.empty() ? 0 : subjects_.front().covariates.size();
    std::set<int> space(treatment_space_.begin(), treatment_space_.end());
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
      const auto& s = subjects_[i];
      if (!(s.time >= 0.0) || !std::isfinite(s.time))
        throw DataError("row " + std::to_string(i + 1) + ": negative time");
      if (s.covariates.size() != p_)
        throw DataError("row " + std::to_string(i + 1) +
                        ": covariate length mismatch");
      if (!space.count(s.treatment))
        throw DataError("row " + std::to_string(i + 1) +
                        ": treatment not in treatment space");
      for (int a : s.feasible)
        if (!space.count(a))
          throw DataError("row " + std::to_string(i + 1) +
                          ": feasible label not in treatment space");
    }
  }

  std::vector<Subject> subjects_;
  std::vector<int> treatment_space_;
  double tau_ = 0.0;
  std::size_t p_ = 0;
  bool has_feasible_column_ = false;
};

struct CsvSchema {
  std::string time = "time";
  std::string status = "status";
  std::string treatment = "treatment";
  std::string id = "id";              // optional column
  std::string feasible = "feasible";  // optional column
  std::string covariate_prefix = "z";
};

struct ArmSummary {
  int arm = 0;
  std::size_t n_subjects = 0;
  std::size_t n_cause1 = 0;
  std::size_t n_cause2 = 0;
  std::size_t n_censored = 0;
  std::size_t at_risk_at_tau = 0;
};

struct ValidationReport {
  std::vector<ArmSummary> arms;
  std::vector<std::string> warnings;
  bool ok() const { return warnings.empty(); }
};

// Report-only diagnostics: per-arm event counts by cause, subjects still at
// risk at the horizon, and warnings for degenerate arms.
inline ValidationReport validate(const CompetingRisksDataset& ds) {
  ValidationReport report;
  for (int arm : ds.treatment_space()) {
    ArmSummary s;
    s.arm = arm;
    for (const auto& subj : ds.subjects()) {
      if (subj.treatment != arm) continue;
      ++s.n_subjects;
      switch (subj.status) {
        case Status::Cause1: ++s.n_cause1; break;
        case Status::Cause2: ++s.n_cause2; break;
        case Status::Censored: ++s.n_censored; break;
      }
      if (subj.time >= ds.tau()) ++s.at_risk_at_tau;
    }
    if (s.n_cause1 == 0)
      report.warnings.push_back("RCIF degenerate in arm " +
                                std::to_string(arm) + ": no cause-1 events");
    if (s.at_risk_at_tau == 0)
      report.warnings.push_back("no risk at horizon in arm " +
                                std::to_string(arm));
    report.arms.push_back(s);
  }
  return report;
}

namespace detail {

inline double empirical_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(n)));
  if (rank == 0) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

inline std::filesystem::path dataset_sidecar(
    const std::filesystem::path& path) {
  std::filesystem::path side = path;
  side += ".meta.json";
  return side;
}

}  // namespace detail

// Loads a dataset CSV. Required columns per the schema: time, status,
// treatment; covariates <prefix>1..<prefix>p; optional id and feasible
// ('|'-separated labels). The horizon comes from the explicit argument, the
// sidecar written by save_dataset, or (with a warning) the 0.95 empirical
// quantile of the observed times.
inline CompetingRisksDataset load_dataset(
    const std::filesystem::path& path, const CsvSchema& schema = {},
    std::optional<double> tau = std::nullopt,
    std::vector<std::string>* warnings = nullptr) {
  auto lines = detail::read_lines(path);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw DataError(path.string() + ": empty file");

  auto header = detail::split(lines[0], ',');
  auto col_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  auto required = [&](const std::string& name) {
    auto c = col_of(name);
    if (!c) throw DataError(path.string() + ": missing column '" + name + "'");
    return *c;
  };
  std::size_t c_time = required(schema.time);
  std::size_t c_status = required(schema.status);
  std::size_t c_treat = required(schema.treatment);
  std::optional<std::size_t> c_id = col_of(schema.id);
  std::optional<std::size_t> c_feas = col_of(schema.feasible);

  std::vector<std::size_t> c_cov;
  for (std::size_t k = 1;; ++k) {
    auto c = col_of(schema.covariate_prefix + std::to_string(k));
    if (!c) break;
    c_cov.push_back(*c);
  }

  std::vector<Subject> subjects;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::size_t row = subjects.size() + 1;
    auto cells = detail::split(lines[li], ',');
    if (cells.size() != header.size())
      throw DataError(path.string() + ": row " + std::to_string(row) +
                      " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(header.size()));
    auto cell_double = [&](std::size_t col) {
      try {
        return detail::parse_double(cells[col], "column '" + header[col] + "'");
      } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": row " + std::to_string(row) + ": " +
                        e.what());
      }
    };
    auto cell_int = [&](std::size_t col) {
      try {
        return detail::parse_int(cells[col], "column '" + header[col] + "'");
      } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": row " + std::to_string(row) + ": " +
                        e.what());
      }
    };

    Subject s;
    s.id = c_id ? cells[*c_id] : std::to_string(row);
    s.time = cell_double(c_time);
    if (!(s.time >= 0.0))
      throw DataError(path.string() + ": row " + std::to_string(row) +
                      ": negative time");
    long long status = cell_int(c_status);
    if (status < 0 || status > 2)
      throw DataError(path.string() + ": row " + std::to_string(row) +
                      ": status must be 0, 1, or 2 (got " +
                      std::to_string(status) + ")");
    s.status = static_cast<Status>(status);
    s.treatment = static_cast<int>(cell_int(c_treat));
    for (std::size_t c : c_cov) s.covariates.push_back(cell_double(c));
    if (c_feas && !cells[*c_feas].empty()) {
      for (const auto& tok : detail::split(cells[*c_feas], '|'))
        s.feasible.push_back(static_cast<int>(detail::parse_int(
            tok, "feasible set, row " + std::to_string(row))));
      std::sort(s.feasible.begin(), s.feasible.end());
    }
    subjects.push_back(std::move(s));
  }
  if (subjects.empty()) throw DataError(path.string() + ": no subjects");

  // Sidecar (when present) carries tau and the full treatment space.
  std::vector<int> space;
  std::optional<double> side_tau;
  auto side = detail::dataset_sidecar(path);
  if (std::filesystem::exists(side)) {
    nlohmann::json meta = nlohmann::json::parse(detail::read_file(side));
    if (meta.value("schema_version", -1) != 1)
      throw DataError("unsupported dataset schema version in " +
                      side.string());
    if (meta.contains("tau")) side_tau = meta.at("tau").get<double>();
    if (meta.contains("treatment_space"))
      space = meta.at("treatment_space").get<std::vector<int>>();
  }
  if (space.empty()) {
    std::set<int> seen;
    for (const auto& s : subjects) seen.insert(s.treatment);
    for (const auto& s : subjects)
      for (int a : s.feasible) seen.insert(a);
    space.assign(seen.begin(), seen.end());
  }

  double horizon;
  if (tau) {
    horizon = *tau;
  } else if (side_tau) {
    horizon = *side_tau;
  } else {
    std::vector<double> times;
    times.reserve(subjects.size());
    for (const auto& s : subjects) times.push_back(s.time);
    horizon = detail::empirical_quantile(std::move(times), 0.95);
    if (warnings)
      warnings->push_back(
          "tau not specified; defaulting to the 0.95 empirical quantile of "
          "observed times (" +
          detail::format_double(horizon) + ")");
  }

  bool has_feasible = c_feas.has_value();
  return CompetingRisksDataset(std::move(subjects), std::move(space), horizon,
                               has_feasible);
}

// Writes the dataset CSV plus a .meta.json sidecar recording tau and the
// treatment space. Doubles use shortest round-trip formatting, so
// load(save(ds)) reproduces every field exactly.
inline void save_dataset(const std::filesystem::path& path,
                         const CompetingRisksDataset& ds,
                         const CsvSchema& schema = {}) {
  std::ostringstream csv;
  csv << schema.id << "," << schema.time << "," << schema.status << ","
      << schema.treatment;
  for (std::size_t k = 1; k <= ds.p(); ++k)
    csv << "," << schema.covariate_prefix << k;
  if (ds.has_feasible_column()) csv << "," << schema.feasible;
  csv << "\n";
  for (const auto& s : ds.subjects()) {
    csv << s.id << "," << detail::format_double(s.time) << ","
        << static_cast<int>(s.status) << "," << s.treatment;
    for (double z : s.covariates) csv << "," << detail::format_double(z);
    if (ds.has_feasible_column()) {
      csv << ",";
      for (std::size_t i = 0; i < s.feasible.size(); ++i) {
        if (i) csv << "|";
        csv << s.feasible[i];
      }
    }
    csv << "\n";
  }
  detail::atomic_write_file(path, csv.str());

  nlohmann::json meta{{"schema_version", 1},
                      {"tau", ds.tau()},
                      {"treatment_space", ds.treatment_space()}};
  detail::atomic_write_file(detail::dataset_sidecar(path),
                            meta.dump(2) + "\n");
}

}  // namespace itrcr
