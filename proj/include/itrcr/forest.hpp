#pragma once

// Recursive-partitioning engine: random survival forests (log-rank splits,
// Kaplan-Meier terminals) and random cumulative incidence forests (Gray
// splits, Aalen-Johansen terminals), one forest per treatment arm.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itrcr/curves.hpp"
#include "itrcr/detail/parallel.hpp"
#include "itrcr/detail/rng.hpp"
#include "itrcr/splitstats.hpp"
#include "itrcr/survdata.hpp"

#include "json.hpp"

namespace itrcr {

enum class OutcomeKind { Survival, Cause1Cif };

inline std::string outcome_kind_name(OutcomeKind kind) {
  return kind == OutcomeKind::Survival ? "survival" : "cause1_cif";
}

inline OutcomeKind outcome_kind_from_name(const std::string& name) {
  if (name == "survival") return OutcomeKind::Survival;
  if (name == "cause1_cif") return OutcomeKind::Cause1Cif;
  throw DataError("unknown outcome kind: " + name);
}

struct ForestParams {
  int n_tree = 300;
  int n_min = 5;
  int n_minevent = 2;
  double alpha_reg = 0.1;
  double psi_split = 0.1;
  double subsample_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_tree < 1) throw std::invalid_argument("n_tree must be >= 1");
    if (n_min < 1) throw std::invalid_argument("n_min must be >= 1");
    if (n_minevent < 1)
      throw std::invalid_argument("n_minevent must be >= 1");
    if (!(alpha_reg > 0.0) || alpha_reg > 0.5)
      throw std::invalid_argument("alpha_reg must lie in (0, 0.5]");
    if (!(psi_split > 0.0) || !(psi_split < 1.0))
      throw std::invalid_argument("psi_split must lie in (0, 1)");
    if (!(subsample_fraction > 0.0) || subsample_fraction > 1.0)
      throw std::invalid_argument("subsample_fraction must lie in (0, 1]");
  }

  bool operator==(const ForestParams&) const = default;
};

// Binary tree node: internal nodes route z[feature] <= threshold to the
// left child; terminals hold the node-conditional outcome curve.
class TreeNode {
 public:
  static TreeNode terminal(StepCurve curve) {
    TreeNode n;
    n.curve_ = std::move(curve);
    return n;
  }

  static TreeNode internal(int feature, double threshold, TreeNode left,
                           TreeNode right) {
    TreeNode n;
    n.feature_ = feature;
    n.threshold_ = threshold;
    n.left_ = std::make_unique<TreeNode>(std::move(left));
    n.right_ = std::make_unique<TreeNode>(std::move(right));
    return n;
  }

  bool is_terminal() const { return !left_; }
  int split_feature() const { return feature_; }
  double split_threshold() const { return threshold_; }
  const TreeNode& left() const { return *left_; }
  const TreeNode& right() const { return *right_; }
  const StepCurve& curve() const { return *curve_; }

  const StepCurve& leaf_for(std::span<const double> z) const {
    const TreeNode* node = this;
    while (!node->is_terminal()) {
      node = z[static_cast<std::size_t>(node->feature_)] <= node->threshold_
                 ? node->left_.get()
                 : node->right_.get();
    }
    return *node->curve_;
  }

 private:
  TreeNode() = default;
  int feature_ = -1;
  double threshold_ = 0.0;
  std::unique_ptr<TreeNode> left_;
  std::unique_ptr<TreeNode> right_;
  std::optional<StepCurve> curve_;
};

struct Forest {
  OutcomeKind outcome_kind = OutcomeKind::Survival;
  int arm = 0;
  double tau = 0.0;
  std::size_t n_features = 0;
  ForestParams params;
  std::vector<TreeNode> trees;
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  SplitScore score;
};

namespace detail {

// Distinct-time table for one node; counts are integer-valued doubles so the
// sweep kernels see exactly what the public scorers would for unit weights.
struct NodeGrid {
  std::vector<double> times;
  std::vector<double> all;
  std::vector<double> evt;
  std::vector<double> evt1;
  std::vector<std::uint32_t> row_of;  // per node position
  std::size_t n_events = 0;
};

inline NodeGrid build_node_grid(const std::vector<Subject>& subjects,
                                std::span<const std::uint32_t> node) {
  NodeGrid grid;
  std::vector<std::uint32_t> order(node.begin(), node.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return subjects[a].time < subjects[b].time;
                   });
  grid.row_of.resize(node.size());
  std::vector<std::uint32_t> pos_of(subjects.size());
  for (std::size_t i = 0; i < node.size(); ++i) pos_of[node[i]] = i;

  for (std::size_t k = 0; k < order.size();) {
    double t = subjects[order[k]].time;
    grid.times.push_back(t);
    grid.all.push_back(0.0);
    grid.evt.push_back(0.0);
    grid.evt1.push_back(0.0);
    std::size_t row = grid.times.size() - 1;
    while (k < order.size() && subjects[order[k]].time == t) {
      const Subject& s = subjects[order[k]];
      grid.all[row] += 1.0;
      if (s.status != Status::Censored) {
        grid.evt[row] += 1.0;
        ++grid.n_events;
        if (s.status == Status::Cause1) grid.evt1[row] += 1.0;
      }
      grid.row_of[pos_of[order[k]]] = static_cast<std::uint32_t>(row);
      ++k;
    }
  }
  return grid;
}

}  // namespace detail

// Finds the best axis-aligned split of a node. With probability psi_split
// the split variable is drawn uniformly and only its threshold is optimized;
// otherwise feature and threshold jointly maximize the absolute score.
// Candidate thresholds are midpoints of consecutive distinct feature values;
// a candidate is valid only if both children meet the n_min, n_minevent and
// alpha_reg floors. Returns nullopt when the node is too small or no valid
// candidate exists.
inline std::optional<SplitChoice> best_split(
    const std::vector<Subject>& subjects,
    std::span<const std::uint32_t> node, OutcomeKind outcome_kind,
    const ForestParams& params, double tau, std::mt19937_64& rng) {
  const std::size_t m = node.size();
  if (m < 2 * static_cast<std::size_t>(params.n_min)) return std::nullopt;
  auto grid = detail::build_node_grid(subjects, node);
  if (grid.n_events < 2 * static_cast<std::size_t>(params.n_minevent))
    return std::nullopt;
  const std::size_t p = subjects[node[0]].covariates.size();
  if (p == 0) return std::nullopt;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool random_feature = unit(rng) < params.psi_split;
  std::size_t forced_feature = 0;
  if (random_feature) {
    std::uniform_int_distribution<std::size_t> pick(0, p - 1);
    forced_feature = pick(rng);
  }

  const std::size_t n_rows = grid.times.size();
  const double alpha_floor = params.alpha_reg * static_cast<double>(m);
  const auto size_ok = [&](std::size_t n_child, std::size_t e_child) {
    return n_child >= static_cast<std::size_t>(params.n_min) &&
           static_cast<double>(n_child) >= alpha_floor &&
           e_child >= static_cast<std::size_t>(params.n_minevent);
  };

  std::vector<double> l_all(n_rows), l_evt(n_rows), l_evt1(n_rows);
  std::vector<std::pair<double, std::uint32_t>> by_value(m);

  std::optional<SplitChoice> best;
  const double total_all = static_cast<double>(m);

  for (std::size_t f = 0; f < p; ++f) {
    if (random_feature && f != forced_feature) continue;
    for (std::size_t i = 0; i < m; ++i)
      by_value[i] = {subjects[node[i]].covariates[f],
                     static_cast<std::uint32_t>(i)};
    std::sort(by_value.begin(), by_value.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::fill(l_all.begin(), l_all.end(), 0.0);
    std::fill(l_evt.begin(), l_evt.end(), 0.0);
    std::fill(l_evt1.begin(), l_evt1.end(), 0.0);
    std::size_t n_left = 0;
    std::size_t e_left = 0;

    std::size_t i = 0;
    while (i < m) {
      double v = by_value[i].first;
      while (i < m && by_value[i].first == v) {
        std::size_t pos = by_value[i].second;
        std::uint32_t row = grid.row_of[pos];
        const Subject& s = subjects[node[pos]];
        l_all[row] += 1.0;
        if (s.status != Status::Censored) {
          l_evt[row] += 1.0;
          ++e_left;
          if (s.status == Status::Cause1) l_evt1[row] += 1.0;
        }
        ++n_left;
        ++i;
      }
      if (i == m) break;
      double next = by_value[i].first;
      if (!size_ok(n_left, e_left) ||
          !size_ok(m - n_left, grid.n_events - e_left))
        continue;
      double threshold = v + (next - v) / 2.0;
      if (!(threshold < next)) threshold = v;

      auto row_fn = [&](std::size_t k) {
        return detail::SweepRow{grid.times[k], l_all[k],  l_evt[k],
                                l_evt1[k],     grid.all[k], grid.evt[k],
                                grid.evt1[k]};
      };
      SplitScore score =
          outcome_kind == OutcomeKind::Survival
              ? detail::logrank_sweep(n_rows, static_cast<double>(n_left),
                                      total_all, row_fn)
              : detail::gray_sweep(n_rows, static_cast<double>(n_left),
                                   total_all, tau, row_fn);
      if (!score.valid) continue;
      if (!best || score.abs_value > best->score.abs_value) {
        best = SplitChoice{static_cast<int>(f), threshold, score};
      }
    }
  }
  return best;
}

namespace detail {

inline StepCurve terminal_curve(const std::vector<Subject>& subjects,
                                std::span<const std::uint32_t> node,
                                OutcomeKind kind) {
  std::vector<WeightedSample> samples;
  samples.reserve(node.size());
  for (std::uint32_t i : node)
    samples.push_back({subjects[i].time, subjects[i].status, 1.0});
  return kind == OutcomeKind::Survival ? kaplan_meier(samples)
                                       : aalen_johansen(samples, 1);
}

inline TreeNode grow_node(const std::vector<Subject>& subjects,
                          std::vector<std::uint32_t> node, OutcomeKind kind,
                          const ForestParams& params, double tau,
                          std::mt19937_64& rng) {
  auto split = best_split(subjects, node, kind, params, tau, rng);
  if (!split) return TreeNode::terminal(terminal_curve(subjects, node, kind));

  std::vector<std::uint32_t> left;
  std::vector<std::uint32_t> right;
  const std::size_t f = static_cast<std::size_t>(split->feature);
  for (std::uint32_t i : node) {
    if (subjects[i].covariates[f] <= split->threshold)
      left.push_back(i);
    else
      right.push_back(i);
  }
  TreeNode l = grow_node(subjects, std::move(left), kind, params, tau, rng);
  TreeNode r = grow_node(subjects, std::move(right), kind, params, tau, rng);
  return TreeNode::internal(split->feature, split->threshold, std::move(l),
                            std::move(r));
}

// Subsample without replacement, drawn from the tree's own stream and then
// sorted so the node order is canonical regardless of input permutation.
inline std::vector<std::uint32_t> draw_subsample(std::size_t n, double frac,
                                                 std::mt19937_64& rng) {
  std::size_t m = static_cast<std::size_t>(
      std::llround(frac * static_cast<double>(n)));
  if (m < 1) m = 1;
  if (m > n) m = n;
  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

// Fits one forest on a single treatment arm. Each tree grows on an
// independent subsample drawn from a stream seeded by (params.seed, tree
// index), so the result is identical for any thread count.
inline Forest fit_forest(const CompetingRisksDataset& arm_data,
                         OutcomeKind outcome_kind, const ForestParams& params,
                         unsigned n_threads = 0) {
  params.validate();
  if (arm_data.n() == 0) throw FitError("empty treatment arm");
  const auto& subjects = arm_data.subjects();
  const int arm = subjects.front().treatment;
  std::size_t n_events = 0;
  for (const auto& s : subjects) {
    if (s.treatment != arm)
      throw FitError("fit_forest requires a single-arm dataset");
    if (s.status != Status::Censored) ++n_events;
  }
  if (n_events == 0)
    throw FitError("treatment arm " + std::to_string(arm) + " has no events");

  Forest forest;
  forest.outcome_kind = outcome_kind;
  forest.arm = arm;
  forest.tau = arm_data.tau();
  forest.n_features = arm_data.p();
  forest.params = params;

  std::vector<std::optional<TreeNode>> slots(
      static_cast<std::size_t>(params.n_tree));
  detail::parallel_for(
      slots.size(), n_threads, [&](std::size_t w) {
        auto rng = detail::make_engine(detail::mix_seed(params.seed, w));
        auto sample = detail::draw_subsample(
            subjects.size(), params.subsample_fraction, rng);
        slots[w] = detail::grow_node(subjects, std::move(sample), outcome_kind,
                                     params, arm_data.tau(), rng);
      });
  forest.trees.reserve(slots.size());
  for (auto& slot : slots) forest.trees.push_back(std::move(*slot));
  return forest;
}

// Routes z through every tree and returns the unweighted pointwise mean of
// the terminal curves on the union of their jump times.
inline StepCurve predict_curve(const Forest& forest,
                               std::span<const double> z) {
  if (z.size() != forest.n_features)
    throw std::invalid_argument(
        "covariate dimension mismatch: expected " +
        std::to_string(forest.n_features) + ", got " +
        std::to_string(z.size()));
  std::vector<const StepCurve*> leaves;
  leaves.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) leaves.push_back(&tree.leaf_for(z));
  return average_curves(std::span<const StepCurve* const>(leaves));
}

// --- versioned JSON serialization ---

namespace detail {

inline nlohmann::json node_to_json(const TreeNode& node) {
  if (node.is_terminal()) {
    const StepCurve& c = node.curve();
    return nlohmann::json{{"curve",
                           {{"kind", curve_kind_name(c.kind())},
                            {"times", c.jump_times()},
                            {"values", c.values()}}}};
  }
  return nlohmann::json{{"feature", node.split_feature()},
                        {"threshold", node.split_threshold()},
                        {"left", node_to_json(node.left())},
                        {"right", node_to_json(node.right())}};
}

inline TreeNode node_from_json(const nlohmann::json& j) {
  if (j.contains("curve")) {
    const auto& c = j.at("curve");
    return TreeNode::terminal(
        StepCurve(curve_kind_from_name(c.at("kind").get<std::string>()),
                  c.at("times").get<std::vector<double>>(),
                  c.at("values").get<std::vector<double>>()));
  }
  return TreeNode::internal(j.at("feature").get<int>(),
                            j.at("threshold").get<double>(),
                            node_from_json(j.at("left")),
                            node_from_json(j.at("right")));
}

inline nlohmann::json params_to_json(const ForestParams& p) {
  return nlohmann::json{{"n_tree", p.n_tree},
                        {"n_min", p.n_min},
                        {"n_minevent", p.n_minevent},
                        {"alpha_reg", p.alpha_reg},
                        {"psi_split", p.psi_split},
                        {"subsample_fraction", p.subsample_fraction},
                        {"seed", p.seed}};
}

inline ForestParams params_from_json(const nlohmann::json& j) {
  ForestParams p;
  p.n_tree = j.at("n_tree").get<int>();
  p.n_min = j.at("n_min").get<int>();
  p.n_minevent = j.at("n_minevent").get<int>();
  p.alpha_reg = j.at("alpha_reg").get<double>();
  p.psi_split = j.at("psi_split").get<double>();
  p.subsample_fraction = j.at("subsample_fraction").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace detail

inline nlohmann::json forest_to_json(const Forest& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : forest.trees)
    trees.push_back(detail::node_to_json(t));
  return nlohmann::json{{"schema_version", 1},
                        {"outcome_kind", outcome_kind_name(forest.outcome_kind)},
                        {"arm", forest.arm},
                        {"tau", forest.tau},
                        {"n_features", forest.n_features},
                        {"params", detail::params_to_json(forest.params)},
                        {"trees", std::move(trees)}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", -1) != 1)
    throw DataError("unsupported forest schema version");
  Forest forest;
  forest.outcome_kind =
      outcome_kind_from_name(j.at("outcome_kind").get<std::string>());
  forest.arm = j.at("arm").get<int>();
  forest.tau = j.at("tau").get<double>();
  forest.n_features = j.at("n_features").get<std::size_t>();
  forest.params = detail::params_from_json(j.at("params"));
  for (const auto& t : j.at("trees"))
    forest.trees.push_back(detail::node_from_json(t));
  return forest;
}

}  // namespace itrcr
