#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vclt/common.hpp"

namespace vclt {

// One classification record: the true category plus the classifier's score
// for every category.
struct ScoreRecord {
  std::string sample_id;
  int true_label = 0;
  std::vector<double> scores;
};

// Weighted undirected graph over categories. Edge weights accumulate the
// normalized score mass a classifier assigns to wrong categories, so heavy
// edges join categories the classifier confuses.
struct ConfusionGraph {
  int n_categories = 0;
  int tau = 0;  // top-score cutoff the graph was built with
  std::vector<std::string> category_names;
  // Keys are (u, v) with u < v; weights are >= 0 and finite.
  std::map<std::pair<int, int>, double> edges;

  double weight(int u, int v) const;
  double total_edge_mass() const;
  const std::string& name_of(int category) const;

  bool operator==(const ConfusionGraph&) const = default;
};

// For each record: pick the tau highest-scoring categories (ties at the
// cutoff go to the lower index), renormalize that slice to sum to one, and
// add each wrong category's share to the edge {true_label, category}.
// Mass landing on the true label is dropped.
ConfusionGraph build_confusion_graph(std::span<const ScoreRecord> records,
                                     int n_categories, int tau);

// The normalized top-tau shares of one score vector, as (category, share)
// pairs in descending score order. Negative slices are shifted to zero
// before normalizing; an all-equal slice yields uniform 1/tau shares.
std::vector<std::pair<int, double>> top_tau_shares(std::span<const double> scores,
                                                   int tau);

// Graph file: "# vclt-graph v1 N=<n> tau=<t>", optional "# name <idx> <str>"
// lines, then "<u> <v> <weight>" per edge with u < v.
void write_graph(const ConfusionGraph& graph, std::ostream& out);
void write_graph_file(const ConfusionGraph& graph, const std::string& path);
ConfusionGraph read_graph(std::istream& in);
ConfusionGraph read_graph_file(const std::string& path);

// Score log CSV: header "sample_id,true_label,score_0,...,score_{N-1}".
void write_score_log(std::span<const ScoreRecord> records, int n_categories,
                     std::ostream& out);
void write_score_log_file(std::span<const ScoreRecord> records, int n_categories,
                          const std::string& path);
std::vector<ScoreRecord> read_score_log(std::istream& in, int& n_categories);
std::vector<ScoreRecord> read_score_log_file(const std::string& path,
                                             int& n_categories);

}  // namespace vclt
