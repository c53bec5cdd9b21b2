#include "vclt/confusion_graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace vclt {

namespace {

void check_record(const ScoreRecord& rec, int n_categories) {
  if (static_cast<int>(rec.scores.size()) != n_categories) {
    throw FormatError("score record '" + rec.sample_id + "': expected " +
                      std::to_string(n_categories) + " scores, got " +
                      std::to_string(rec.scores.size()));
  }
  if (rec.true_label < 0 || rec.true_label >= n_categories) {
    throw FormatError("score record '" + rec.sample_id + "': true label " +
                      std::to_string(rec.true_label) + " out of range");
  }
  for (double s : rec.scores) {
    if (!std::isfinite(s)) {
      throw FormatError("score record '" + rec.sample_id + "': non-finite score");
    }
  }
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

double ConfusionGraph::weight(int u, int v) const {
  if (u > v) std::swap(u, v);
  auto it = edges.find({u, v});
  return it == edges.end() ? 0.0 : it->second;
}

double ConfusionGraph::total_edge_mass() const {
  double total = 0.0;
  for (const auto& [key, w] : edges) total += w;
  return total;
}

const std::string& ConfusionGraph::name_of(int category) const {
  static const std::string empty;
  if (category < 0 || category >= static_cast<int>(category_names.size())) return empty;
  return category_names[category];
}

std::vector<std::pair<int, double>> top_tau_shares(std::span<const double> scores,
                                                   int tau) {
  const int n = static_cast<int>(scores.size());
  if (tau < 1 || tau > n) {
    throw UsageError("tau must be in [1, " + std::to_string(n) + "], got " +
                     std::to_string(tau));
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  order.resize(tau);

  double min_score = scores[order[0]];
  for (int idx : order) min_score = std::min(min_score, scores[idx]);
  const double shift = min_score < 0.0 ? -min_score : 0.0;

  double sum = 0.0;
  for (int idx : order) sum += scores[idx] + shift;

  std::vector<std::pair<int, double>> shares;
  shares.reserve(tau);
  for (int idx : order) {
    double share = sum > 0.0 ? (scores[idx] + shift) / sum : 1.0 / tau;
    shares.emplace_back(idx, share);
  }
  return shares;
}

ConfusionGraph build_confusion_graph(std::span<const ScoreRecord> records,
                                     int n_categories, int tau) {
  if (n_categories < 1) throw UsageError("n_categories must be >= 1");
  if (tau < 1 || tau > n_categories) {
    throw UsageError("tau must be in [1, " + std::to_string(n_categories) +
                     "], got " + std::to_string(tau));
  }
  ConfusionGraph graph;
  graph.n_categories = n_categories;
  graph.tau = tau;
  for (const ScoreRecord& rec : records) {
    check_record(rec, n_categories);
    for (const auto& [predicted, share] : top_tau_shares(rec.scores, tau)) {
      if (predicted == rec.true_label) continue;
      int u = std::min(rec.true_label, predicted);
      int v = std::max(rec.true_label, predicted);
      graph.edges[{u, v}] += share;
    }
  }
  return graph;
}

void write_graph(const ConfusionGraph& graph, std::ostream& out) {
  out << "# vclt-graph v1 N=" << graph.n_categories << " tau=" << graph.tau << "\n";
  for (int i = 0; i < static_cast<int>(graph.category_names.size()); ++i) {
    if (!graph.category_names[i].empty()) {
      out << "# name " << i << " " << graph.category_names[i] << "\n";
    }
  }
  for (const auto& [key, w] : graph.edges) {
    out << key.first << " " << key.second << " " << format_double(w) << "\n";
  }
}

void write_graph_file(const ConfusionGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  write_graph(graph, out);
}

ConfusionGraph read_graph(std::istream& in) {
  ConfusionGraph graph;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "graph line " + std::to_string(line_no);
    if (line.empty()) continue;
    if (!have_header) {
      std::istringstream hs(line);
      std::string hash, magic, version, npart, taupart;
      hs >> hash >> magic >> version >> npart >> taupart;
      if (hash != "#" || magic != "vclt-graph" || version != "v1" ||
          npart.rfind("N=", 0) != 0 || taupart.rfind("tau=", 0) != 0) {
        throw FormatError(where + ": expected '# vclt-graph v1 N=<n> tau=<t>'");
      }
      graph.n_categories = static_cast<int>(parse_long(npart.substr(2), where));
      graph.tau = static_cast<int>(parse_long(taupart.substr(4), where));
      if (graph.n_categories < 1) throw FormatError(where + ": N must be >= 1");
      graph.category_names.assign(graph.n_categories, "");
      have_header = true;
      continue;
    }
    if (line[0] == '#') {
      std::istringstream ns(line);
      std::string hash, keyword;
      ns >> hash >> keyword;
      if (keyword == "name") {
        long idx = 0;
        ns >> idx;
        if (!ns || idx < 0 || idx >= graph.n_categories) {
          throw FormatError(where + ": bad category index in name line");
        }
        std::string name;
        std::getline(ns, name);
        if (!name.empty() && name[0] == ' ') name.erase(0, 1);
        graph.category_names[idx] = name;
      }
      continue;
    }
    std::istringstream es(line);
    long u = 0, v = 0;
    std::string wtext;
    if (!(es >> u >> v >> wtext)) {
      throw FormatError(where + ": expected '<u> <v> <weight>'");
    }
    std::string trailing;
    if (es >> trailing) throw FormatError(where + ": trailing tokens");
    if (u < 0 || u >= graph.n_categories || v < 0 || v >= graph.n_categories) {
      throw FormatError(where + ": unknown category index");
    }
    if (u == v) throw FormatError(where + ": self-loop not allowed");
    if (u > v) throw FormatError(where + ": endpoints must satisfy u < v");
    double w = parse_double(wtext, where);
    if (!std::isfinite(w) || w < 0.0) {
      throw FormatError(where + ": weight must be finite and >= 0");
    }
    auto [it, inserted] = graph.edges.insert({{static_cast<int>(u), static_cast<int>(v)}, w});
    if (!inserted) throw FormatError(where + ": duplicate edge");
  }
  if (!have_header) throw FormatError("graph file: missing header line");
  bool any_name = false;
  for (const std::string& n : graph.category_names) {
    if (!n.empty()) any_name = true;
  }
  if (!any_name) graph.category_names.clear();
  return graph;
}

ConfusionGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "' for reading");
  return read_graph(in);
}

void write_score_log(std::span<const ScoreRecord> records, int n_categories,
                     std::ostream& out) {
  out << "sample_id,true_label";
  for (int i = 0; i < n_categories; ++i) out << ",score_" << i;
  out << "\n";
  for (const ScoreRecord& rec : records) {
    check_record(rec, n_categories);
    out << rec.sample_id << "," << rec.true_label;
    for (double s : rec.scores) out << "," << format_double(s);
    out << "\n";
  }
}

void write_score_log_file(std::span<const ScoreRecord> records, int n_categories,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  write_score_log(records, n_categories, out);
}

std::vector<ScoreRecord> read_score_log(std::istream& in, int& n_categories) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("score log: empty file");
  auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "sample_id" || header[1] != "true_label") {
    throw FormatError("score log line 1: expected header 'sample_id,true_label,score_0,...'");
  }
  n_categories = static_cast<int>(header.size()) - 2;
  for (int i = 0; i < n_categories; ++i) {
    if (header[i + 2] != "score_" + std::to_string(i)) {
      throw FormatError("score log line 1: bad score column '" + header[i + 2] + "'");
    }
  }
  std::vector<ScoreRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "score log line " + std::to_string(line_no);
    auto fields = split(line, ',');
    if (static_cast<int>(fields.size()) != n_categories + 2) {
      throw FormatError(where + ": expected " + std::to_string(n_categories + 2) +
                        " fields, got " + std::to_string(fields.size()));
    }
    ScoreRecord rec;
    rec.sample_id = fields[0];
    rec.true_label = static_cast<int>(parse_long(fields[1], where));
    rec.scores.reserve(n_categories);
    for (int i = 0; i < n_categories; ++i) {
      rec.scores.push_back(parse_double(fields[i + 2], where));
    }
    check_record(rec, n_categories);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ScoreRecord> read_score_log_file(const std::string& path,
                                             int& n_categories) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "' for reading");
  return read_score_log(in, n_categories);
}

}  // namespace vclt
