#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hyperembed {

// A hypergraph with multiplicity: an ordered list of vertex subsets over
// [0, n). Identical subsets appearing several times stay distinct entries.
// Immutable by convention after construction; all member queries are pure.
struct Hypergraph {
  int n = 0;
  std::vector<std::vector<int>> links;  // each sorted, unique, 0-based
  std::vector<std::string> labels;      // optional, size n when present

  int m() const { return static_cast<int>(links.size()); }
  int order(int j) const { return static_cast<int>(links.at(j).size()); }
  int degree(int i) const;
};

// Binary incidence of a hypergraph, stored as per-row sorted support lists.
// Row j holds the vertices of link j, so the matrix is overwhelmingly zero
// in the sparse regimes of interest.
struct IncidenceMatrix {
  int m = 0;
  int n = 0;
  std::vector<std::vector<int>> rows;

  bool at(int j, int i) const;
  Eigen::MatrixXd to_dense() const;
  std::size_t nonzeros() const;
};

struct AuditReport {
  std::vector<int> null_vertices;          // 0-based
  std::vector<int> non_informative_links;  // 0-based
  double density = 0.0;
};

// Parses the hyperlink-list text format: one link per line, vertex ids
// separated by whitespace or commas, '#' starts a comment, blank lines are
// skipped. Ids may be 1-based positive integers or arbitrary string labels;
// labels are interned to indices in first-appearance order. Duplicate
// mentions of a vertex within one line collapse to a single membership.
Hypergraph parse_hyperlinks(std::istream& in, std::optional<int> n_hint = std::nullopt);
Hypergraph parse_hyperlinks_file(const std::string& path, std::optional<int> n_hint = std::nullopt);

// Inverse of parse: one line per link, labels when present else 1-based ids.
std::string write_hyperlinks(const Hypergraph& hg);

IncidenceMatrix incidence(const Hypergraph& hg);
Hypergraph links_from_incidence(const IncidenceMatrix& y);

AuditReport audit(const Hypergraph& hg);

// JSON with keys null_vertices, non_informative_links, density (1-based ids).
std::string audit_to_json(const AuditReport& report);

}  // namespace hyperembed
