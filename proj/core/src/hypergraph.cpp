#include "hyperembed/hypergraph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "hyperembed/errors.hpp"
#include "hyperembed/jsonio.hpp"

namespace hyperembed {

int Hypergraph::degree(int i) const {
  if (i < 0 || i >= n) throw DataError("vertex index out of range: " + std::to_string(i));
  int deg = 0;
  for (const auto& link : links) {
    if (std::binary_search(link.begin(), link.end(), i)) ++deg;
  }
  return deg;
}

bool IncidenceMatrix::at(int j, int i) const {
  const auto& row = rows.at(j);
  return std::binary_search(row.begin(), row.end(), i);
}

Eigen::MatrixXd IncidenceMatrix::to_dense() const {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(m, n);
  for (int j = 0; j < m; ++j) {
    for (int i : rows[j]) y(j, i) = 1.0;
  }
  return y;
}

std::size_t IncidenceMatrix::nonzeros() const {
  std::size_t total = 0;
  for (const auto& row : rows) total += row.size();
  return total;
}

namespace {

struct RawToken {
  std::string text;
  int line;
};

bool is_integer_token(const std::string& t) {
  if (t.empty()) return false;
  std::size_t start = (t[0] == '-' || t[0] == '+') ? 1 : 0;
  if (start == t.size()) return false;
  return std::all_of(t.begin() + start, t.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::vector<int> finish_link(std::vector<int> link) {
  std::sort(link.begin(), link.end());
  link.erase(std::unique(link.begin(), link.end()), link.end());
  return link;
}

}  // namespace

Hypergraph parse_hyperlinks(std::istream& in, std::optional<int> n_hint) {
  if (n_hint && *n_hint <= 0) throw DataError("n-hint must be positive");

  std::vector<std::vector<RawToken>> lines;
  std::string line;
  int lineno = 0;
  bool all_integers = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::vector<RawToken> toks;
    std::string cur;
    auto flush = [&]() {
      if (!cur.empty()) {
        all_integers = all_integers && is_integer_token(cur);
        toks.push_back({cur, lineno});
        cur.clear();
      }
    };
    for (char c : line) {
      if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
        flush();
      } else {
        cur += c;
      }
    }
    flush();
    if (!toks.empty()) lines.push_back(std::move(toks));
  }

  Hypergraph hg;
  if (all_integers) {
    long long max_index = 0;
    for (const auto& toks : lines) {
      std::vector<int> link;
      for (const auto& tok : toks) {
        long long v = 0;
        const char* first = tok.text.data();
        const char* last = first + tok.text.size();
        if (first != last && *first == '+') ++first;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) {
          throw ParseError("malformed vertex id '" + tok.text + "'", tok.line);
        }
        if (v <= 0) {
          throw ParseError("vertex index must be >= 1, got " + tok.text, tok.line);
        }
        if (n_hint && v > *n_hint) {
          throw ParseError("vertex index " + tok.text + " exceeds n-hint " +
                               std::to_string(*n_hint),
                           tok.line);
        }
        max_index = std::max(max_index, v);
        link.push_back(static_cast<int>(v - 1));
      }
      hg.links.push_back(finish_link(std::move(link)));
    }
    hg.n = n_hint ? *n_hint : static_cast<int>(max_index);
  } else {
    std::unordered_map<std::string, int> table;
    for (const auto& toks : lines) {
      std::vector<int> link;
      for (const auto& tok : toks) {
        auto [it, inserted] = table.emplace(tok.text, static_cast<int>(hg.labels.size()));
        if (inserted) hg.labels.push_back(tok.text);
        link.push_back(it->second);
      }
      hg.links.push_back(finish_link(std::move(link)));
    }
    const int observed = static_cast<int>(hg.labels.size());
    if (n_hint && *n_hint < observed) {
      throw DataError("n-hint " + std::to_string(*n_hint) + " smaller than " +
                      std::to_string(observed) + " distinct labels");
    }
    hg.n = n_hint ? *n_hint : observed;
    for (int i = observed; i < hg.n; ++i) hg.labels.push_back("v" + std::to_string(i + 1));
  }
  return hg;
}

Hypergraph parse_hyperlinks_file(const std::string& path, std::optional<int> n_hint) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open hyperlink file: " + path);
  return parse_hyperlinks(in, n_hint);
}

std::string write_hyperlinks(const Hypergraph& hg) {
  std::ostringstream out;
  for (const auto& link : hg.links) {
    for (std::size_t t = 0; t < link.size(); ++t) {
      if (t) out << ' ';
      if (!hg.labels.empty()) {
        out << hg.labels.at(link[t]);
      } else {
        out << link[t] + 1;
      }
    }
    out << '\n';
  }
  return out.str();
}

IncidenceMatrix incidence(const Hypergraph& hg) {
  IncidenceMatrix y;
  y.m = hg.m();
  y.n = hg.n;
  y.rows = hg.links;
  return y;
}

Hypergraph links_from_incidence(const IncidenceMatrix& y) {
  Hypergraph hg;
  hg.n = y.n;
  hg.links = y.rows;
  return hg;
}

AuditReport audit(const Hypergraph& hg) {
  const int m = hg.m();
  if (static_cast<long long>(m) * hg.n == 0) {
    throw DataError("audit: density undefined for empty hypergraph (m*n = 0)");
  }
  AuditReport report;
  std::vector<int> deg(hg.n, 0);
  long long ones = 0;
  for (int j = 0; j < m; ++j) {
    if (hg.links[j].empty()) report.non_informative_links.push_back(j);
    ones += static_cast<long long>(hg.links[j].size());
    for (int i : hg.links[j]) ++deg[i];
  }
  for (int i = 0; i < hg.n; ++i) {
    if (deg[i] == 0) report.null_vertices.push_back(i);
  }
  report.density = static_cast<double>(ones) / (static_cast<double>(m) * hg.n);
  return report;
}

std::string audit_to_json(const AuditReport& report) {
  auto one_based = [](const std::vector<int>& v) {
    std::vector<int> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] + 1;
    return out;
  };
  JsonWriter w;
  w.begin_object();
  w.field("null_vertices", one_based(report.null_vertices), false);
  w.field("non_informative_links", one_based(report.non_informative_links));
  w.field("density", report.density);
  w.end_object();
  return w.str();
}

}  // namespace hyperembed
