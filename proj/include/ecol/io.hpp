#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecol/errors.hpp"
#include "ecol/fractional.hpp"
#include "ecol/gs_colorer.hpp"
#include "ecol/list_colorer.hpp"
#include "ecol/multigraph.hpp"
#include "ecol/rational.hpp"

namespace ecol::io {

using nlohmann::json;

// Unreadable or malformed input files; the CLI maps these to exit status 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

inline Multigraph read_multigraph(const std::string& path) {
  try {
    return load_multigraph(read_file(path));
  } catch (const ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

namespace detail {

inline EdgeId edge_key(const std::string& key, int m) {
  int e = -1;
  auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), e);
  if (ec != std::errc{} || ptr != key.data() + key.size() || e < 0 || e >= m)
    throw InputError("'" + key + "' is not an edge id in [0, " + std::to_string(m) + ")");
  return e;
}

inline json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

}  // namespace detail

/// {edge id -> array of color ids}; every edge of the graph must appear.
inline ListAssignment parse_lists(const std::string& text, const Multigraph& g) {
  json j = detail::parse(text, "list file");
  if (!j.is_object()) throw InputError("list file must be a JSON object");
  ListAssignment lists(static_cast<std::size_t>(g.num_edges()));
  std::vector<char> seen(static_cast<std::size_t>(g.num_edges()), 0);
  for (auto& [key, value] : j.items()) {
    EdgeId e = detail::edge_key(key, g.num_edges());
    if (!value.is_array()) throw InputError("list of edge " + key + " is not an array");
    for (const auto& c : value) {
      if (!c.is_number_integer() || c.get<long long>() < 0) throw InputError("list of edge " + key + " holds a non-color");
      lists[e].push_back(c.get<ColorId>());
    }
    std::sort(lists[e].begin(), lists[e].end());
    lists[e].erase(std::unique(lists[e].begin(), lists[e].end()), lists[e].end());
    if (lists[e].empty()) throw InputError("edge " + key + " has an empty list");
    seen[e] = 1;
  }
  for (EdgeId e = 0; e < g.num_edges(); ++e)
    if (!seen[e]) throw InputError("edge " + std::to_string(e) + " has no list");
  return lists;
}

/// {edge id -> positive activity}, or a single number for every edge.
inline std::vector<double> parse_activities(const std::string& text, const Multigraph& g) {
  json j = detail::parse(text, "activity file");
  std::vector<double> lambda(static_cast<std::size_t>(g.num_edges()), 0.0);
  if (j.is_number()) {
    std::fill(lambda.begin(), lambda.end(), j.get<double>());
  } else if (j.is_object()) {
    std::vector<char> seen(lambda.size(), 0);
    for (auto& [key, value] : j.items()) {
      EdgeId e = detail::edge_key(key, g.num_edges());
      if (!value.is_number()) throw InputError("activity of edge " + key + " is not a number");
      lambda[e] = value.get<double>();
      seen[e] = 1;
    }
    for (EdgeId e = 0; e < g.num_edges(); ++e)
      if (!seen[e]) throw InputError("edge " + std::to_string(e) + " has no activity");
  } else {
    throw InputError("activity file must be a number or a JSON object");
  }
  for (double x : lambda)
    if (!(x > 0.0) || !std::isfinite(x)) throw InputError("activities must be positive and finite");
  return lambda;
}

inline json coloring_json(const PartialColoring& c) {
  json j = json::object();
  for (EdgeId e = 0; e < static_cast<EdgeId>(c.size()); ++e)
    if (c[e]) j[std::to_string(e)] = *c[e];
  return j;
}

inline json activities_json(const std::vector<double>& lambda) {
  json j = json::object();
  for (std::size_t e = 0; e < lambda.size(); ++e) j[std::to_string(e)] = lambda[e];
  return j;
}

inline json chi_star_json(const FractionalIndex& chi) {
  json j{{"value", to_string(chi.value)}, {"max_degree", chi.max_degree}, {"bounded", chi.bounded}};
  if (chi.degree_witness || !chi.certificate) {
    j["witness"] = {{"kind", "degree"}, {"max_degree", chi.max_degree}};
  } else {
    j["witness"] = {{"kind", "odd_set"},
                    {"vertices", chi.certificate->vertices},
                    {"edges", chi.certificate->edge_count},
                    {"ratio", to_string(chi.certificate->ratio)}};
  }
  return j;
}

inline json gs_stats_json(const GsStats& s) {
  json rounds = json::array();
  for (const auto& r : s.rounds)
    rounds.push_back({{"N", r.params.N},
                      {"c_star", to_string(r.params.c_star)},
                      {"steps", r.steps},
                      {"attempts", r.attempts},
                      {"flaws_by_kind", r.flaws_by_kind}});
  return {{"rounds", rounds},
          {"colors_used", s.colors_used},
          {"chi_star", to_string(s.chi_star)},
          {"chi_star_bounded", s.chi_bounded},
          {"ratio", s.ratio},
          {"greedy_colors", s.greedy_colors}};
}

inline json list_stats_json(const ListStats& s) {
  json its = json::array();
  for (const auto& it : s.iterations)
    its.push_back({{"iteration", it.iteration},
                   {"uncolored_before", it.uncolored_before},
                   {"colored", it.colored},
                   {"colored_fraction", it.colored_fraction},
                   {"sampled_colored_fraction", it.sampled_colored_fraction},
                   {"pairs", it.pairs},
                   {"steps", it.steps},
                   {"flaws_addressed", it.flaws_addressed},
                   {"flaws_by_kind", it.flaws_by_kind},
                   {"locality_audits", it.locality_audits},
                   {"locality_violations", it.locality_violations},
                   {"max_uncolored_degree", it.max_uncolored_degree},
                   {"ledger_error", it.ledger_error},
                   {"ledger_max_drift", it.ledger_max_drift},
                   {"clamped_equalizers", it.clamped_equalizers}});
  const ListParams& p = s.params;
  json j{{"iterations", its},
         {"stop_reason", s.stop_reason},
         {"greedy_colored", s.greedy_colored},
         {"K_hat", s.K_hat},
         {"params",
          {{"C", p.C},
           {"alpha", p.alpha},
           {"tprime", p.tprime},
           {"t", p.t},
           {"edge_threshold", p.edge_threshold},
           {"vertex_threshold", p.vertex_threshold},
           {"vertex_min_degree", p.vertex_min_degree}}}};
  if (s.chi_star) j["chi_star"] = to_string(*s.chi_star);
  return j;
}

inline json matching_json(const Matching& m) { return json(m.edges); }

}  // namespace ecol::io
